#include "boxoverlap/camera.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <sstream>

#include "boxoverlap/error.hpp"

namespace boxoverlap {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw ConfigError("intrinsics: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw ConfigError("intrinsics: image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw ConfigError("intrinsics: principal point outside the image");
  }
}

void Pose::validate() const {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw ConfigError("pose: rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw ConfigError("pose: rotation determinant is not +1");
  }
  if (!translation.allFinite()) {
    throw ConfigError("pose: translation is not finite");
  }
}

Pose Pose::compose(const Pose& motion) const {
  Pose out;
  out.rotation = motion.rotation * rotation;
  out.translation = motion.rotation * translation + motion.translation;
  return out;
}

CameraView::CameraView(std::string id, CameraIntrinsics intrinsics, Pose pose,
                       std::vector<double> depth)
    : id_(std::move(id)),
      intrinsics_(intrinsics),
      pose_(std::move(pose)),
      depth_(std::move(depth)) {
  intrinsics_.validate();
  pose_.validate();
  if (depth_.size() != intrinsics_.pixel_count()) {
    std::ostringstream msg;
    msg << "view '" << id_ << "': depth has " << depth_.size()
        << " values, expected " << intrinsics_.pixel_count();
    throw ConfigError(msg.str());
  }
}

bool CameraView::valid(int row, int col) const {
  const double d = depth_at(row, col);
  return std::isfinite(d) && d > 0.0;
}

std::vector<bool> CameraView::valid_mask() const {
  std::vector<bool> mask(depth_.size());
  for (std::size_t i = 0; i < depth_.size(); ++i) {
    mask[i] = std::isfinite(depth_[i]) && depth_[i] > 0.0;
  }
  return mask;
}

std::size_t CameraView::valid_count() const {
  std::size_t n = 0;
  for (double d : depth_) n += (std::isfinite(d) && d > 0.0) ? 1 : 0;
  return n;
}

Eigen::Vector3d CameraView::camera_point(int row, int col) const {
  const double d = depth_at(row, col);
  return {d * (col - intrinsics_.cx) / intrinsics_.fx,
          d * (row - intrinsics_.cy) / intrinsics_.fy, d};
}

void CameraView::set_pose(const Pose& pose) {
  pose.validate();
  pose_ = pose;
}

Pose look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
             const Eigen::Vector3d& down_hint) {
  const Eigen::Vector3d offset = target - position;
  if (!(offset.norm() > 0.0) || !offset.allFinite()) {
    throw ConfigError("look_at: camera position equals target");
  }
  const Eigen::Vector3d forward = offset.normalized();
  Eigen::Vector3d down = down_hint - down_hint.dot(forward) * forward;
  if (down.norm() < 1e-9) {
    const Eigen::Vector3d alt = std::abs(forward.x()) < 0.9
                                    ? Eigen::Vector3d::UnitX()
                                    : Eigen::Vector3d::UnitY();
    down = alt - alt.dot(forward) * forward;
  }
  down.normalize();
  const Eigen::Vector3d right = down.cross(forward);

  Pose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.translation = position;
  return pose;
}

}  // namespace boxoverlap
