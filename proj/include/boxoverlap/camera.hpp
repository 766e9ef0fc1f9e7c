#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <vector>

namespace boxoverlap {

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  // Throws ConfigError when focal lengths or the principal point are out of range.
  void validate() const;

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
};

// Camera-to-world rigid transform: x_world = rotation * x_cam + translation.
// Camera frame: +x right, +y down, +z along the optical axis.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  void validate() const;

  Eigen::Vector3d apply(const Eigen::Vector3d& p_cam) const {
    return rotation * p_cam + translation;
  }
  // Left-multiplies a world-frame rigid motion: returns motion * this.
  Pose compose(const Pose& motion) const;
};

// A posed depth image. Depth is the z coordinate in the camera frame; a pixel
// is valid iff its depth is finite and strictly positive.
class CameraView {
 public:
  CameraView() = default;
  CameraView(std::string id, CameraIntrinsics intrinsics, Pose pose,
             std::vector<double> depth);

  const std::string& id() const { return id_; }
  const CameraIntrinsics& intrinsics() const { return intrinsics_; }
  const Pose& pose() const { return pose_; }
  const std::vector<double>& depth() const { return depth_; }

  int width() const { return intrinsics_.width; }
  int height() const { return intrinsics_.height; }

  double depth_at(int row, int col) const {
    return depth_[static_cast<std::size_t>(row) * width() + col];
  }
  bool valid(int row, int col) const;
  std::vector<bool> valid_mask() const;
  std::size_t valid_count() const;

  // Back-projection of pixel (col,row) with its stored depth, camera frame.
  Eigen::Vector3d camera_point(int row, int col) const;

  void set_pose(const Pose& pose);
  void set_id(std::string id) { id_ = std::move(id); }

 private:
  std::string id_;
  CameraIntrinsics intrinsics_;
  Pose pose_;
  std::vector<double> depth_;
};

// Rotation whose optical axis points from `position` toward `target`, with the
// image "down" direction as close as possible to `down_hint`.
Pose look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
             const Eigen::Vector3d& down_hint = Eigen::Vector3d(0, -1, 0));

}  // namespace boxoverlap
