#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "boxoverlap/camera.hpp"

namespace boxoverlap::testing {

// Nadir camera at height h above the plane z = 0, looking straight down.
inline CameraView plane_view(std::string id, double x, double y, double h, double fx = 80.0,
                             double fy = 80.0, int width = 64, int height = 48) {
  CameraIntrinsics k{fx, fy, 0.5 * width, 0.5 * height, width, height};
  Pose pose;
  pose.rotation << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  pose.translation = Eigen::Vector3d(x, y, h);
  return CameraView(std::move(id), k, pose,
                    std::vector<double>(static_cast<std::size_t>(width) * height, h));
}

inline Pose rigid_motion(double angle, const Eigen::Vector3d& axis, const Eigen::Vector3d& t) {
  Pose p;
  p.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  p.translation = t;
  return p;
}

}  // namespace boxoverlap::testing
