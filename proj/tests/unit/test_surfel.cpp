#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "boxoverlap/error.hpp"
#include "boxoverlap/surfel.hpp"
#include "boxoverlap/synth.hpp"
#include "support.hpp"

namespace boxoverlap {
namespace {

TEST(Backproject, IdentityCameraSinglePixel) {
  // A lone pixel has no normal; give it valid neighbours on a fronto-parallel plane.
  CameraView v("a", CameraIntrinsics{1, 1, 1, 1, 3, 3}, Pose{}, std::vector<double>(9, 1.0));
  const SurfelCloud c = backproject(v);
  ASSERT_EQ(c.size(), 9u);
  bool found = false;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.source_pixel[i] == PixelCoord{1, 1}) {
      EXPECT_EQ(c.points[i], Eigen::Vector3d(0, 0, 1));
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(Backproject, TranslationShiftsEveryPointExactly) {
  CameraView v = testing::plane_view("a", 0.25, -0.5, 3.0);
  const SurfelCloud before = backproject(v);
  Pose moved = v.pose();
  const Eigen::Vector3d t(0.5, -2.0, 0.25);
  moved.translation += t;
  v.set_pose(moved);
  const SurfelCloud after = backproject(v);
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_LT((after.points[i] - before.points[i] - t).norm(), 1e-12);
  }
}

TEST(Backproject, FrontoParallelPlaneNormals) {
  // Camera looking down +z at the plane z = 2 in its own frame.
  CameraView v("a", CameraIntrinsics{50, 50, 16, 12, 32, 24}, Pose{},
               std::vector<double>(32 * 24, 2.0));
  const SurfelCloud c = backproject(v);
  EXPECT_EQ(c.size(), 32u * 24u);
  for (const auto& n : c.view_normals) EXPECT_LT((n - Eigen::Vector3d(0, 0, -1)).norm(), 1e-6);
}

TEST(Backproject, NoValidDepthThrows) {
  CameraView v("empty", CameraIntrinsics{1, 1, 0, 0, 2, 2}, Pose{},
               std::vector<double>(4, std::numeric_limits<double>::quiet_NaN()));
  EXPECT_THROW(backproject(v), GeometryError);
}

TEST(Normals, TiltedPlaneExact) {
  // Plane n . p = d in the camera frame; depth solved per pixel.
  const Eigen::Vector3d n = Eigen::Vector3d(0.3, -0.2, -1.0).normalized();
  const double d = -3.0;
  CameraIntrinsics k{60, 60, 20, 15, 40, 30};
  std::vector<double> depth;
  for (int r = 0; r < k.height; ++r) {
    for (int c = 0; c < k.width; ++c) {
      const Eigen::Vector3d ray((c - k.cx) / k.fx, (r - k.cy) / k.fy, 1.0);
      depth.push_back(d / n.dot(ray));
    }
  }
  const auto normals = estimate_normals(CameraView("p", k, Pose{}, depth));
  for (const auto& nn : normals) {
    ASSERT_TRUE(nn.has_value());
    EXPECT_LT((*nn - n).norm(), 1e-6);
  }
}

TEST(Normals, SphereWithinTwoDegrees) {
  const SphereSurface s{Eigen::Vector3d(0, 0, 0), 2.0};
  CameraPlacement cam{"s", {0, 0, 6}, {0, 0, 0}, 80.0, 64, 48};
  const CameraView v = render_depth(s, cam);
  const auto normals = estimate_normals(v);
  std::size_t checked = 0;
  for (int r = 0; r < v.height(); ++r) {
    for (int c = 0; c < v.width(); ++c) {
      const auto& nn = normals[static_cast<std::size_t>(r) * v.width() + c];
      if (!nn) continue;
      // Skip the silhouette, where the 3x3 window straddles the limb.
      bool interior = true;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          interior = interior && rr >= 0 && cc >= 0 && rr < v.height() && cc < v.width() &&
                     v.valid(rr, cc);
        }
      }
      if (!interior) continue;
      const Eigen::Vector3d world_p = v.pose().apply(v.camera_point(r, c));
      const Eigen::Vector3d analytic = v.pose().rotation.transpose() * (world_p - s.center).normalized();
      // Away from grazing incidence, where a 3x3 plane fit is well conditioned.
      const Eigen::Vector3d ray = v.camera_point(r, c).normalized();
      if (-ray.dot(analytic) < std::cos(60.0 * std::numbers::pi / 180.0)) continue;
      const double angle = std::acos(std::clamp(nn->dot(analytic), -1.0, 1.0));
      EXPECT_LT(angle, 2.0 * std::numbers::pi / 180.0) << "pixel " << r << "," << c;
      ++checked;
    }
  }
  EXPECT_GT(checked, 300u);
}

TEST(Normals, IsolatedPixelExcluded) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> depth(25, nan);
  depth[12] = 1.0;
  CameraView v("iso", CameraIntrinsics{1, 1, 2, 2, 5, 5}, Pose{}, depth);
  const auto normals = estimate_normals(v);
  EXPECT_FALSE(normals[12].has_value());
  EXPECT_THROW(backproject(v), GeometryError);
}

TEST(Normals, FaceTheCamera) {
  const CameraView v = testing::plane_view("a", 0, 0, 4);
  const SurfelCloud c = backproject(v);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_LT(c.normals[i].dot(c.points[i] - v.pose().translation), 0.0);
    EXPECT_NEAR(c.normals[i].norm(), 1.0, 1e-12);
  }
}

SurfelCloud numbered_cloud(std::size_t n) {
  SurfelCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(static_cast<double>(i), 0, 0);
    c.normals.emplace_back(0, 0, 1);
    c.view_normals.emplace_back(0, 0, -1);
    c.source_pixel.push_back({0, static_cast<int>(i)});
  }
  return c;
}

TEST(Subsample, NoOpWhenLargeEnough) {
  const SurfelCloud c = numbered_cloud(50);
  const SurfelCloud s = subsample(c, 50, 3);
  EXPECT_EQ(s.points, c.points);
  EXPECT_EQ(subsample(c, 1000, 3).points, c.points);
}

TEST(Subsample, SizeDeterminismAndOrder) {
  const SurfelCloud c = numbered_cloud(5000);
  const SurfelCloud a = subsample(c, 1000, 42);
  const SurfelCloud b = subsample(c, 1000, 42);
  ASSERT_EQ(a.size(), 1000u);
  EXPECT_EQ(a.points, b.points);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LT(a.points[i - 1].x(), a.points[i].x());
  EXPECT_NE(subsample(c, 1000, 43).points, a.points);
  EXPECT_EQ(a.points.size(), a.normals.size());
  EXPECT_EQ(a.points.size(), a.view_normals.size());
  EXPECT_EQ(a.points.size(), a.source_pixel.size());
}

}  // namespace
}  // namespace boxoverlap
