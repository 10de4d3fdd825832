#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <json.hpp>

#include "occsynth/error.hpp"

namespace occsynth {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// 3D point in meters. The frame (camera or world) is stated at each use.
using Point3 = Eigen::Vector3d;

// Continuous pixel coordinates. Pixel centers sit on integers, origin top-left,
// u runs along the width and v along the height.
struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  // Throws kInvalidArgument unless fx,fy > 0 and the principal point lies
  // strictly inside the image.
  void validate() const;

  // Same field of view sampled on a (height x width) grid.
  Intrinsics resized(int new_width, int new_height) const;

  bool operator==(const Intrinsics&) const = default;
};

// Rigid transform stored as camera_from_world: x_cam = rotation * x_world + translation.
class Pose {
 public:
  Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  // Validates orthonormality and det = +1 within 1e-9.
  Pose(const Mat3& rotation, const Vec3& translation);

  static Pose identity() { return Pose(); }
  static Pose from_matrix(const Mat4& m);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Mat4 matrix() const;

  Vec3 apply(const Vec3& x) const { return rotation_ * x + translation_; }
  Pose inverse() const;
  // (a * b).apply(x) == a.apply(b.apply(x))
  Pose operator*(const Pose& rhs) const;

  // Camera center in world coordinates (only meaningful for camera_from_world).
  Vec3 center() const { return -(rotation_.transpose() * translation_); }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

// P_{i->j} = pose_j * pose_i^-1 for camera_from_world poses.
Pose relative_pose(const Pose& from, const Pose& to);

struct Projection {
  Pixel pixel;
  double depth = 0.0;
};

// Throws kNonPositiveDepth when z <= 1e-9.
Projection project(const Point3& point_cam, const Intrinsics& intr);
// Throws kNonPositiveDepth when depth <= 0.
Point3 unproject(const Pixel& pixel, double depth, const Intrinsics& intr);
// pi(rel_pose * pi^-1(p, d)); throws kBehindCamera when the transformed z <= 0.
Projection reproject(const Pixel& pixel, double depth, const Pose& rel_pose, const Intrinsics& intr);

// Ray through a pixel center, parameterized by camera z-depth:
// point(z) = origin + z * step, where step has unit component along the optical axis.
struct Ray {
  Vec3 origin;
  Vec3 dir;   // unit length
  Vec3 axis;  // unit optical axis of the emitting camera
  Vec3 point_at_depth(double z) const { return origin + dir * (z / dir.dot(axis)); }
};

Ray pixel_ray(const Pixel& pixel, const Pose& camera_from_world, const Intrinsics& intr);

// Rotation about the camera's vertical (y) axis.
Mat3 yaw_rotation(double radians);

// Camera moved to `center` (expressed in the reference camera's frame) and turned by
// `yaw` about its vertical axis; returns the new camera_from_world.
Pose displaced_pose(const Pose& reference, const Vec3& center, double yaw);

void to_json(nlohmann::json& j, const Intrinsics& intr);
void from_json(const nlohmann::json& j, Intrinsics& intr);
// {"camera_from_world": [16 row-major numbers]}
nlohmann::json pose_to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& j);

}  // namespace occsynth
