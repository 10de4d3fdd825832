#include "occsynth/core.hpp"

#include <cmath>

namespace occsynth {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kInvalidDepthPixel: return "InvalidDepthPixel";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kUnknownStrategy: return "UnknownStrategy";
    case ErrorCode::kOutOfFrustum: return "OutOfFrustum";
    case ErrorCode::kCuboidMismatch: return "CuboidMismatch";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kGradientCheck: return "GradientCheckFailed";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kNonZeroExit: return "NonZeroExit";
    case ErrorCode::kRefinerFailure: return "RefinerFailure";
    case ErrorCode::kPredictorFailure: return "PredictorFailure";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be positive");
  }
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
    throw Error(ErrorCode::kInvalidArgument, "principal point outside the image");
  }
}

Intrinsics Intrinsics::resized(int new_width, int new_height) const {
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  Intrinsics out;
  out.fx = fx * sx;
  out.fy = fy * sy;
  // Pixel centers are integer coordinates, so the pixel edge (-0.5) scales, not the center.
  out.cx = (cx + 0.5) * sx - 0.5;
  out.cy = (cy + 0.5) * sy - 0.5;
  out.width = new_width;
  out.height = new_height;
  return out;
}

Pose::Pose(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  const double ortho_err = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho_err <= 1e-9) || std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "pose rotation is not a proper rotation");
  }
  if (!translation.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "pose translation is not finite");
  }
}

Pose Pose::from_matrix(const Mat4& m) {
  if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "pose matrix bottom row must be [0 0 0 1]");
  }
  return Pose(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Pose Pose::inverse() const {
  Pose out;
  out.rotation_ = rotation_.transpose();
  out.translation_ = -(out.rotation_ * translation_);
  return out;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation_ = rotation_ * rhs.rotation_;
  out.translation_ = rotation_ * rhs.translation_ + translation_;
  return out;
}

Pose relative_pose(const Pose& from, const Pose& to) { return to * from.inverse(); }

Projection project(const Point3& point_cam, const Intrinsics& intr) {
  if (!(point_cam.z() > 1e-9)) {
    throw Error(ErrorCode::kNonPositiveDepth, "point at or behind the image plane");
  }
  const double inv_z = 1.0 / point_cam.z();
  return {{intr.fx * point_cam.x() * inv_z + intr.cx, intr.fy * point_cam.y() * inv_z + intr.cy},
          point_cam.z()};
}

Point3 unproject(const Pixel& pixel, double depth, const Intrinsics& intr) {
  if (!(depth > 0.0)) {
    throw Error(ErrorCode::kNonPositiveDepth, "unprojection needs positive depth");
  }
  return {(pixel.u - intr.cx) * depth / intr.fx, (pixel.v - intr.cy) * depth / intr.fy, depth};
}

Projection reproject(const Pixel& pixel, double depth, const Pose& rel_pose, const Intrinsics& intr) {
  const Point3 moved = rel_pose.apply(unproject(pixel, depth, intr));
  if (!(moved.z() > 1e-9)) {
    throw Error(ErrorCode::kBehindCamera, "reprojected point is behind the target camera");
  }
  return project(moved, intr);
}

Ray pixel_ray(const Pixel& pixel, const Pose& camera_from_world, const Intrinsics& intr) {
  const Mat3 world_from_cam = camera_from_world.rotation().transpose();
  const Vec3 d_cam((pixel.u - intr.cx) / intr.fx, (pixel.v - intr.cy) / intr.fy, 1.0);
  Ray ray;
  ray.origin = camera_from_world.center();
  ray.dir = (world_from_cam * d_cam).normalized();
  ray.axis = world_from_cam.col(2);
  return ray;
}

Mat3 yaw_rotation(double radians) {
  return Eigen::AngleAxisd(radians, Vec3::UnitY()).toRotationMatrix();
}

Pose displaced_pose(const Pose& reference, const Vec3& center, double yaw) {
  const Mat3 r = yaw_rotation(yaw).transpose();
  return Pose(r, -(r * center)) * reference;
}

void to_json(nlohmann::json& j, const Intrinsics& intr) {
  j = nlohmann::json{{"fx", intr.fx}, {"fy", intr.fy},       {"cx", intr.cx},
                     {"cy", intr.cy}, {"width", intr.width}, {"height", intr.height}};
}

void from_json(const nlohmann::json& j, Intrinsics& intr) {
  try {
    intr.fx = j.at("fx").get<double>();
    intr.fy = j.at("fy").get<double>();
    intr.cx = j.at("cx").get<double>();
    intr.cy = j.at("cy").get<double>();
    intr.width = j.at("width").get<int>();
    intr.height = j.at("height").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad intrinsics JSON: ") + e.what());
  }
  intr.validate();
}

nlohmann::json pose_to_json(const Pose& pose) {
  const Mat4 m = pose.matrix();
  nlohmann::json arr = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) arr.push_back(m(r, c));
  }
  return nlohmann::json{{"camera_from_world", arr}};
}

Pose pose_from_json(const nlohmann::json& j) {
  if (!j.contains("camera_from_world") || !j["camera_from_world"].is_array() ||
      j["camera_from_world"].size() != 16) {
    throw Error(ErrorCode::kConfig, "pose JSON needs a 16-element \"camera_from_world\" array");
  }
  Mat4 m;
  for (int i = 0; i < 16; ++i) m(i / 4, i % 4) = j["camera_from_world"][i].get<double>();
  Mat3 r = m.topLeftCorner<3, 3>();
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    // Float-serialized rotations: snap to the nearest rotation.
    Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    r = svd.matrixU() * svd.matrixV().transpose();
  }
  if (r.determinant() < 0) {
    throw Error(ErrorCode::kConfig, "pose rotation has negative determinant");
  }
  if ((r - m.topLeftCorner<3, 3>()).cwiseAbs().maxCoeff() > 1e-4) {
    throw Error(ErrorCode::kConfig, "pose rotation is not orthonormal");
  }
  return Pose(r, m.topRightCorner<3, 1>());
}

}  // namespace occsynth
