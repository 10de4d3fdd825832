#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "occsynth/core.hpp"
#include "occsynth/grid.hpp"
#include "occsynth/pseudovol.hpp"

namespace occsynth {

// Box rotated about the vertical axis. Walls are thin boxes.
struct BoxPrimitive {
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
  double yaw = 0.0;  // radians
  uint64_t albedo_seed = 0;
};

// World frame = canonical input camera frame (x right, y down, z forward).
struct SceneSpec {
  std::string name;
  std::optional<double> ground_y = 1.55;  // everything with y > ground_y is solid
  uint64_t ground_seed = 1;
  std::vector<BoxPrimitive> boxes;
  double sky_depth = 80.0;
  double texture_frequency = 0.5;  // cycles per meter
  Intrinsics camera;                // input camera, identity pose

  // Throws kConfig for non-positive sizes or primitives outside [near, sky_depth].
  void validate(double near = 3.0) const;
};

// 192 x 640, ~82 degree horizontal field of view.
Intrinsics canonical_intrinsics();

// JSON scene description. Boxes take either "center" or a ground footprint "base"
// [x, z]; walls are {"from": [x, z], "to": [x, z], "height", "thickness"}.
SceneSpec scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const SceneSpec& spec);
SceneSpec load_scene(const std::filesystem::path& path);

struct SceneHit {
  bool hit = false;
  double depth = 0.0;  // z-depth of the emitting camera
  int primitive = -1;  // box index, or -1 for the ground
  Point3 point = Point3::Zero();
};

class SceneOracle {
 public:
  explicit SceneOracle(SceneSpec spec);

  const SceneSpec& spec() const { return spec_; }

  // Nearest intersection with parameter in (0, max_depth).
  SceneHit trace(const Ray& ray, double max_depth) const;
  bool occupied(const Point3& world) const;
  Rgb surface_color(const SceneHit& hit) const;
  Rgb sky_color(const Ray& ray) const;

 private:
  SceneSpec spec_;
  std::vector<Mat3> box_rot_;  // local_from_world
  std::vector<Rgb> box_albedo_;
  Rgb ground_albedo_;
};

DepthMap gt_depth(const SceneOracle& oracle, const Intrinsics& intr, const Pose& pose);
bool gt_occupancy(const SceneOracle& oracle, const Point3& world);
Image gt_rgb(const SceneOracle& oracle, const Intrinsics& intr, const Pose& pose);
// Destination pixels whose surface point is inside the source field of view but hidden
// from the source camera (1 cm tolerance). Sky is a surface at the sky depth.
Mask gt_disocclusion(const SceneOracle& oracle, const Intrinsics& intr, const Pose& src_pose,
                     const Pose& dst_pose);
// Destination pixels whose surface (or sky) point falls outside the source image or behind it.
Mask gt_out_of_view(const SceneOracle& oracle, const Intrinsics& intr, const Pose& src_pose,
                    const Pose& dst_pose);

// Input triplet of the scene: gt rgb and depth at the identity pose.
ViewTriplet render_input(const SceneOracle& oracle);
ViewTriplet render_triplet(const SceneOracle& oracle, const Intrinsics& intr, const Pose& pose);

}  // namespace occsynth
