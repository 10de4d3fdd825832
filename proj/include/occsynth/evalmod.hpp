#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "occsynth/pseudovol.hpp"

namespace occsynth {

// Axis-aligned box in the input camera frame.
struct EvalCuboid {
  double x_min = -4.0, x_max = 4.0;
  double y_min = -1.0, y_max = 0.0;
  double z_min = 4.0, z_max = 20.0;
  double voxel = 0.2;

  static EvalCuboid kitti() { return {}; }
  static EvalCuboid waymo() {
    EvalCuboid c;
    c.y_min = -0.75;
    return c;
  }
  // "kitti" or "waymo"; throws kConfig otherwise.
  static EvalCuboid preset(const std::string& name);

  void validate() const;
  int nx() const;
  int ny() const;
  int nz() const;
  Point3 center(int ix, int iy, int iz) const;
  bool operator==(const EvalCuboid&) const = default;
};

// Occupancy bits, linear index (iz * ny + iy) * nx + ix.
struct VoxelGrid {
  EvalCuboid cuboid;
  int nx = 0, ny = 0, nz = 0;
  std::vector<uint8_t> occ;

  VoxelGrid() = default;
  explicit VoxelGrid(const EvalCuboid& c);
  size_t index(int ix, int iy, int iz) const { return (static_cast<size_t>(iz) * ny + iy) * nx + ix; }
  size_t size() const { return occ.size(); }
  size_t count() const;
  bool operator==(const VoxelGrid&) const = default;
};

// Predicate over input-camera-frame points, evaluated at voxel centers.
VoxelGrid voxelize(const std::function<bool(const Point3&)>& occupied, const EvalCuboid& cuboid);
// Binary collapse of the volume at voxel centers; the cuboid lives in view 0's camera frame.
VoxelGrid voxelize(const PseudoVolume& vol, const EvalCuboid& cuboid);

// Voxels whose center projects outside the input image or lies more than half a
// voxel behind the input depth.
VoxelGrid invisible_mask(const ViewTriplet& input, const EvalCuboid& cuboid);

struct OccMetrics {
  std::optional<double> o_acc, ie_acc, ie_rec;
  size_t voxels = 0;
  size_t gt_occupied = 0;
  size_t gt_empty = 0;
  size_t pred_occupied = 0;
  size_t invisible = 0;
  size_t invisible_gt_empty = 0;
  size_t invisible_pred_empty = 0;
  size_t invisible_both_empty = 0;
};

// Throws kCuboidMismatch when the grids disagree in cuboid or shape.
OccMetrics metrics(const VoxelGrid& pred, const VoxelGrid& gt, const VoxelGrid& invisible);
nlohmann::json metrics_to_json(const OccMetrics& m);

// Intersection over union of the occupied sets (undefined when both are empty).
std::optional<double> voxel_iou(const VoxelGrid& a, const VoxelGrid& b);

// "VOX1", u32 dims[3], f32 bounds[6] (x, y, z min/max), bit-packed occupancy (LSB first).
void write_vox(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid read_vox(const std::filesystem::path& path);
// ASCII PLY of occupied voxel centers colored by height.
void write_ply(const std::filesystem::path& path, const VoxelGrid& grid);

}  // namespace occsynth
