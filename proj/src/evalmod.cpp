#include "occsynth/evalmod.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "occsynth/parallel.hpp"

namespace occsynth {

EvalCuboid EvalCuboid::preset(const std::string& name) {
  if (name == "kitti") return kitti();
  if (name == "waymo") return waymo();
  throw Error(ErrorCode::kConfig, "unknown cuboid preset '" + name + "'");
}

void EvalCuboid::validate() const {
  if (!(x_max > x_min && y_max > y_min && z_max > z_min)) {
    throw Error(ErrorCode::kInvalidArgument, "empty cuboid range");
  }
  if (!(voxel > 0.0)) throw Error(ErrorCode::kInvalidArgument, "voxel size must be positive");
}

namespace {
int cells(double lo, double hi, double voxel) { return static_cast<int>(std::ceil((hi - lo) / voxel - 1e-9)); }
}  // namespace

int EvalCuboid::nx() const { return cells(x_min, x_max, voxel); }
int EvalCuboid::ny() const { return cells(y_min, y_max, voxel); }
int EvalCuboid::nz() const { return cells(z_min, z_max, voxel); }

Point3 EvalCuboid::center(int ix, int iy, int iz) const {
  return {x_min + (ix + 0.5) * voxel, y_min + (iy + 0.5) * voxel, z_min + (iz + 0.5) * voxel};
}

VoxelGrid::VoxelGrid(const EvalCuboid& c) : cuboid(c), nx(c.nx()), ny(c.ny()), nz(c.nz()) {
  c.validate();
  occ.assign(static_cast<size_t>(nx) * ny * nz, 0);
}

size_t VoxelGrid::count() const {
  size_t n = 0;
  for (uint8_t v : occ) n += v != 0;
  return n;
}

VoxelGrid voxelize(const std::function<bool(const Point3&)>& occupied, const EvalCuboid& cuboid) {
  VoxelGrid g(cuboid);
  const size_t plane = static_cast<size_t>(g.nx) * g.ny;
  parallel_for(static_cast<std::ptrdiff_t>(g.size()), [&](std::ptrdiff_t i) {
    const int iz = static_cast<int>(i / plane);
    const int iy = static_cast<int>((i % plane) / g.nx);
    const int ix = static_cast<int>(i % g.nx);
    g.occ[i] = occupied(cuboid.center(ix, iy, iz)) ? 1 : 0;
  });
  return g;
}

VoxelGrid voxelize(const PseudoVolume& vol, const EvalCuboid& cuboid) {
  const Pose world_from_input = vol.view(0).pose.inverse();
  return voxelize([&](const Point3& p) { return vol.occupied(world_from_input.apply(p)); }, cuboid);
}

VoxelGrid invisible_mask(const ViewTriplet& input, const EvalCuboid& cuboid) {
  input.validate();
  const double tol = 0.5 * cuboid.voxel - 1e-9;
  const Intrinsics& intr = input.intr;
  return voxelize(
      [&](const Point3& p) {
        if (p.z() <= 1e-9) return true;
        const Projection pr = project(p, intr);
        const double u = pr.pixel.u, v = pr.pixel.v;
        if (u < -0.5 || u >= intr.width - 0.5 || v < -0.5 || v >= intr.height - 0.5) return true;
        const int c = std::clamp(static_cast<int>(std::floor(u + 0.5)), 0, intr.width - 1);
        const int r = std::clamp(static_cast<int>(std::floor(v + 0.5)), 0, intr.height - 1);
        if (!input.depth.is_valid(r, c)) return false;
        return pr.depth - input.depth.values(r, c) > tol;
      },
      cuboid);
}

namespace {

void require_same(const VoxelGrid& a, const VoxelGrid& b) {
  if (!(a.cuboid == b.cuboid) || a.nx != b.nx || a.ny != b.ny || a.nz != b.nz || a.size() != b.size()) {
    throw Error(ErrorCode::kCuboidMismatch, "voxel grids cover different cuboids");
  }
}

std::optional<double> ratio(size_t num, size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

OccMetrics metrics(const VoxelGrid& pred, const VoxelGrid& gt, const VoxelGrid& invisible) {
  require_same(pred, gt);
  require_same(pred, invisible);
  OccMetrics m;
  size_t agree = 0;
  m.voxels = pred.size();
  for (size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.occ[i] != 0, g = gt.occ[i] != 0, inv = invisible.occ[i] != 0;
    agree += p == g;
    m.gt_occupied += g;
    m.pred_occupied += p;
    if (!inv) continue;
    ++m.invisible;
    m.invisible_gt_empty += !g;
    m.invisible_pred_empty += !p;
    m.invisible_both_empty += !g && !p;
  }
  m.gt_empty = m.voxels - m.gt_occupied;
  m.o_acc = ratio(agree, m.voxels);
  m.ie_acc = ratio(m.invisible_both_empty, m.invisible_pred_empty);
  m.ie_rec = ratio(m.invisible_both_empty, m.invisible_gt_empty);
  return m;
}

nlohmann::json metrics_to_json(const OccMetrics& m) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"o_acc", opt(m.o_acc)},
          {"ie_acc", opt(m.ie_acc)},
          {"ie_rec", opt(m.ie_rec)},
          {"counts",
           {{"voxels", m.voxels},
            {"gt_occupied", m.gt_occupied},
            {"gt_empty", m.gt_empty},
            {"pred_occupied", m.pred_occupied},
            {"invisible", m.invisible},
            {"invisible_gt_empty", m.invisible_gt_empty},
            {"invisible_pred_empty", m.invisible_pred_empty},
            {"invisible_both_empty", m.invisible_both_empty}}}};
}

std::optional<double> voxel_iou(const VoxelGrid& a, const VoxelGrid& b) {
  require_same(a, b);
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    inter += a.occ[i] && b.occ[i];
    uni += a.occ[i] || b.occ[i];
  }
  return ratio(inter, uni);
}

namespace {

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error(ErrorCode::kIo, "truncated " + path.string());
  return v;
}

}  // namespace

void write_vox(const std::filesystem::path& path, const VoxelGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write("VOX1", 4);
  put<uint32_t>(out, grid.nx);
  put<uint32_t>(out, grid.ny);
  put<uint32_t>(out, grid.nz);
  const auto& c = grid.cuboid;
  for (double b : {c.x_min, c.x_max, c.y_min, c.y_max, c.z_min, c.z_max}) put<float>(out, static_cast<float>(b));
  std::vector<uint8_t> bits((grid.size() + 7) / 8, 0);
  for (size_t i = 0; i < grid.size(); ++i) {
    if (grid.occ[i]) bits[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
  }
  out.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

VoxelGrid read_vox(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "VOX1", 4) != 0) {
    throw Error(ErrorCode::kIo, path.string() + ": not a VOX1 file");
  }
  const uint32_t nx = get<uint32_t>(in, path), ny = get<uint32_t>(in, path), nz = get<uint32_t>(in, path);
  float b[6];
  for (float& v : b) v = get<float>(in, path);
  VoxelGrid g;
  g.cuboid = EvalCuboid{b[0], b[1], b[2], b[3], b[4], b[5], 0.0};
  // Voxel size is implied by the extent and the cell count along x.
  g.cuboid.voxel = static_cast<double>(b[1] - b[0]) / nx;
  g.nx = static_cast<int>(nx);
  g.ny = static_cast<int>(ny);
  g.nz = static_cast<int>(nz);
  const size_t n = static_cast<size_t>(nx) * ny * nz;
  std::vector<uint8_t> bits((n + 7) / 8);
  if (!in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()))) {
    throw Error(ErrorCode::kIo, "truncated " + path.string());
  }
  g.occ.resize(n);
  for (size_t i = 0; i < n; ++i) g.occ[i] = (bits[i / 8] >> (i % 8)) & 1u;
  return g;
}

void write_ply(const std::filesystem::path& path, const VoxelGrid& grid) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << grid.count()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  const auto& c = grid.cuboid;
  for (int iz = 0; iz < grid.nz; ++iz) {
    for (int iy = 0; iy < grid.ny; ++iy) {
      for (int ix = 0; ix < grid.nx; ++ix) {
        if (!grid.occ[grid.index(ix, iy, iz)]) continue;
        const Point3 p = c.center(ix, iy, iz);
        // y grows downward; map top (y_min) to red and bottom (y_max) to blue.
        const double t = std::clamp((p.y() - c.y_min) / (c.y_max - c.y_min), 0.0, 1.0);
        const int r = static_cast<int>(255 * std::clamp(1.5 - std::abs(4 * t - 1), 0.0, 1.0) + 0.5);
        const int gr = static_cast<int>(255 * std::clamp(1.5 - std::abs(4 * t - 2), 0.0, 1.0) + 0.5);
        const int bl = static_cast<int>(255 * std::clamp(1.5 - std::abs(4 * t - 3), 0.0, 1.0) + 0.5);
        out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' ' << static_cast<float>(p.z()) << ' '
            << r << ' ' << gr << ' ' << bl << '\n';
      }
    }
  }
}

}  // namespace occsynth
