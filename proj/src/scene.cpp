#include "occsynth/scene.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "occsynth/parallel.hpp"

namespace occsynth {

Intrinsics canonical_intrinsics() {
  Intrinsics intr;
  intr.width = 640;
  intr.height = 192;
  intr.fx = intr.fy = 368.0;
  intr.cx = 319.5;
  intr.cy = 95.5;
  return intr;
}

void SceneSpec::validate(double near) const {
  camera.validate();
  if (!(sky_depth > near)) throw Error(ErrorCode::kConfig, "sky_depth must exceed the near plane");
  if (!(texture_frequency >= 0.0)) throw Error(ErrorCode::kConfig, "texture_frequency must be >= 0");
  for (const auto& b : boxes) {
    if (!(b.size.minCoeff() > 0.0)) throw Error(ErrorCode::kConfig, "box sizes must be positive");
    if (!(b.center.z() >= near && b.center.z() <= sky_depth)) {
      throw Error(ErrorCode::kConfig, "primitive center outside [near, sky_depth]");
    }
  }
}

namespace {

Vec3 vec3_from(const nlohmann::json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw Error(ErrorCode::kConfig, std::string(key) + ": expected 3 numbers");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

std::pair<double, double> xz_from(const nlohmann::json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2) throw Error(ErrorCode::kConfig, std::string(key) + ": expected [x, z]");
  return {a[0].get<double>(), a[1].get<double>()};
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const char* what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw Error(ErrorCode::kConfig, std::string(what) + ": unknown key '" + it.key() + "'");
  }
}

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

SceneSpec scene_from_json(const nlohmann::json& j) {
  try {
    reject_unknown(j, {"name", "ground_y", "ground_seed", "boxes", "walls", "sky_depth", "texture_frequency", "camera"},
                   "scene");
    SceneSpec s;
    s.camera = canonical_intrinsics();
    s.name = j.value("name", std::string());
    if (j.contains("ground_y")) {
      if (j["ground_y"].is_null()) {
        s.ground_y.reset();
      } else {
        s.ground_y = j["ground_y"].get<double>();
      }
    }
    s.ground_seed = j.value("ground_seed", s.ground_seed);
    s.sky_depth = j.value("sky_depth", s.sky_depth);
    s.texture_frequency = j.value("texture_frequency", s.texture_frequency);
    if (j.contains("camera")) s.camera = j["camera"].get<Intrinsics>();
    const double floor_y = s.ground_y.value_or(0.0);
    for (const auto& b : j.value("boxes", nlohmann::json::array())) {
      reject_unknown(b, {"center", "base", "size", "yaw_deg", "albedo_seed"}, "box");
      BoxPrimitive p;
      p.size = vec3_from(b, "size");
      if (b.contains("center")) {
        p.center = vec3_from(b, "center");
      } else {
        const auto [x, z] = xz_from(b, "base");
        p.center = Vec3(x, floor_y - 0.5 * p.size.y(), z);
      }
      p.yaw = b.value("yaw_deg", 0.0) * kDeg;
      p.albedo_seed = b.value("albedo_seed", uint64_t{0});
      s.boxes.push_back(p);
    }
    for (const auto& w : j.value("walls", nlohmann::json::array())) {
      reject_unknown(w, {"from", "to", "height", "thickness", "albedo_seed"}, "wall");
      const auto [x0, z0] = xz_from(w, "from");
      const auto [x1, z1] = xz_from(w, "to");
      const double height = w.at("height").get<double>();
      BoxPrimitive p;
      p.size = Vec3(std::hypot(x1 - x0, z1 - z0), height, w.value("thickness", 0.3));
      p.center = Vec3(0.5 * (x0 + x1), floor_y - 0.5 * height, 0.5 * (z0 + z1));
      p.yaw = std::atan2(-(z1 - z0), x1 - x0);
      p.albedo_seed = w.value("albedo_seed", uint64_t{0});
      s.boxes.push_back(p);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("scene json: ") + e.what());
  }
}

nlohmann::json scene_to_json(const SceneSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["ground_y"] = spec.ground_y ? nlohmann::json(*spec.ground_y) : nlohmann::json(nullptr);
  j["ground_seed"] = spec.ground_seed;
  j["sky_depth"] = spec.sky_depth;
  j["texture_frequency"] = spec.texture_frequency;
  j["camera"] = spec.camera;
  j["boxes"] = nlohmann::json::array();
  for (const auto& b : spec.boxes) {
    j["boxes"].push_back({{"center", {b.center.x(), b.center.y(), b.center.z()}},
                          {"size", {b.size.x(), b.size.y(), b.size.z()}},
                          {"yaw_deg", b.yaw / kDeg},
                          {"albedo_seed", b.albedo_seed}});
  }
  return j;
}

SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open scene " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  SceneSpec s = scene_from_json(j);
  if (s.name.empty()) s.name = path.stem().string();
  return s;
}

namespace {

Rgb albedo_from_seed(uint64_t seed) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 17);
  std::uniform_real_distribution<double> u(0.25, 0.9);
  return {static_cast<float>(u(rng)), static_cast<float>(u(rng)), static_cast<float>(u(rng))};
}

}  // namespace

SceneOracle::SceneOracle(SceneSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  for (const auto& b : spec_.boxes) {
    box_rot_.push_back(yaw_rotation(b.yaw).transpose());
    box_albedo_.push_back(albedo_from_seed(b.albedo_seed));
  }
  ground_albedo_ = albedo_from_seed(spec_.ground_seed);
}

SceneHit SceneOracle::trace(const Ray& ray, double max_depth) const {
  // Work with the z-depth parameter: point(s) = origin + s * step.
  const Vec3 step = ray.dir / ray.dir.dot(ray.axis);
  SceneHit best;
  double best_s = max_depth;
  if (spec_.ground_y && step.y() > 0.0) {
    const double s = (*spec_.ground_y - ray.origin.y()) / step.y();
    if (s > 0.0 && s < best_s) {
      best_s = s;
      best.hit = true;
      best.primitive = -1;
    }
  }
  for (size_t i = 0; i < spec_.boxes.size(); ++i) {
    const auto& b = spec_.boxes[i];
    const Vec3 o = box_rot_[i] * (ray.origin - b.center);
    const Vec3 d = box_rot_[i] * step;
    double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
    bool miss = false;
    for (int a = 0; a < 3 && !miss; ++a) {
      const double half = 0.5 * b.size[a];
      if (std::abs(d[a]) < 1e-15) {
        if (std::abs(o[a]) > half) miss = true;
        continue;
      }
      double ta = (-half - o[a]) / d[a], tb = (half - o[a]) / d[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) miss = true;
    }
    if (miss) continue;
    // Origin inside the box counts as an immediate hit.
    const double s = t0 > 0.0 ? t0 : (t1 > 0.0 ? 0.0 : -1.0);
    if (s >= 0.0 && s < best_s) {
      best_s = s;
      best.hit = true;
      best.primitive = static_cast<int>(i);
    }
  }
  if (best.hit) {
    best.depth = best_s;
    best.point = ray.origin + best_s * step;
  }
  return best;
}

bool SceneOracle::occupied(const Point3& p) const {
  if (spec_.ground_y && p.y() > *spec_.ground_y) return true;
  for (size_t i = 0; i < spec_.boxes.size(); ++i) {
    const Vec3 l = box_rot_[i] * (p - spec_.boxes[i].center);
    const Vec3& s = spec_.boxes[i].size;
    if (std::abs(l.x()) <= 0.5 * s.x() && std::abs(l.y()) <= 0.5 * s.y() && std::abs(l.z()) <= 0.5 * s.z()) {
      return true;
    }
  }
  return false;
}

Rgb SceneOracle::surface_color(const SceneHit& hit) const {
  const Rgb& albedo = hit.primitive < 0 ? ground_albedo_ : box_albedo_[hit.primitive];
  const double w = 2.0 * std::numbers::pi * spec_.texture_frequency;
  const Point3& p = hit.point;
  const double s = 0.5 + (std::sin(w * p.x() + 0.3) + std::sin(w * p.y() + 1.1) + std::sin(w * p.z() + 2.3)) / 6.0;
  const double gain = 0.6 + 0.4 * s;
  return {static_cast<float>(albedo[0] * gain), static_cast<float>(albedo[1] * gain),
          static_cast<float>(albedo[2] * gain)};
}

Rgb SceneOracle::sky_color(const Ray& ray) const {
  const double up = std::clamp(-ray.dir.y(), 0.0, 1.0);
  return {static_cast<float>(0.75 - 0.35 * up), static_cast<float>(0.85 - 0.25 * up), 0.95f};
}

DepthMap gt_depth(const SceneOracle& oracle, const Intrinsics& intr, const Pose& pose) {
  intr.validate();
  DepthMap out(intr.height, intr.width);
  const double sky = oracle.spec().sky_depth;
  parallel_for(static_cast<std::ptrdiff_t>(intr.height) * intr.width, [&](std::ptrdiff_t i) {
    const int r = static_cast<int>(i / intr.width), c = static_cast<int>(i % intr.width);
    const SceneHit h = oracle.trace(pixel_ray({double(c), double(r)}, pose, intr), sky);
    out.set(r, c, static_cast<float>(h.hit ? h.depth : sky));
  });
  return out;
}

bool gt_occupancy(const SceneOracle& oracle, const Point3& world) { return oracle.occupied(world); }

Image gt_rgb(const SceneOracle& oracle, const Intrinsics& intr, const Pose& pose) {
  intr.validate();
  Image out(intr.height, intr.width);
  const double sky = oracle.spec().sky_depth;
  parallel_for(static_cast<std::ptrdiff_t>(intr.height) * intr.width, [&](std::ptrdiff_t i) {
    const int r = static_cast<int>(i / intr.width), c = static_cast<int>(i % intr.width);
    const Ray ray = pixel_ray({double(c), double(r)}, pose, intr);
    const SceneHit h = oracle.trace(ray, sky);
    out[i] = h.hit ? oracle.surface_color(h) : oracle.sky_color(ray);
  });
  return out;
}

namespace {

enum class SrcVisibility : uint8_t { kVisible, kHidden, kOutOfView };

Grid<uint8_t> classify(const SceneOracle& oracle, const Intrinsics& intr, const Pose& src_pose, const Pose& dst_pose) {
  intr.validate();
  Grid<uint8_t> out(intr.height, intr.width);
  const double sky = oracle.spec().sky_depth;
  parallel_for(static_cast<std::ptrdiff_t>(intr.height) * intr.width, [&](std::ptrdiff_t i) {
    const int r = static_cast<int>(i / intr.width), c = static_cast<int>(i % intr.width);
    const Ray ray = pixel_ray({double(c), double(r)}, dst_pose, intr);
    const SceneHit h = oracle.trace(ray, sky);
    const Point3 x_src = src_pose.apply(h.hit ? h.point : ray.point_at_depth(sky));
    if (x_src.z() <= 1e-9) {
      out[i] = static_cast<uint8_t>(SrcVisibility::kOutOfView);
      return;
    }
    const Projection p = project(x_src, intr);
    if (p.pixel.u < -0.5 || p.pixel.u >= intr.width - 0.5 || p.pixel.v < -0.5 || p.pixel.v >= intr.height - 0.5) {
      out[i] = static_cast<uint8_t>(SrcVisibility::kOutOfView);
      return;
    }
    const SceneHit from_src = oracle.trace(pixel_ray(p.pixel, src_pose, intr), p.depth);
    const bool hidden = from_src.hit && from_src.depth < p.depth - 0.01;
    out[i] = static_cast<uint8_t>(hidden ? SrcVisibility::kHidden : SrcVisibility::kVisible);
  });
  return out;
}

Mask select(const Grid<uint8_t>& cls, SrcVisibility v) {
  Mask m(cls.height(), cls.width(), 0);
  for (size_t i = 0; i < cls.size(); ++i) m[i] = cls[i] == static_cast<uint8_t>(v);
  return m;
}

}  // namespace

Mask gt_disocclusion(const SceneOracle& oracle, const Intrinsics& intr, const Pose& src_pose, const Pose& dst_pose) {
  return select(classify(oracle, intr, src_pose, dst_pose), SrcVisibility::kHidden);
}

Mask gt_out_of_view(const SceneOracle& oracle, const Intrinsics& intr, const Pose& src_pose, const Pose& dst_pose) {
  return select(classify(oracle, intr, src_pose, dst_pose), SrcVisibility::kOutOfView);
}

ViewTriplet render_triplet(const SceneOracle& oracle, const Intrinsics& intr, const Pose& pose) {
  ViewTriplet t;
  t.image = gt_rgb(oracle, intr, pose);
  t.depth = gt_depth(oracle, intr, pose);
  t.pose = pose;
  t.intr = intr;
  return t;
}

ViewTriplet render_input(const SceneOracle& oracle) {
  return render_triplet(oracle, oracle.spec().camera, Pose::identity());
}

}  // namespace occsynth
