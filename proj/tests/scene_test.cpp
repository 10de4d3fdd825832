#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "occsynth/render.hpp"
#include "test_util.hpp"

namespace occsynth {
namespace {

SceneSpec empty_spec() {
  SceneSpec s;
  s.name = "empty";
  s.ground_y.reset();
  s.camera = canonical_intrinsics();
  return s;
}

// Containment by hand: rotate the offset into the box frame (yaw about +y).
bool inside_box(const BoxPrimitive& b, const Point3& p) {
  const Vec3 d = p - b.center;
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double lx = c * d.x() - s * d.z(), lz = s * d.x() + c * d.z();
  return std::abs(lx) <= 0.5 * b.size.x() && std::abs(d.y()) <= 0.5 * b.size.y() && std::abs(lz) <= 0.5 * b.size.z();
}

// Length (in z-depth units) of the ray's passage through a box, by slabs in the box frame.
double chord(const BoxPrimitive& b, const Ray& ray) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  auto local = [&](const Vec3& v) { return Vec3(c * v.x() - s * v.z(), v.y(), s * v.x() + c * v.z()); };
  const Vec3 o = local(ray.origin - b.center), d = local(ray.dir / ray.dir.dot(ray.axis));
  double t0 = -1e300, t1 = 1e300;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (std::abs(o[a]) > 0.5 * b.size[a]) return 0.0;
      continue;
    }
    const double ta = (-0.5 * b.size[a] - o[a]) / d[a], tb = (0.5 * b.size[a] - o[a]) / d[a];
    t0 = std::max(t0, std::min(ta, tb));
    t1 = std::min(t1, std::max(ta, tb));
  }
  return std::max(0.0, t1 - t0);
}

TEST(CanonicalCamera, Geometry) {
  const Intrinsics k = canonical_intrinsics();
  EXPECT_EQ(k.width, 640);
  EXPECT_EQ(k.height, 192);
  const double hfov = 2.0 * std::atan((k.cx + 0.5) / k.fx) * 180.0 / M_PI;
  EXPECT_NEAR(hfov, 82.0, 1.0);
}

TEST(GtDepth, EmptySceneIsSky) {
  const SceneOracle oracle(empty_spec());
  const DepthMap d = gt_depth(oracle, canonical_intrinsics().resized(160, 48), Pose::identity());
  for (size_t i = 0; i < d.values.size(); ++i) {
    ASSERT_TRUE(d.valid[i]);
    ASSERT_EQ(d.values[i], 80.0f);
  }
}

TEST(GtDepth, LevelCameraOverGround) {
  SceneSpec s = empty_spec();
  s.ground_y = 0.0;
  const SceneOracle oracle(s);
  const Intrinsics k = canonical_intrinsics().resized(320, 96);
  // Camera 1.5 m above the ground (y points down).
  const Pose pose = displaced_pose(Pose::identity(), Vec3(0, -1.5, 0), 0.0);
  const DepthMap d = gt_depth(oracle, k, pose);
  size_t checked = 0;
  for (int r = 0; r < k.height; ++r)
    for (int c = 0; c < k.width; ++c) {
      const Vec3 dir((c - k.cx) / k.fx, (r - k.cy) / k.fy, 1.0);
      const double sin_decl = dir.y() / dir.norm();
      if (sin_decl <= 0.0 || 1.5 / sin_decl * dir.z() / dir.norm() >= 80.0) {
        EXPECT_EQ(d.values(r, c), 80.0f);
        continue;
      }
      const double range = 1.5 / sin_decl;
      const double z = range / dir.norm();
      EXPECT_NEAR(d.values(r, c), z, 1e-4 * z) << r << "," << c;
      ++checked;
    }
  EXPECT_GT(checked, 1000u);
}

TEST(GtDepth, UnitBoxFrontFace) {
  SceneSpec s = empty_spec();
  BoxPrimitive b;
  b.center = Vec3(0, 0, 10);
  s.boxes.push_back(b);
  const SceneOracle oracle(s);
  const Intrinsics k = canonical_intrinsics();
  const DepthMap d = gt_depth(oracle, k, Pose::identity());
  // Pixels whose ray meets z = 9.5 within the unit face.
  int face = 0;
  for (int r = 0; r < k.height; ++r)
    for (int c = 0; c < k.width; ++c) {
      const double x = 9.5 * (c - k.cx) / k.fx, y = 9.5 * (r - k.cy) / k.fy;
      if (std::abs(x) < 0.49 && std::abs(y) < 0.49) {
        EXPECT_NEAR(d.values(r, c), 9.5, 1e-5);
        ++face;
      }
    }
  EXPECT_GT(face, 100);
}

TEST(GtOccupancy, Examples) {
  const SceneOracle oracle(testing::bundled("box-on-plane"));
  const BoxPrimitive& b = oracle.spec().boxes[0];
  EXPECT_TRUE(gt_occupancy(oracle, b.center));
  EXPECT_FALSE(gt_occupancy(oracle, Point3(-4, 0.55, 12)));
  EXPECT_TRUE(gt_occupancy(oracle, Point3(-4, 1.6, 12)));
}

TEST(GtOccupancy, BruteForceGrid) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 4; ++trial) {
    SceneSpec spec = testing::random_scene(rng, 4);
    const SceneOracle oracle(spec);
    size_t mismatches = 0;
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 32; ++j)
        for (int l = 0; l < 32; ++l) {
          const Point3 p(-5 + 10.0 * i / 31, -2 + 4.0 * j / 31, 4 + 20.0 * l / 31);
          bool want = p.y() > *spec.ground_y;
          for (const auto& b : spec.boxes) want = want || inside_box(b, p);
          mismatches += gt_occupancy(oracle, p) != want;
        }
    EXPECT_EQ(mismatches, 0u);
  }
}

TEST(GtDepth, ConsistentWithOccupancy) {
  const Intrinsics k = canonical_intrinsics().resized(160, 48);
  std::mt19937_64 rng(12);
  for (const auto& name : testing::bundled_scenes()) {
    const SceneOracle oracle(testing::bundled(name));
    for (const Pose& pose : {Pose::identity(), displaced_pose(Pose::identity(), Vec3(1.173, -0.231, 0.417), 0.0731)}) {
      const DepthMap d = gt_depth(oracle, k, pose);
      size_t bad = 0, grazing = 0;
      for (int r = 0; r < k.height; ++r)
        for (int c = 0; c < k.width; ++c) {
          if (d.values(r, c) >= 80.0f) continue;
          const Ray ray = pixel_ray({double(c), double(r)}, pose, k);
          bad += gt_occupancy(oracle, ray.point_at_depth(d.values(r, c) * 0.999));
          // Rays clipping a box edge leave it again within the tolerance.
          const int prim = oracle.trace(ray, 80.0).primitive;
          if (prim >= 0 && chord(oracle.spec().boxes[prim], ray) < 0.002 * d.values(r, c)) {
            ++grazing;
            continue;
          }
          bad += !gt_occupancy(oracle, ray.point_at_depth(d.values(r, c) * 1.001));
        }
      EXPECT_EQ(bad, 0u) << name;
      EXPECT_LE(grazing, d.values.size() / 100) << name;
    }
  }
}

TEST(GtRgb, WorldAnchoredTexture) {
  const SceneOracle oracle(testing::bundled("street-canyon"));
  const Intrinsics k = canonical_intrinsics().resized(320, 96);
  const Pose b = displaced_pose(Pose::identity(), Vec3(0.8, -0.1, 1.0), -0.05);
  const DepthMap da = gt_depth(oracle, k, Pose::identity());
  const Image ia = gt_rgb(oracle, k, Pose::identity());
  size_t compared = 0;
  for (int r = 0; r < k.height; r += 3)
    for (int c = 0; c < k.width; c += 3) {
      if (da.values(r, c) >= 80.0f) continue;
      const Point3 x = pixel_ray({double(c), double(r)}, Pose::identity(), k).point_at_depth(da.values(r, c));
      // Ray from b's center straight at x.
      const Vec3 origin = b.center();
      const Vec3 axis = b.rotation().transpose() * Vec3::UnitZ();
      const Ray ray{origin, (x - origin).normalized(), axis};
      const SceneHit h = oracle.trace(ray, 80.0);
      if (!h.hit || (h.point - x).norm() > 1e-6) continue;
      const Rgb cb = oracle.surface_color(h);
      for (int ch = 0; ch < 3; ++ch) ASSERT_LE(std::abs(cb[ch] - ia(r, c)[ch]), 1.0f / 255.0f);
      ++compared;
    }
  EXPECT_GT(compared, 500u);
  for (const auto& px : ia.data())
    for (float ch : px) ASSERT_TRUE(ch >= 0.0f && ch <= 1.0f);
}

TEST(GtDisocclusion, IdentityPairEmpty) {
  for (const auto& name : testing::bundled_scenes()) {
    const SceneOracle oracle(testing::bundled(name));
    const Intrinsics k = canonical_intrinsics().resized(160, 48);
    EXPECT_EQ(testing::count(gt_disocclusion(oracle, k, Pose::identity(), Pose::identity())), 0u) << name;
    EXPECT_EQ(testing::count(gt_out_of_view(oracle, k, Pose::identity(), Pose::identity())), 0u) << name;
  }
}

TEST(GtDisocclusion, BoxShadowBand) {
  // A box standing alone 10 m ahead; moving right reveals ground behind its right side.
  SceneSpec s = empty_spec();
  s.ground_y = 1.55;
  BoxPrimitive b;
  b.center = Vec3(0, 0.55, 10);
  b.size = Vec3(2, 2, 2);
  s.boxes.push_back(b);
  const SceneOracle oracle(s);
  const Intrinsics k = canonical_intrinsics().resized(320, 96);
  const Pose dst = displaced_pose(Pose::identity(), Vec3(2, 0, 0), 0.0);
  const Mask m = gt_disocclusion(oracle, k, Pose::identity(), dst);
  ASSERT_GT(testing::count(m), 0u);
  const DepthMap d = gt_depth(oracle, k, dst);
  for (int r = 0; r < k.height; ++r)
    for (int c = 0; c < k.width; ++c) {
      const Ray ray = pixel_ray({double(c), double(r)}, dst, k);
      const Point3 x = ray.point_at_depth(d.values(r, c));
      // Hidden from the input camera iff the segment to the origin crosses the box.
      bool hidden = false;
      for (int t = 1; t < 4000 && !hidden; ++t) {
        const Point3 q = x * (1.0 - t / 4000.0);
        hidden = inside_box(b, q) && (x - q).norm() > 0.02;
      }
      const bool ambiguous = [&] {
        // Shadow boundary rays graze a box edge; skip those within 2 cm.
        for (int t = 1; t < 4000; ++t) {
          const Point3 q = x * (1.0 - t / 4000.0);
          BoxPrimitive grown = b, shrunk = b;
          grown.size += Vec3::Constant(0.04);
          shrunk.size -= Vec3::Constant(0.04);
          if (inside_box(grown, q) != inside_box(shrunk, q) && (x - q).norm() > 0.05) return true;
        }
        return false;
      }();
      if (ambiguous || d.values(r, c) >= 80.0f) continue;
      EXPECT_EQ(bool(m(r, c)), hidden) << r << "," << c;
      if (m(r, c)) EXPECT_GT(x.x(), 1.0);  // right of the box's left face
    }
}

TEST(SceneSpec, JsonRoundTripAndValidation) {
  for (const auto& name : testing::bundled_scenes()) {
    const SceneSpec a = testing::bundled(name);
    const SceneSpec b = scene_from_json(scene_to_json(a));
    ASSERT_EQ(a.boxes.size(), b.boxes.size());
    for (size_t i = 0; i < a.boxes.size(); ++i) {
      EXPECT_LT((a.boxes[i].center - b.boxes[i].center).norm(), 1e-12);
      EXPECT_LT((a.boxes[i].size - b.boxes[i].size).norm(), 1e-12);
      EXPECT_NEAR(a.boxes[i].yaw, b.boxes[i].yaw, 1e-12);
    }
    EXPECT_EQ(a.ground_y, b.ground_y);
    EXPECT_EQ(a.camera, b.camera);
  }
  EXPECT_GE(testing::bundled_scenes().size(), 6u);
  auto code = [](const nlohmann::json& j) -> std::optional<ErrorCode> {
    try {
      SceneOracle o(scene_from_json(j));
    } catch (const Error& e) {
      return e.code();
    }
    return std::nullopt;
  };
  EXPECT_EQ(code({{"boxes", {{{"center", {0, 0, 10}}, {"size", {1, 0, 1}}}}}}), ErrorCode::kConfig);
  EXPECT_EQ(code({{"boxes", {{{"center", {0, 0, 1}}, {"size", {1, 1, 1}}}}}}), ErrorCode::kConfig);
  EXPECT_EQ(code({{"boxes", {{{"center", {0, 0, 90}}, {"size", {1, 1, 1}}}}}}), ErrorCode::kConfig);
  EXPECT_EQ(code({{"colour", 1}}), ErrorCode::kConfig);
  EXPECT_EQ(code({{"boxes", {{{"center", {0, 0}}, {"size", {1, 1, 1}}}}}}), ErrorCode::kConfig);
  try {
    load_scene("/nonexistent/scene.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(SceneSpec, WallFromTo) {
  const SceneSpec s = scene_from_json(nlohmann::json::parse(
      R"({"walls": [{"from": [-3, 5], "to": [3, 5], "height": 4, "thickness": 0.2}]})"));
  ASSERT_EQ(s.boxes.size(), 1u);
  const SceneOracle oracle(s);
  EXPECT_TRUE(gt_occupancy(oracle, Point3(0, 0, 5)));
  EXPECT_TRUE(gt_occupancy(oracle, Point3(2.9, -2.4, 5.09)));
  EXPECT_FALSE(gt_occupancy(oracle, Point3(0, -2.5, 5)));
  EXPECT_FALSE(gt_occupancy(oracle, Point3(0, 0, 5.2)));
}

TEST(SingleView, RoundTripDepth) {
  const Intrinsics k = canonical_intrinsics().resized(320, 96);
  for (const auto& name : testing::bundled_scenes()) {
    const SceneOracle oracle(testing::bundled(name));
    const ViewTriplet input = render_triplet(oracle, k, Pose::identity());
    const PseudoVolume vol(input);
    const RenderedView rv = render_view(vol, k, Pose::identity(), {}, {}, view_occlusion_maps(vol, {}), {});
    // Rays that never terminate read as the far plane.
    double acc = 0.0;
    for (size_t i = 0; i < input.depth.values.size(); ++i) {
      const double z = rv.depth.valid[i] ? rv.depth.values[i] : 80.0;
      acc += std::abs(z - input.depth.values[i]) / input.depth.values[i];
    }
    EXPECT_LT(acc / input.depth.values.size(), 0.02) << name;
  }
}

}  // namespace
}  // namespace occsynth
