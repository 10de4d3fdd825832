#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "occsynth/pseudovol.hpp"
#include "test_util.hpp"

namespace occsynth {
namespace {

using testing::flat_view;
using testing::make_view;
using testing::tiny_intr;

// Direct evaluation of the frustum / behind-depth conjunction.
OccState naive_occupancy(const std::vector<ViewTriplet>& views, const Point3& p) {
  bool any = false;
  for (const ViewTriplet& v : views) {
    const Vec3 c = v.pose.matrix().block<3, 3>(0, 0) * p + v.pose.matrix().block<3, 1>(0, 3);
    if (c.z() <= 1e-9) continue;
    const double u = v.intr.fx * c.x() / c.z() + v.intr.cx;
    const double w = v.intr.fy * c.y() / c.z() + v.intr.cy;
    if (u < -0.5 || u >= v.intr.width - 0.5 || w < -0.5 || w >= v.intr.height - 0.5) continue;
    const int col = std::min(v.intr.width - 1, static_cast<int>(std::floor(u + 0.5)));
    const int row = std::min(v.intr.height - 1, static_cast<int>(std::floor(w + 0.5)));
    if (!v.depth.valid(row, col)) continue;
    if (c.z() <= v.depth.values(row, col)) return OccState::kEmpty;
    any = true;
  }
  return any ? OccState::kOccupied : OccState::kUnknown;
}

ViewTriplet wavy_view(const Intrinsics& k, const Pose& pose, double base, double amp, double phase) {
  return make_view(k, pose, [=](int r, int c) { return base + amp * std::sin(0.3 * c + phase) * std::cos(0.2 * r); });
}

TEST(InsideFrustum, Examples) {
  const ViewTriplet v = flat_view(tiny_intr(), Pose::identity(), 20.0);
  EXPECT_TRUE(inside_frustum(v, Point3(0, 0, 10)));
  EXPECT_FALSE(inside_frustum(v, Point3(0, 0, -10)));
  const Intrinsics k = tiny_intr();
  const double z = 10.0;
  EXPECT_FALSE(inside_frustum(v, Point3((k.width + 5 - k.cx) * z / k.fx, 0, z)));
  // Half-pixel margin around the outer pixel centers.
  EXPECT_TRUE(inside_frustum(v, Point3((k.width - 0.6 - k.cx) * z / k.fx, 0, z)));
  EXPECT_FALSE(inside_frustum(v, Point3((k.width - 0.4 - k.cx) * z / k.fx, 0, z)));
}

TEST(BehindDepth, Examples) {
  const ViewTriplet v = flat_view(tiny_intr(), Pose::identity(), 10.0);
  EXPECT_TRUE(behind_depth(v, Point3(0, 0, 12)));
  EXPECT_FALSE(behind_depth(v, Point3(0, 0, 8)));
  EXPECT_FALSE(behind_depth(v, Point3(0, 0, 10)));
}

TEST(BehindDepth, InvalidPixel) {
  ViewTriplet v = flat_view(tiny_intr(), Pose::identity(), 10.0);
  for (int r = 0; r < v.intr.height; ++r)
    for (int c = 0; c < v.intr.width; ++c) v.depth.invalidate(r, c);
  try {
    behind_depth(v, Point3(0, 0, 12));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidDepthPixel);
  }
  // The view abstains, so a lone masked view leaves the point unconstrained.
  EXPECT_EQ(PseudoVolume(v).occupancy(Point3(0, 0, 12)), OccState::kUnknown);
}

TEST(BehindDepth, BilinearMinUsesNearestSurface) {
  // Left half at 5 m, right half at 20 m; a point between the two columns sees the closer one.
  const Intrinsics k = tiny_intr();
  const ViewTriplet v = make_view(k, Pose::identity(), [](int, int c) { return c < 32 ? 5.0 : 20.0; });
  const double u = 31.5, z = 10.0;
  const Point3 p((u - k.cx) * z / k.fx, 0.0, z);
  EXPECT_TRUE(behind_depth(v, p, DepthSampling::kBilinearMin));
  EXPECT_FALSE(behind_depth(v, p + Point3(0.001, 0, 0), DepthSampling::kNearest));
}

TEST(Occupancy, Examples) {
  const ViewTriplet a = flat_view(tiny_intr(), Pose::identity(), 10.0);
  PseudoVolume vol(a);
  EXPECT_EQ(vol.occupancy(Point3(0, 0, 12)), OccState::kOccupied);
  EXPECT_EQ(vol.occupancy(Point3(0, 0, -5)), OccState::kUnknown);
  EXPECT_TRUE(vol.occupied(Point3(0, 0, -5)));
  EXPECT_FALSE(vol.with_policy(UnknownPolicy::kEmpty).occupied(Point3(0, 0, -5)));

  // Second view 2 m to the right sees the query point in front of its 15 m plane.
  const ViewTriplet b = flat_view(tiny_intr(), displaced_pose(Pose::identity(), Vec3(2, 0, 0), 0.0), 15.0);
  const Point3 q(0.5, 0, 12);
  EXPECT_TRUE(behind_depth(a, q));
  EXPECT_FALSE(behind_depth(b, q));
  EXPECT_EQ(naive_occupancy({a, b}, q), OccState::kEmpty);
  EXPECT_EQ(vol.add_view(b).occupancy(q), OccState::kEmpty);
}

TEST(AddView, LeavesOriginalUntouched) {
  const PseudoVolume one(flat_view(tiny_intr(), Pose::identity(), 10.0));
  const PseudoVolume two = one.add_view(flat_view(tiny_intr(), Pose::identity(), 14.0));
  EXPECT_EQ(one.size(), 1u);
  EXPECT_EQ(two.size(), 2u);
  EXPECT_EQ(one.occupancy(Point3(0, 0, 12)), OccState::kOccupied);
  EXPECT_EQ(two.occupancy(Point3(0, 0, 12)), OccState::kEmpty);
}

TEST(AddView, DimensionMismatch) {
  const PseudoVolume one(flat_view(tiny_intr(), Pose::identity(), 10.0));
  ViewTriplet bad = flat_view(tiny_intr(), Pose::identity(), 10.0);
  bad.depth = DepthMap(10, 10);
  try {
    one.add_view(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(AddView, DuplicateIsIdempotent) {
  const Intrinsics k = tiny_intr();
  const ViewTriplet a = wavy_view(k, Pose::identity(), 12.0, 3.0, 0.4);
  const PseudoVolume one(a);
  const PseudoVolume two = one.add_view(a);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> x(-12, 12), z(-2, 30);
  for (int i = 0; i < 10000; ++i) {
    const Point3 p(x(rng), x(rng) * 0.6, z(rng));
    ASSERT_EQ(one.occupancy(p), two.occupancy(p));
  }
}

TEST(AddView, ViewExcludingPointChangesNothing) {
  const Intrinsics k = tiny_intr();
  const PseudoVolume one(wavy_view(k, Pose::identity(), 12.0, 3.0, 0.1));
  // Camera looking backwards: none of the forward query points is in its frustum.
  const Pose back = displaced_pose(Pose::identity(), Vec3::Zero(), M_PI);
  const ViewTriplet b = flat_view(k, back, 4.0);
  const PseudoVolume two = one.add_view(b);
  for (int iz = 0; iz < 20; ++iz)
    for (int iy = -10; iy < 10; ++iy)
      for (int ix = -10; ix < 10; ++ix) {
        const Point3 p(0.5 * ix, 0.3 * iy, 1.0 + 1.5 * iz);
        ASSERT_FALSE(inside_frustum(b, p));
        ASSERT_EQ(one.occupancy(p), two.occupancy(p));
      }
}

TEST(PseudoVolume, BruteForceEquivalence) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> off(-2, 2), yaw(-0.3, 0.3), ph(0, 6);
  const Intrinsics k = tiny_intr();
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<ViewTriplet> views;
    views.push_back(wavy_view(k, Pose::identity(), 10.0, 2.0, ph(rng)));
    PseudoVolume vol(views[0]);
    for (int n = 1; n <= trial; ++n) {
      views.push_back(wavy_view(k, displaced_pose(Pose::identity(), Vec3(off(rng), 0, off(rng)), yaw(rng)), 9.0,
                                2.5, ph(rng)));
      vol = vol.add_view(views.back());
    }
    for (int iz = 0; iz < 16; ++iz)
      for (int iy = 0; iy < 16; ++iy)
        for (int ix = 0; ix < 16; ++ix) {
          const Point3 p(-8 + ix * 1.07, -5 + iy * 0.67, 1 + iz * 1.31);
          ASSERT_EQ(vol.occupancy(p), naive_occupancy(views, p)) << p.transpose();
        }
  }
}

TEST(PseudoVolume, MonotonicityProperty) {
  std::mt19937_64 rng(21);
  const Intrinsics k = canonical_intrinsics().resized(160, 48);
  for (int scene = 0; scene < 3; ++scene) {
    const SceneOracle oracle(testing::random_scene(rng, 4));
    std::uniform_real_distribution<double> off(-3, 3), yaw(-0.15, 0.15);
    std::vector<Point3> probes;
    std::uniform_real_distribution<double> x(-10, 10), y(-3, 1.6), z(0, 30);
    for (int i = 0; i < 10000; ++i) probes.emplace_back(x(rng), y(rng), z(rng));
    PseudoVolume vol(render_triplet(oracle, k, Pose::identity()));
    std::vector<OccState> prev(probes.size());
    for (size_t i = 0; i < probes.size(); ++i) prev[i] = vol.occupancy(probes[i]);
    for (int v = 0; v < 4; ++v) {
      vol = vol.add_view(render_triplet(oracle, k, displaced_pose(Pose::identity(), Vec3(off(rng), 0, 0), yaw(rng))));
      for (size_t i = 0; i < probes.size(); ++i) {
        const OccState now = vol.occupancy(probes[i]);
        if (now == OccState::kOccupied) ASSERT_NE(prev[i], OccState::kEmpty);
        if (prev[i] == OccState::kEmpty) ASSERT_EQ(now, OccState::kEmpty);
        prev[i] = now;
      }
    }
  }
}

TEST(PseudoVolume, SingleViewConsistency) {
  const Intrinsics k = tiny_intr();
  const ViewTriplet v = wavy_view(k, Pose::identity(), 10.0, 3.0, 1.0);
  const PseudoVolume vol(v);
  for (int r = 0; r < k.height; r += 3) {
    for (int c = 0; c < k.width; c += 3) {
      const Ray ray = pixel_ray({double(c), double(r)}, v.pose, k);
      const double d = v.depth.values(r, c);
      for (double f : {0.3, 0.7, 0.99}) EXPECT_EQ(vol.occupancy(ray.point_at_depth(d * f)), OccState::kEmpty);
      for (double f : {1.01, 1.5, 3.0}) EXPECT_EQ(vol.occupancy(ray.point_at_depth(d * f)), OccState::kOccupied);
    }
  }
}

TEST(PseudoVolume, FrameInvariance) {
  std::mt19937_64 rng(33);
  const Intrinsics k = tiny_intr();
  const ViewTriplet a = wavy_view(k, Pose::identity(), 10.0, 2.0, 0.3);
  const ViewTriplet b = wavy_view(k, displaced_pose(Pose::identity(), Vec3(1.5, 0, 0.5), 0.1), 11.0, 2.0, 1.3);
  const Pose g(Eigen::AngleAxisd(0.7, Vec3(0.2, 1, -0.3).normalized()).toRotationMatrix(), Vec3(4, -2, 9));
  // World points move by G, so camera_from_world becomes pose * G^-1.
  ViewTriplet ag = a, bg = b;
  ag.pose = a.pose * g.inverse();
  bg.pose = b.pose * g.inverse();
  const PseudoVolume v0 = PseudoVolume(a).add_view(b), v1 = PseudoVolume(ag).add_view(bg);
  std::uniform_real_distribution<double> x(-8, 8), z(0, 25);
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const Point3 p(x(rng), x(rng) * 0.5, z(rng));
    mismatches += v0.occupancy(p) != v1.occupancy(g.apply(p));
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(DepthFiles, PfmAndDptRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "occsynth_depth_io";
  std::filesystem::create_directories(dir);
  DepthMap d = wavy_view(tiny_intr(), Pose::identity(), 10.0, 3.0, 0.5).depth;
  d.invalidate(3, 4);
  write_pfm(dir / "d.pfm", d);
  write_dpt(dir / "d.dpt", d);
  EXPECT_EQ(read_pfm(dir / "d.pfm"), d);
  EXPECT_EQ(read_dpt(dir / "d.dpt"), d);
  EXPECT_EQ(read_depth(dir / "d.pfm"), d);
  EXPECT_EQ(read_depth(dir / "d.dpt"), d);
  std::ifstream in(dir / "d.dpt", std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  EXPECT_EQ(std::string(magic, 4), "DPT1");
}

}  // namespace
}  // namespace occsynth
