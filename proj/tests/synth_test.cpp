#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>
#include <thread>

#include "occsynth/evalmod.hpp"
#include "occsynth/external.hpp"
#include "occsynth/synth.hpp"
#include "test_util.hpp"

#include <httplib.h>

namespace occsynth {
namespace {

std::vector<Point3> random_probes(uint64_t seed, size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> x(-8, 8), y(-3, 2), z(1, 40);
  std::vector<Point3> out;
  for (size_t i = 0; i < n; ++i) out.emplace_back(x(rng), y(rng), z(rng));
  return out;
}

double yaw_of(const Pose& p) {
  const Vec3 axis = p.rotation().transpose() * Vec3::UnitZ();
  return std::atan2(axis.x(), axis.z());
}

TEST(SamplePoses, RandomShift) {
  const PoseSet a = sample_poses(PoseStrategy::kRandomShift, 4, 17, Pose::identity());
  ASSERT_EQ(a.poses.size(), 4u);
  for (const Pose& p : a.poses) {
    const Vec3 c = p.center();
    EXPECT_LE(std::abs(c.x()), 3.0);
    EXPECT_NEAR(c.y(), 0.0, 1e-12);
    EXPECT_NEAR(c.z(), 0.0, 1e-12);
    EXPECT_NEAR(yaw_of(p), 0.0, 1e-12);
  }
  const PoseSet b = sample_poses(PoseStrategy::kRandomShift, 4, 17, Pose::identity());
  for (size_t i = 0; i < 4; ++i) EXPECT_EQ(a.poses[i].matrix(), b.poses[i].matrix());
  const PoseSet c = sample_poses(PoseStrategy::kRandomShift, 4, 18, Pose::identity());
  EXPECT_NE(a.poses[0].matrix(), c.poses[0].matrix());
}

TEST(SamplePoses, RigLayouts) {
  const PoseSet a = sample_poses(PoseStrategy::kRig8, 8, 5, Pose::identity());
  const PoseSet b = sample_poses(PoseStrategy::kRig8, 8, 5, Pose::identity());
  ASSERT_EQ(a.poses.size(), 8u);
  for (size_t i = 0; i < 8; ++i) EXPECT_EQ(a.poses[i].matrix(), b.poses[i].matrix());
  const std::vector<Vec3> rig8 = {{-1, 0, 0}, {1, 0, 0}, {-2, 0, 0}, {2, 0, 0},
                                  {-3, 0, 0}, {3, 0, 0}, {-1.5, 0, 0.5}, {1.5, 0, 0.5}};
  for (size_t i = 0; i < 8; ++i) {
    EXPECT_LT((a.poses[i].center() - rig8[i]).norm(), 1e-12);
    EXPECT_LE(std::abs(yaw_of(a.poses[i])), 5.0 * M_PI / 180.0 + 1e-12);
  }
  const PoseSet r4 = sample_poses(PoseStrategy::kRig4, 4, 5, Pose::identity());
  const std::vector<double> xs = {-1, 1, -2.5, 2.5};
  for (size_t i = 0; i < 4; ++i) EXPECT_LT((r4.poses[i].center() - Vec3(xs[i], 0, 0)).norm(), 1e-12);
  EXPECT_THROW(sample_poses(PoseStrategy::kRig8, 4, 5, Pose::identity()), Error);
  EXPECT_THROW(sample_poses(PoseStrategy::kRig4, 8, 5, Pose::identity()), Error);
  EXPECT_THROW(sample_poses(PoseStrategy::kRandomShift, 0, 5, Pose::identity()), Error);
}

TEST(SamplePoses, OrbitFixesPivot) {
  const PoseSet s = sample_poses(PoseStrategy::kRandomOrbit, 50, 3, Pose::identity());
  for (const Pose& p : s.poses) {
    EXPECT_LT((p.apply(Vec3(0, 0, 5)) - Vec3(0, 0, 5)).norm(), 1e-9);
    EXPECT_LE(std::abs(yaw_of(p)), 10.0 * M_PI / 180.0 + 1e-12);
  }
}

TEST(SamplePoses, StrategyNames) {
  for (const char* n : {"rig4", "rig8", "shift", "orbit", "explicit"}) EXPECT_EQ(to_string(strategy_from_string(n)), n);
  try {
    strategy_from_string("spiral");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownStrategy);
  }
  EXPECT_THROW(sample_poses(PoseStrategy::kExplicit, 1, 0, Pose::identity()), Error);
}

TEST(ProcessingOrder, IncreasingDistanceStable) {
  const std::vector<Pose> poses = {displaced_pose(Pose::identity(), Vec3(3, 0, 0), 0),
                                   displaced_pose(Pose::identity(), Vec3(-1, 0, 0), 0),
                                   displaced_pose(Pose::identity(), Vec3(1, 0, 0), 0.1),
                                   displaced_pose(Pose::identity(), Vec3(0, 0, 2), 0)};
  const auto order = processing_order(poses, Pose::identity());
  ASSERT_EQ(order.size(), 4u);
  EXPECT_EQ(order[0].matrix(), poses[1].matrix());
  EXPECT_EQ(order[1].matrix(), poses[2].matrix());
  EXPECT_EQ(order[2].matrix(), poses[3].matrix());
  EXPECT_EQ(order[3].matrix(), poses[0].matrix());
}

class SynthLoop : public ::testing::Test {
 protected:
  Intrinsics k = canonical_intrinsics().resized(320, 96);
};

TEST_F(SynthLoop, OracleRig8ReachesAccuracy) {
  auto oracle = std::make_shared<SceneOracle>(testing::bundled("box-on-plane"));
  const Intrinsics full = canonical_intrinsics();
  const ViewTriplet input = render_triplet(*oracle, full, Pose::identity());
  OracleRefiner refiner(oracle);
  OracleDepthPredictor predictor(oracle);
  const PseudoVolume vol =
      synthesize(input, sample_poses(PoseStrategy::kRig8, 8, 0, input.pose), refiner, predictor, {});
  EXPECT_EQ(vol.size(), 9u);
  const EvalCuboid cub = EvalCuboid::kitti();
  const VoxelGrid gt = voxelize([&](const Point3& p) { return gt_occupancy(*oracle, p); }, cub);
  const OccMetrics m = metrics(voxelize(vol, cub), gt, invisible_mask(input, cub));
  ASSERT_TRUE(m.o_acc);
  EXPECT_GE(*m.o_acc, 0.95);
}

TEST_F(SynthLoop, OracleRoundTripAndMonotonicity) {
  auto oracle = std::make_shared<SceneOracle>(testing::bundled("occluder-pair"));
  const ViewTriplet input = render_triplet(*oracle, k, Pose::identity());
  OracleRefiner refiner(oracle);
  OracleDepthPredictor predictor(oracle);
  const auto probes = random_probes(4, 10000);
  PseudoVolume shadow(input);
  size_t steps = 0, violations = 0;
  const PseudoVolume vol = synthesize(
      input, sample_poses(PoseStrategy::kRig4, 4, 1, input.pose), refiner, predictor, {}, [&](const SynthStep& s) {
        EXPECT_EQ(s.index, steps++);
        const DepthMap gt = gt_depth(*oracle, k, s.pose);
        double worst = 0.0;
        for (size_t i = 0; i < gt.values.size(); ++i)
          worst = std::max(worst, double(std::abs(s.completed->depth.values[i] - gt.values[i]) / gt.values[i]));
        EXPECT_LT(worst, 1e-3);
        // Refined pixels outside the occlusion mask are the rendered ones.
        for (size_t i = 0; i < s.rendered->occlusion.size(); ++i)
          if (!s.rendered->occlusion[i])
            for (int ch = 0; ch < 3; ++ch)
              ASSERT_LE(std::abs(s.completed->image[i][ch] - s.rendered->rgb[i][ch]), 1.0f / 255.0f);
        const PseudoVolume next = shadow.add_view(*s.completed);
        for (const Point3& p : probes) violations += next.occupied(p) && !shadow.occupied(p);
        shadow = next;
      });
  EXPECT_EQ(steps, 4u);
  EXPECT_EQ(violations, 0u);
  for (const Point3& p : probes) ASSERT_EQ(vol.occupancy(p), shadow.occupancy(p));
}

TEST_F(SynthLoop, InputPoseAddsNothing) {
  auto oracle = std::make_shared<SceneOracle>(testing::bundled("parked-row"));
  const ViewTriplet input = render_triplet(*oracle, k, Pose::identity());
  IdentityRefiner refiner;
  PassthroughDepthPredictor predictor;
  PoseSet one;
  one.poses = {input.pose};
  const PseudoVolume vol = synthesize(input, one, refiner, predictor, {});
  const PseudoVolume single(input);
  EXPECT_EQ(vol.size(), 2u);
  size_t diff = 0;
  for (const Point3& p : random_probes(5, 10000)) diff += vol.occupancy(p) != single.occupancy(p);
  EXPECT_EQ(diff, 0u);

  const PseudoVolume none = synthesize(input, PoseSet{}, refiner, predictor, {});
  EXPECT_EQ(none.size(), 1u);
  for (const Point3& p : random_probes(6, 1000)) ASSERT_EQ(none.occupancy(p), single.occupancy(p));
}

TEST_F(SynthLoop, PassthroughIsDenseAndPositive) {
  auto oracle = std::make_shared<SceneOracle>(testing::bundled("street-canyon"));
  const ViewTriplet input = render_triplet(*oracle, k, Pose::identity());
  const PseudoVolume vol(input);
  const Pose dst = displaced_pose(Pose::identity(), Vec3(2, 0, 0), 0.05);
  const RenderedView rv = render_view(vol, k, dst, {}, {}, view_occlusion_maps(vol, {}), {1});
  PassthroughDepthPredictor predictor;
  const DepthMap d = predictor.predict(rv.rgb, rv, dst, k);
  for (size_t i = 0; i < d.values.size(); ++i) {
    ASSERT_TRUE(d.valid[i]);
    ASSERT_GT(d.values[i], 0.0f);
  }
  IdentityRefiner id;
  EXPECT_EQ(id.refine(rv, dst, k), rv.rgb);
}

class ThrowingRefiner : public Refiner {
 public:
  explicit ThrowingRefiner(int fail_at) : fail_at_(fail_at) {}
  Image refine(const RenderedView& view, const Pose&, const Intrinsics&) override {
    if (calls_++ == fail_at_) throw Error(ErrorCode::kTimeout, "refiner timed out");
    return view.rgb;
  }

 private:
  int fail_at_;
  int calls_ = 0;
};

class HoleyPredictor : public DepthPredictor {
 public:
  DepthMap predict(const Image& rgb, const RenderedView&, const Pose&, const Intrinsics&) override {
    DepthMap d(rgb.height(), rgb.width());
    for (int r = 0; r < d.height(); ++r)
      for (int c = 0; c < d.width(); ++c) d.set(r, c, 5.0f);
    d.invalidate(0, 0);
    return d;
  }
};

TEST_F(SynthLoop, FailuresCarryPartialVolume) {
  auto oracle = std::make_shared<SceneOracle>(testing::bundled("flat"));
  const ViewTriplet input = render_triplet(*oracle, canonical_intrinsics().resized(160, 48), Pose::identity());
  ThrowingRefiner refiner(2);
  PassthroughDepthPredictor predictor;
  try {
    synthesize(input, sample_poses(PoseStrategy::kRig4, 4, 0, input.pose), refiner, predictor, {});
    FAIL();
  } catch (const SynthesisError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRefinerFailure);
    EXPECT_EQ(e.cause(), ErrorCode::kTimeout);
    ASSERT_TRUE(e.partial());
    EXPECT_EQ(e.partial()->size(), 3u);
  }
  IdentityRefiner id;
  HoleyPredictor holey;
  try {
    synthesize(input, sample_poses(PoseStrategy::kRig4, 4, 0, input.pose), id, holey, {});
    FAIL();
  } catch (const SynthesisError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPredictorFailure);
    EXPECT_EQ(e.partial()->size(), 1u);
  }
}

class External : public ::testing::Test {
 protected:
  void SetUp() override {
    ep.work_dir = std::filesystem::temp_directory_path() /
                  ("occsynth-ext-test-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
                   ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(ep.work_dir);
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> byte(0, 255);
    cond.intr = canonical_intrinsics().resized(32, 16);
    cond.rgb = Image(16, 32, Rgb{0, 0, 0});
    for (auto& px : cond.rgb.data())
      for (float& ch : px) ch = byte(rng) / 255.0f;
    cond.depth = DepthMap(16, 32);
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 32; ++c) cond.depth.set(r, c, 4.0f + r);
    cond.mask = Mask(16, 32, 0);
    cond.pose = Pose::identity();
  }
  void TearDown() override { std::filesystem::remove_all(ep.work_dir); }

  ExternalEndpoint ep;
  Conditioning cond;
};

TEST_F(External, EchoProcess) {
  ep.command = {"sh", "-c", "cp \"$1/corrupted.png\" \"$1/result.png\" && cp \"$1/depth.pfm\" \"$1/result.pfm\"", "sh"};
  EXPECT_EQ(external_refine(ep, cond), cond.rgb);
  EXPECT_EQ(external_depth(ep, cond), cond.depth);
}

TEST_F(External, ConstantImage) {
  std::filesystem::create_directories(ep.work_dir);
  const Image constant(16, 32, Rgb{0.2f, 0.4f, 0.6f});
  const auto src = ep.work_dir / "constant.png";
  write_png(src, constant);
  ep.command = {"sh", "-c", "cp \"" + src.string() + "\" \"$1/result.png\"", "sh"};
  EXPECT_EQ(external_refine(ep, cond), read_png(src));
}

TEST_F(External, DeadEndpointTimesOut) {
  ep.command = {"sh", "-c", "sleep 30", "sh"};
  ep.timeout_s = 0.3;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    external_refine(ep, cond);
    FAIL();
  } catch (const ExternalError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTimeout);
    EXPECT_TRUE(std::filesystem::exists(e.job_dir() / "corrupted.png"));
  }
  const double took = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_GE(took, 0.3);
  EXPECT_LT(took, 5.0);
}

TEST_F(External, FailureModes) {
  ep.command = {"false"};
  try {
    external_refine(ep, cond);
    FAIL();
  } catch (const ExternalError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonZeroExit);
  }
  ep.command = {"true"};
  try {
    external_depth(ep, cond);
    FAIL();
  } catch (const ExternalError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedResponse);
  }
  ep.command = {"sh", "-c", "echo garbage > \"$1/result.png\"", "sh"};
  try {
    external_refine(ep, cond);
    FAIL();
  } catch (const ExternalError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedResponse);
  }
  ep.command = {"/nonexistent/refiner-binary"};
  EXPECT_THROW(external_refine(ep, cond), ExternalError);
}

TEST_F(External, HttpEchoAndDeadPort) {
  httplib::Server server;
  server.Post("/refine", [](const httplib::Request& req, httplib::Response& res) {
    const auto dir = std::filesystem::path(nlohmann::json::parse(req.body)["job_dir"].get<std::string>());
    std::filesystem::copy_file(dir / "corrupted.png", dir / "result.png");
    res.set_content("{}", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  ep.mode = ExternalEndpoint::Mode::kHttp;
  ep.url = "http://127.0.0.1:" + std::to_string(port) + "/refine";
  ep.timeout_s = 10.0;
  EXPECT_EQ(external_refine(ep, cond), cond.rgb);

  ep.url = "http://127.0.0.1:" + std::to_string(port) + "/missing";
  try {
    external_refine(ep, cond);
    FAIL();
  } catch (const ExternalError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonZeroExit);
  }
  server.stop();
  th.join();

  ep.url = "http://127.0.0.1:" + std::to_string(port) + "/refine";
  ep.timeout_s = 0.5;
  try {
    external_refine(ep, cond);
    FAIL();
  } catch (const ExternalError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTimeout);
  }
}

TEST_F(External, RefinerInLoopMapsCause) {
  auto oracle = std::make_shared<SceneOracle>(testing::bundled("flat"));
  const Intrinsics small = canonical_intrinsics().resized(64, 20);
  const ViewTriplet input = render_triplet(*oracle, small, Pose::identity());
  ep.command = {"sh", "-c", "sleep 30", "sh"};
  ep.timeout_s = 0.2;
  ExternalRefiner refiner(ep);
  PassthroughDepthPredictor predictor;
  try {
    synthesize(input, sample_poses(PoseStrategy::kRandomShift, 2, 0, input.pose), refiner, predictor, {});
    FAIL();
  } catch (const SynthesisError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRefinerFailure);
    EXPECT_EQ(e.cause(), ErrorCode::kTimeout);
  }
}

}  // namespace
}  // namespace occsynth
