#include "occsynth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "occsynth/parallel.hpp"
#include "occsynth/warp.hpp"

namespace occsynth {

PoseStrategy strategy_from_string(const std::string& name) {
  if (name == "rig4") return PoseStrategy::kRig4;
  if (name == "rig8") return PoseStrategy::kRig8;
  if (name == "shift") return PoseStrategy::kRandomShift;
  if (name == "orbit") return PoseStrategy::kRandomOrbit;
  if (name == "explicit") return PoseStrategy::kExplicit;
  throw Error(ErrorCode::kUnknownStrategy, "unknown pose strategy '" + name + "'");
}

std::string to_string(PoseStrategy s) {
  switch (s) {
    case PoseStrategy::kRig4: return "rig4";
    case PoseStrategy::kRig8: return "rig8";
    case PoseStrategy::kRandomShift: return "shift";
    case PoseStrategy::kRandomOrbit: return "orbit";
    case PoseStrategy::kExplicit: return "explicit";
  }
  return "?";
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<Vec3> rig_offsets(PoseStrategy s) {
  if (s == PoseStrategy::kRig4) return {{-1, 0, 0}, {1, 0, 0}, {-2.5, 0, 0}, {2.5, 0, 0}};
  return {{-1, 0, 0}, {1, 0, 0}, {-2, 0, 0}, {2, 0, 0}, {-3, 0, 0}, {3, 0, 0}, {-1.5, 0, 0.5}, {1.5, 0, 0.5}};
}

}  // namespace

PoseSet sample_poses(PoseStrategy strategy, int n, uint64_t seed, const Pose& input_pose) {
  PoseSet set;
  set.strategy = strategy;
  set.seed = seed;
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  switch (strategy) {
    case PoseStrategy::kRig4:
    case PoseStrategy::kRig8: {
      const int expected = strategy == PoseStrategy::kRig4 ? 4 : 8;
      if (n != expected) {
        throw Error(ErrorCode::kInvalidArgument, to_string(strategy) + " needs n = " + std::to_string(expected));
      }
      for (const Vec3& c : rig_offsets(strategy)) {
        set.poses.push_back(displaced_pose(input_pose, c, uniform(-5.0, 5.0) * kDeg));
      }
      break;
    }
    case PoseStrategy::kRandomShift:
    case PoseStrategy::kRandomOrbit: {
      if (n < 1) throw Error(ErrorCode::kInvalidArgument, "pose count must be >= 1");
      const Vec3 pivot(0.0, 0.0, 5.0);
      for (int i = 0; i < n; ++i) {
        if (strategy == PoseStrategy::kRandomShift) {
          set.poses.push_back(displaced_pose(input_pose, Vec3(uniform(-3.0, 3.0), 0.0, 0.0), 0.0));
        } else {
          const double yaw = uniform(-10.0, 10.0) * kDeg;
          const Vec3 c = pivot + yaw_rotation(yaw) * Vec3(0.0, 0.0, -pivot.z());
          set.poses.push_back(displaced_pose(input_pose, c, yaw));
        }
      }
      break;
    }
    case PoseStrategy::kExplicit:
      throw Error(ErrorCode::kUnknownStrategy, "explicit poses are not sampled");
  }
  return set;
}

Image OracleRefiner::refine(const RenderedView& view, const Pose& pose, const Intrinsics& intr) {
  const Image gt = gt_rgb(*oracle_, intr, pose);
  require_same_shape(gt.height(), gt.width(), view.rgb.height(), view.rgb.width(), "oracle refiner: size mismatch");
  Image out = view.rgb;
  for (size_t i = 0; i < out.size(); ++i) {
    if (view.occlusion[i]) out[i] = gt[i];
  }
  return out;
}

DepthMap OracleDepthPredictor::predict(const Image&, const RenderedView&, const Pose& pose, const Intrinsics& intr) {
  return gt_depth(*oracle_, intr, pose);
}

DepthMap PassthroughDepthPredictor::predict(const Image&, const RenderedView& view, const Pose&, const Intrinsics&) {
  DepthMap source = completed_depth(view, far_);
  const int h = source.height(), w = source.width();
  for (size_t i = 0; i < source.values.size(); ++i) {
    if (view.occlusion[i]) {
      source.values[i] = 0.0f;
      source.valid[i] = 0;
    }
  }
  DepthMap filled = source;
  Mask was_filled(h, w, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (source.is_valid(r, c)) continue;
      int best = -1;
      for (int d = 1; d < w && best < 0; ++d) {
        const int left = c - d, right = c + d;
        const bool lv = left >= 0 && source.is_valid(r, left);
        const bool rv = right < w && source.is_valid(r, right);
        if (lv && rv) {
          best = source.values(r, left) >= source.values(r, right) ? left : right;
        } else if (lv) {
          best = left;
        } else if (rv) {
          best = right;
        }
      }
      filled.set(r, c, best >= 0 ? source.values(r, best) : static_cast<float>(far_));
      was_filled(r, c) = 1;
    }
  }
  DepthMap out = filled;
  std::vector<float> window;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!was_filled(r, c)) continue;
      window.clear();
      for (int rr = std::max(0, r - 2); rr <= std::min(h - 1, r + 2); ++rr) {
        for (int cc = std::max(0, c - 2); cc <= std::min(w - 1, c + 2); ++cc) window.push_back(filled.values(rr, cc));
      }
      std::nth_element(window.begin(), window.begin() + window.size() / 2, window.end());
      out.set(r, c, window[window.size() / 2]);
    }
  }
  return out;
}

std::vector<Pose> processing_order(const std::vector<Pose>& poses, const Pose& input_pose) {
  std::vector<std::pair<double, size_t>> keyed;
  for (size_t i = 0; i < poses.size(); ++i) {
    keyed.emplace_back(relative_pose(input_pose, poses[i]).center().norm(), i);
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Pose> out;
  for (const auto& k : keyed) out.push_back(poses[k.second]);
  return out;
}

PseudoVolume synthesize(const ViewTriplet& input, const PoseSet& poses, Refiner& refiner, DepthPredictor& predictor,
                        const SynthConfig& cfg, const std::function<void(const SynthStep&)>& observer) {
  input.validate();
  PseudoVolume vol(input, cfg.unknown_policy, cfg.depth_sampling);
  std::vector<Mask> occ_maps = view_occlusion_maps(vol, cfg.tau_d);
  const auto order = processing_order(poses.poses, input.pose);
  for (size_t k = 0; k < order.size(); ++k) {
    const Pose& pose = order[k];
    const RenderedView rendered = render_view(vol, input.intr, pose, cfg.sampling, cfg.tau, occ_maps, cfg.kernel);
    ViewTriplet completed;
    completed.pose = pose;
    completed.intr = input.intr;
    try {
      completed.image = refiner.refine(rendered, pose, input.intr);
    } catch (const Error& e) {
      throw SynthesisError(ErrorCode::kRefinerFailure, e.code(), e.what(), std::make_shared<PseudoVolume>(vol));
    }
    try {
      completed.depth = predictor.predict(completed.image, rendered, pose, input.intr);
    } catch (const Error& e) {
      throw SynthesisError(ErrorCode::kPredictorFailure, e.code(), e.what(), std::make_shared<PseudoVolume>(vol));
    }
    try {
      completed.validate();
      for (size_t i = 0; i < completed.depth.values.size(); ++i) {
        if (!completed.depth.valid[i]) throw Error(ErrorCode::kInvalidDepthPixel, "predicted depth has holes");
        if (!(completed.depth.values[i] > 0.0f)) {
          throw Error(ErrorCode::kNonPositiveDepth, "predicted depth is not positive");
        }
      }
    } catch (const Error& e) {
      throw SynthesisError(ErrorCode::kPredictorFailure, e.code(), e.what(), std::make_shared<PseudoVolume>(vol));
    }
    if (observer) observer({k, pose, &rendered, &completed});
    vol = vol.add_view(completed);
    occ_maps.push_back(depth_gradient_occlusion(completed.depth, cfg.tau_d));
  }
  return vol;
}

}  // namespace occsynth
