#include "occsynth/warp.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace occsynth {

void WarpPoseSampler::validate() const {
  for (double v : {x_min, x_max, y_min, y_max, z_min, z_max, yaw_min_deg, yaw_max_deg}) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "warp sampler ranges must be finite");
  }
  if (x_min > x_max || y_min > y_max || z_min > z_max || yaw_min_deg > yaw_max_deg) {
    throw Error(ErrorCode::kInvalidArgument, "warp sampler range has min > max");
  }
}

Pose WarpPoseSampler::sample(const Pose& input_pose) const {
  validate();
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const Vec3 c(uniform(x_min, x_max), uniform(y_min, y_max), uniform(z_min, z_max));
  const double yaw = uniform(yaw_min_deg, yaw_max_deg) * std::numbers::pi / 180.0;
  return displaced_pose(input_pose, c, yaw);
}

DepthMap completed_depth(const RenderedView& view, double far) {
  const int h = view.depth.height(), w = view.depth.width();
  DepthMap out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (view.unknown_mask(r, c) && !view.exit_mask(r, c)) continue;
      out.set(r, c, view.hit_mask(r, c) ? view.depth.values(r, c) : static_cast<float>(far));
    }
  }
  return out;
}

Mask backward_occlusion_mask(const DepthMap& orig, const DepthMap& roundtrip, double eps) {
  require_same_shape(orig.height(), orig.width(), roundtrip.height(), roundtrip.width(),
                     "backward occlusion: depth maps differ in size");
  Mask out(orig.height(), orig.width(), 0);
  for (size_t i = 0; i < out.size(); ++i) {
    if (!roundtrip.valid[i]) {
      out[i] = 1;
    } else if (orig.valid[i]) {
      out[i] = roundtrip.values[i] < orig.values[i] - eps;
    }
  }
  return out;
}

WarpResult forward_backward_warp(const ViewTriplet& input, const Pose& novel_pose, const RaySampling& cfg,
                                 const SurfaceThreshold& tau) {
  input.validate();
  WarpResult out;
  const PseudoVolume forward(input);
  out.novel = render_view(forward, input.intr, novel_pose, cfg, tau, {});
  ViewTriplet virt{out.novel.rgb, completed_depth(out.novel, cfg.far), novel_pose, input.intr};
  const PseudoVolume backward(std::move(virt));
  const RenderedView back = render_view(backward, input.intr, input.pose, cfg, tau, {});
  out.rgb = back.rgb;
  out.depth = completed_depth(back, cfg.far);
  return out;
}

VcmTrainingPair make_vcm_pair(const ViewTriplet& input, const WarpPoseSampler& sampler, uint64_t noise_seed,
                              const MorphKernel& kernel, const RaySampling& cfg, const SurfaceThreshold& tau,
                              double eps) {
  VcmTrainingPair pair;
  pair.sampler_seed = sampler.seed;
  pair.noise_seed = noise_seed;
  pair.novel_pose = sampler.sample(input.pose);
  const WarpResult warp = forward_backward_warp(input, pair.novel_pose, cfg, tau);
  pair.inpaint_mask = morph_close(backward_occlusion_mask(input.depth, warp.depth, eps), kernel);
  pair.corrupted_rgb = warp.rgb;
  pair.corrupted_depth = warp.depth;
  pair.target_rgb = input.image;

  std::mt19937_64 rng(noise_seed);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::uniform_real_distribution<float> depth(static_cast<float>(cfg.near), static_cast<float>(cfg.far));
  for (size_t i = 0; i < pair.inpaint_mask.size(); ++i) {
    if (!pair.inpaint_mask[i]) continue;
    for (float& ch : pair.corrupted_rgb[i]) ch = unit(rng);
    pair.corrupted_depth.values[i] = depth(rng);
    pair.corrupted_depth.valid[i] = 1;
  }
  return pair;
}

void write_vcm_pair(const std::filesystem::path& dir, const VcmTrainingPair& pair, const Intrinsics& intr) {
  std::filesystem::create_directories(dir);
  write_png(dir / "corrupted.png", pair.corrupted_rgb);
  write_pfm(dir / "corrupted_depth.pfm", pair.corrupted_depth);
  write_mask_png(dir / "mask.png", pair.inpaint_mask);
  write_png(dir / "target.png", pair.target_rgb);
  nlohmann::json meta;
  meta["pose"] = pose_to_json(pair.novel_pose);
  meta["seeds"] = {{"sampler", pair.sampler_seed}, {"noise", pair.noise_seed}};
  meta["intrinsics"] = intr;
  meta["clip_stub_bytes"] = pair.clip_stub.size();
  std::ofstream out(dir / "meta.json");
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << '\n';
}

}  // namespace occsynth
