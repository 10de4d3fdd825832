#pragma once

#include <filesystem>
#include <vector>

#include "occsynth/occlusion.hpp"
#include "occsynth/render.hpp"

namespace occsynth {

// Random virtual camera around the input pose: translation per axis in meters
// (input camera frame) and yaw in degrees.
struct WarpPoseSampler {
  double x_min = -3.0, x_max = 3.0;
  double y_min = -0.5, y_max = 0.5;
  double z_min = -1.0, z_max = 2.0;
  double yaw_min_deg = -10.0, yaw_max_deg = 10.0;
  uint64_t seed = 0;

  void validate() const;
  Pose sample(const Pose& input_pose) const;
};

struct VcmTrainingPair {
  Image corrupted_rgb;
  DepthMap corrupted_depth;
  Mask inpaint_mask;
  Image target_rgb;
  std::vector<uint8_t> clip_stub;
  Pose novel_pose;
  uint64_t sampler_seed = 0;
  uint64_t noise_seed = 0;
};

struct WarpResult {
  Image rgb;
  DepthMap depth;  // invalid where the round trip found no information
  RenderedView novel;
};

// Depth usable as a view triplet: hits keep their depth, open rays get `far`,
// rays that ran out of observed space keep the depth where it ended, and other
// unknown rays stay invalid.
DepthMap completed_depth(const RenderedView& view, double far);

// True where the round trip is invalid or closer than orig - eps.
Mask backward_occlusion_mask(const DepthMap& orig, const DepthMap& roundtrip, double eps = 0.05);

WarpResult forward_backward_warp(const ViewTriplet& input, const Pose& novel_pose, const RaySampling& cfg,
                                 const SurfaceThreshold& tau);

VcmTrainingPair make_vcm_pair(const ViewTriplet& input, const WarpPoseSampler& sampler, uint64_t noise_seed,
                              const MorphKernel& kernel, const RaySampling& cfg = {},
                              const SurfaceThreshold& tau = {}, double eps = 0.05);

// corrupted.png, corrupted_depth.pfm, mask.png, target.png, meta.json.
void write_vcm_pair(const std::filesystem::path& dir, const VcmTrainingPair& pair, const Intrinsics& intr);

}  // namespace occsynth
