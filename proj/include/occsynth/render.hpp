#pragma once

#include <optional>
#include <vector>

#include "occsynth/occlusion.hpp"
#include "occsynth/pseudovol.hpp"

namespace occsynth {

enum class Spacing : uint8_t { kLinear, kInverseDepth };

// Per-ray sample budget. Depths are camera z-depths in meters.
struct RaySampling {
  int n_coarse = 48;
  int n_fine = 16;
  int n_surface = 16;
  double surface_sigma = 2.0;
  double near = 3.0;
  double far = 80.0;
  Spacing spacing = Spacing::kInverseDepth;
  // Stratum centers by default; uniform jitter inside each stratum when set.
  bool jitter = false;
  uint64_t seed = 0;

  void validate() const;
};

struct SurfaceThreshold {
  double tau_s = 0.25;
};

// n_coarse stratified depths in [near, far].
std::vector<double> coarse_samples(const RaySampling& cfg, uint64_t jitter_key = 0);

// Full ordered sample set for one ray: coarse samples, n_surface samples
// uniformly in est_depth +- 2*surface_sigma (clamped), and n_fine samples inside the
// interval of the first coarse occupancy transition of `vol` (when given).
// Strictly increasing.
std::vector<double> sample_ray(const Ray& ray, const RaySampling& cfg, std::optional<double> est_depth,
                               const PseudoVolume* vol = nullptr, uint64_t jitter_key = 0);

struct ColorSample {
  Rgb rgb{0.0f, 0.0f, 0.0f};
  bool valid = false;
};

// Mean of the bilinearly sampled colors of every view whose surface lies within
// tau_s of the point (and whose frustum contains it).
ColorSample aggregate_color(const PseudoVolume& vol, const Point3& point, const SurfaceThreshold& tau);

struct PixelRender {
  Rgb rgb{0.0f, 0.0f, 0.0f};
  double depth = 0.0;
  bool hit = false;
  bool color_valid = false;
  // Terminated in space no view constrains, blocked on entering the input view's
  // frustum, or never entered it (unknown policy Occupied).
  bool unknown = false;
  // Unknown hit reached through observed space: depth is where that space ends.
  bool exited = false;
  // Per-view occlusion maps sampled at the termination point, OR-reduced.
  bool view_occlusion = false;
  // Full occlusion channel value before morphology.
  bool occluded = false;
};

// First-hit ray cast with bisection refinement against the binary occupancy. Samples in
// front of the ray's entry into the input view (view 0) frustum never terminate it.
// per_view_occ may be empty; otherwise it is aligned with vol's views.
PixelRender render_pixel(const PseudoVolume& vol, const Ray& ray, const RaySampling& cfg,
                         const SurfaceThreshold& tau, const std::vector<Mask>& per_view_occ = {},
                         uint64_t jitter_key = 0);

struct RenderedView {
  Image rgb;
  DepthMap depth;  // valid == hit_mask
  Mask occlusion;  // full channel after opening + closing
  Mask hit_mask;
  Mask color_valid;
  Mask unknown_mask;
  Mask exit_mask;
  // Depth-gradient channel alone (rendered per-view O_i), after opening + closing.
  Mask gradient_occlusion;
};

RenderedView render_view(const PseudoVolume& vol, const Intrinsics& intr, const Pose& pose,
                         const RaySampling& cfg, const SurfaceThreshold& tau,
                         const std::vector<Mask>& per_view_occ, const MorphKernel& kernel = {});

// Per-view O_i maps for every view of the volume.
std::vector<Mask> view_occlusion_maps(const PseudoVolume& vol, const GradientThreshold& tau_d);

}  // namespace occsynth
