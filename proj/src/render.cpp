#include "occsynth/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "occsynth/parallel.hpp"

namespace occsynth {

void RaySampling::validate() const {
  if (n_coarse < 1 || n_fine < 0 || n_surface < 0) {
    throw Error(ErrorCode::kInvalidArgument, "ray sample counts must be non-negative (coarse >= 1)");
  }
  if (!(near > 0.0) || !(near < far)) throw Error(ErrorCode::kInvalidArgument, "need 0 < near < far");
  if (!(surface_sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "surface_sigma must be positive");
}

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class StratumOffsets {
 public:
  StratumOffsets(const RaySampling& cfg, uint64_t key, uint64_t stream)
      : jitter_(cfg.jitter), state_(splitmix64(cfg.seed ^ splitmix64(key * 4 + stream))) {}
  double next() {
    if (!jitter_) return 0.5;
    state_ = splitmix64(state_);
    return static_cast<double>(state_ >> 11) * 0x1.0p-53;
  }

 private:
  bool jitter_;
  uint64_t state_;
};

// n samples in [a, b], linear in the chosen spacing.
void stratified(double a, double b, int n, Spacing spacing, StratumOffsets& off, std::vector<double>& out) {
  if (n <= 0 || !(b > a)) return;
  if (spacing == Spacing::kLinear) {
    for (int k = 0; k < n; ++k) out.push_back(a + (k + off.next()) * (b - a) / n);
  } else {
    const double ia = 1.0 / a, ib = 1.0 / b;
    for (int k = 0; k < n; ++k) out.push_back(1.0 / (ia + (k + off.next()) * (ib - ia) / n));
  }
}

void sort_unique(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }), v.end());
}

}  // namespace

std::vector<double> coarse_samples(const RaySampling& cfg, uint64_t jitter_key) {
  std::vector<double> out;
  out.reserve(cfg.n_coarse);
  StratumOffsets off(cfg, jitter_key, 0);
  stratified(cfg.near, cfg.far, cfg.n_coarse, cfg.spacing, off, out);
  return out;
}

namespace {

// Samples added around an estimated surface and inside the coarse transition interval.
std::vector<double> refinement_samples(const RaySampling& cfg, std::optional<double> est_depth,
                                       std::optional<std::pair<double, double>> transition, uint64_t key) {
  std::vector<double> out;
  if (est_depth) {
    StratumOffsets off(cfg, key, 1);
    const double lo = std::max(cfg.near, *est_depth - 2.0 * cfg.surface_sigma);
    const double hi = std::min(cfg.far, *est_depth + 2.0 * cfg.surface_sigma);
    stratified(lo, hi, cfg.n_surface, Spacing::kLinear, off, out);
  }
  if (transition) {
    StratumOffsets off(cfg, key, 2);
    stratified(transition->first, transition->second, cfg.n_fine, Spacing::kLinear, off, out);
  }
  return out;
}

}  // namespace

std::vector<double> sample_ray(const Ray& ray, const RaySampling& cfg, std::optional<double> est_depth,
                               const PseudoVolume* vol, uint64_t jitter_key) {
  std::vector<double> samples = coarse_samples(cfg, jitter_key);
  std::optional<std::pair<double, double>> transition;
  if (vol != nullptr) {
    double prev = cfg.near;
    for (double t : samples) {
      if (vol->occupied(ray.point_at_depth(t))) {
        transition = {prev, t};
        break;
      }
      prev = t;
    }
  }
  const auto extra = refinement_samples(cfg, est_depth, transition, jitter_key);
  samples.insert(samples.end(), extra.begin(), extra.end());
  sort_unique(samples);
  return samples;
}

namespace {

Rgb bilinear(const Image& img, double u, double v) {
  const int w = img.width(), h = img.height();
  u = std::clamp(u, 0.0, w - 1.0);
  v = std::clamp(v, 0.0, h - 1.0);
  const int c0 = std::min(static_cast<int>(u), w - 1), r0 = std::min(static_cast<int>(v), h - 1);
  const int c1 = std::min(c0 + 1, w - 1), r1 = std::min(r0 + 1, h - 1);
  const double a = u - c0, b = v - r0;
  Rgb out;
  for (int k = 0; k < 3; ++k) {
    const double top = (1 - a) * img(r0, c0)[k] + a * img(r0, c1)[k];
    const double bot = (1 - a) * img(r1, c0)[k] + a * img(r1, c1)[k];
    out[k] = static_cast<float>((1 - b) * top + b * bot);
  }
  return out;
}

struct Shading {
  ColorSample color;
  bool view_occlusion = false;
};

Shading shade(const PseudoVolume& vol, const Point3& point, const SurfaceThreshold& tau,
              const std::vector<Mask>* per_view_occ) {
  Shading out;
  double acc[3] = {0.0, 0.0, 0.0};
  int count = 0;
  for (size_t i = 0; i < vol.size(); ++i) {
    const ViewProbe pr = vol.probe(i, point);
    if (!pr.inside) continue;
    if (per_view_occ != nullptr && (*per_view_occ)[i](pr.row, pr.col)) out.view_occlusion = true;
    if (!pr.has_depth || !(std::abs(pr.z - pr.depth) < tau.tau_s)) continue;
    const Rgb c = bilinear(vol.view(i).image, pr.u, pr.v);
    for (int k = 0; k < 3; ++k) acc[k] += c[k];
    ++count;
  }
  if (count > 0) {
    out.color.valid = true;
    for (int k = 0; k < 3; ++k) out.color.rgb[k] = static_cast<float>(std::clamp(acc[k] / count, 0.0, 1.0));
  }
  return out;
}

// Ray depths inside the view's frustum: one interval, empty when first >= second.
std::pair<double, double> frustum_span(const ViewTriplet& view, const Ray& ray) {
  const Vec3 a = view.pose.apply(ray.point_at_depth(0.0));
  const Vec3 b = view.pose.apply(ray.point_at_depth(1.0)) - a;
  double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
  // Keeps c0 + t * c1 >= 0.
  auto clip = [&](double c0, double c1) {
    if (std::abs(c1) < 1e-15) {
      if (c0 < 0.0) lo = hi;
      return;
    }
    const double t = -c0 / c1;
    if (c1 > 0.0) {
      lo = std::max(lo, t);
    } else {
      hi = std::min(hi, t);
    }
  };
  const Intrinsics& k = view.intr;
  const double left = k.cx + 0.5, right = k.cx - k.width + 0.5;
  const double top = k.cy + 0.5, bottom = k.cy - k.height + 0.5;
  clip(a.z(), b.z());
  clip(k.fx * a.x() + left * a.z(), k.fx * b.x() + left * b.z());
  clip(-(k.fx * a.x() + right * a.z()), -(k.fx * b.x() + right * b.z()));
  clip(k.fy * a.y() + top * a.z(), k.fy * b.y() + top * b.z());
  clip(-(k.fy * a.y() + bottom * a.z()), -(k.fy * b.y() + bottom * b.z()));
  return {lo, hi};
}

constexpr int kBisectionIters = 20;
constexpr double kBisectionTol = 1e-3;

}  // namespace

ColorSample aggregate_color(const PseudoVolume& vol, const Point3& point, const SurfaceThreshold& tau) {
  return shade(vol, point, tau, nullptr).color;
}

PixelRender render_pixel(const PseudoVolume& vol, const Ray& ray, const RaySampling& cfg,
                         const SurfaceThreshold& tau, const std::vector<Mask>& per_view_occ,
                         uint64_t jitter_key) {
  const bool unknown_blocks = vol.unknown_policy() == UnknownPolicy::kOccupied;
  // The ray passes freely until it enters the input view's frustum.
  const auto span = frustum_span(vol.view(0), ray);
  const double entry = span.first < span.second ? span.first : std::numeric_limits<double>::infinity();
  auto terminates = [&](double z) { return z >= entry && vol.collapse(vol.occupancy(ray.point_at_depth(z))); };

  const std::vector<double> coarse = coarse_samples(cfg, jitter_key);
  int hit_index = -1;
  double lo = cfg.near;
  for (size_t k = 0; k < coarse.size(); ++k) {
    if (terminates(coarse[k])) {
      hit_index = static_cast<int>(k);
      break;
    }
    lo = coarse[k];
  }

  PixelRender out;
  const std::vector<Mask>* occ = per_view_occ.empty() ? nullptr : &per_view_occ;
  if (hit_index < 0) {
    // No termination up to far: sky or open space. Color what lies at far, if anything.
    const Point3 far_point = ray.point_at_depth(cfg.far);
    const Shading sh = shade(vol, far_point, tau, occ);
    out.color_valid = sh.color.valid;
    out.rgb = sh.color.rgb;
    // A ray that ends up inside the input frustum for good looks at its sky.
    const bool sees_input_sky = span.first < span.second && std::isinf(span.second);
    out.unknown = unknown_blocks && !(entry < cfg.far) && !sees_input_sky;
    out.view_occlusion = sh.view_occlusion;
    out.occluded = out.unknown || !out.color_valid || out.view_occlusion;
    return out;
  }

  double hi = coarse[hit_index];
  // Fine samples inside the transition interval and surface samples around it; both can
  // only move the first hit closer.
  const auto extra = refinement_samples(cfg, hi, std::make_pair(lo, hi), jitter_key);
  std::vector<double> before(coarse.begin(), coarse.begin() + hit_index);
  for (double t : extra) {
    if (t < hi) before.push_back(t);
  }
  sort_unique(before);
  double last_free = cfg.near;
  for (double t : before) {
    if (terminates(t)) {
      hi = t;
      lo = last_free;
      break;
    }
    last_free = t;
  }

  // The start of the ray may already be blocked.
  if (lo <= cfg.near && terminates(cfg.near)) lo = hi = cfg.near;
  for (int it = 0; it < kBisectionIters && hi - lo > kBisectionTol; ++it) {
    const double mid = 0.5 * (lo + hi);
    (terminates(mid) ? hi : lo) = mid;
  }

  const Point3 hit_point = ray.point_at_depth(hi);
  const OccState hit_state = vol.occupancy(hit_point);
  const Shading sh = shade(vol, hit_point, tau, occ);
  out.hit = true;
  // Report the last free depth: never behind the true first-hit surface.
  out.depth = lo;
  out.rgb = sh.color.rgb;
  out.color_valid = sh.color.valid;
  // Blocked right where it enters the input frustum: the boundary of unseen space, not a surface.
  const bool blocked_at_entry = entry > cfg.near && hi - entry <= 2.0 * kBisectionTol;
  out.unknown = hit_state == OccState::kUnknown || (unknown_blocks && blocked_at_entry);
  out.exited = hit_state == OccState::kUnknown && !blocked_at_entry;
  out.view_occlusion = sh.view_occlusion;
  out.occluded = out.unknown || !out.color_valid || out.view_occlusion;
  return out;
}

std::vector<Mask> view_occlusion_maps(const PseudoVolume& vol, const GradientThreshold& tau_d) {
  std::vector<Mask> out;
  out.reserve(vol.size());
  for (size_t i = 0; i < vol.size(); ++i) out.push_back(depth_gradient_occlusion(vol.view(i).depth, tau_d));
  return out;
}

RenderedView render_view(const PseudoVolume& vol, const Intrinsics& intr, const Pose& pose,
                         const RaySampling& cfg, const SurfaceThreshold& tau,
                         const std::vector<Mask>& per_view_occ, const MorphKernel& kernel) {
  cfg.validate();
  intr.validate();
  if (!per_view_occ.empty()) {
    if (per_view_occ.size() != vol.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "per-view occlusion maps not aligned with the volume");
    }
    for (size_t i = 0; i < vol.size(); ++i) {
      require_same_shape(per_view_occ[i].height(), per_view_occ[i].width(), vol.view(i).intr.height,
                         vol.view(i).intr.width, "per-view occlusion map does not match its view");
    }
  }
  const int h = intr.height, w = intr.width;
  RenderedView out;
  out.rgb = Image(h, w, Rgb{0.0f, 0.0f, 0.0f});
  out.depth = DepthMap(h, w);
  out.hit_mask = Mask(h, w, 0);
  out.color_valid = Mask(h, w, 0);
  out.unknown_mask = Mask(h, w, 0);
  out.exit_mask = Mask(h, w, 0);
  Mask occluded(h, w, 0), gradient(h, w, 0);

  parallel_for(static_cast<std::ptrdiff_t>(h) * w, [&](std::ptrdiff_t i) {
    const int r = static_cast<int>(i / w), c = static_cast<int>(i % w);
    const Ray ray = pixel_ray({double(c), double(r)}, pose, intr);
    const PixelRender px = render_pixel(vol, ray, cfg, tau, per_view_occ, static_cast<uint64_t>(i));
    out.rgb[i] = px.rgb;
    if (px.hit) out.depth.set(r, c, static_cast<float>(px.depth));
    out.hit_mask[i] = px.hit;
    out.color_valid[i] = px.color_valid;
    out.unknown_mask[i] = px.unknown;
    out.exit_mask[i] = px.exited;
    occluded[i] = px.occluded;
    gradient[i] = px.view_occlusion;
  });
  out.occlusion = morph_close(morph_open(occluded, kernel), kernel);
  out.gradient_occlusion = morph_close(morph_open(gradient, kernel), kernel);
  return out;
}

}  // namespace occsynth
