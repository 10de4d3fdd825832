#include "occsynth/distill.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "occsynth/parallel.hpp"

namespace occsynth {

ReconField::ReconField(int planes, int height, int width, double z_min, double z_max, const Intrinsics& camera,
                       const Pose& pose, double init_logit, double init_log_omega)
    : planes_(planes), height_(height), width_(width), z_min_(z_min), z_max_(z_max), pose_(pose) {
  if (planes < 2 || height < 1 || width < 1) throw Error(ErrorCode::kInvalidArgument, "field needs Z >= 2, H, W >= 1");
  if (!(z_min > 0.0 && z_max > z_min)) throw Error(ErrorCode::kInvalidArgument, "field needs 0 < z_min < z_max");
  intr_ = camera.resized(width, height);
  inv_step_ = (1.0 / z_min - 1.0 / z_max) / (planes - 1);
  const size_t n = static_cast<size_t>(planes) * height * width;
  logits.assign(n, init_logit);
  log_omega.assign(n, init_log_omega);
}

double ReconField::plane_depth(int k) const {
  if (k == planes_ - 1) return z_max_;
  return 1.0 / (1.0 / z_min_ - k * inv_step_);
}

std::optional<Vec3> ReconField::grid_coords(const Point3& world) const {
  const Vec3 q = pose_.apply(world);
  if (q.z() <= 1e-9) return std::nullopt;
  return Vec3(intr_.fx * q.x() / q.z() + intr_.cx, intr_.fy * q.y() / q.z() + intr_.cy,
              (1.0 / z_min_ - 1.0 / q.z()) / inv_step_);
}

bool ReconField::contains(const Point3& world) const {
  const auto g = grid_coords(world);
  if (!g) return false;
  return g->x() >= -0.5 && g->x() < width_ - 0.5 && g->y() >= -0.5 && g->y() < height_ - 0.5 &&
         g->z() >= -1e-9 && g->z() <= planes_ - 1 + 1e-9;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void axis_cell(double x, int n, int& i0, int& i1, double& f) {
  if (n == 1) {
    i0 = i1 = 0;
    f = 0.0;
    return;
  }
  x = std::clamp(x, 0.0, n - 1.0);
  i0 = std::min(static_cast<int>(x), n - 2);
  i1 = i0 + 1;
  f = x - i0;
}

FieldSample read_at(const ReconField& field, const Vec3& g) {
  int c0, c1, r0, r1, k0, k1;
  double fc, fr, fk;
  axis_cell(g.x(), field.width(), c0, c1, fc);
  axis_cell(g.y(), field.height(), r0, r1, fr);
  axis_cell(g.z(), field.planes(), k0, k1, fk);
  FieldSample s;
  int n = 0;
  for (int dk = 0; dk < 2; ++dk) {
    for (int dr = 0; dr < 2; ++dr) {
      for (int dc = 0; dc < 2; ++dc, ++n) {
        const size_t idx = field.index(dk ? k1 : k0, dr ? r1 : r0, dc ? c1 : c0);
        const double w = (dk ? fk : 1 - fk) * (dr ? fr : 1 - fr) * (dc ? fc : 1 - fc);
        const double th = sigmoid(field.logits[idx]);
        const double om = std::exp(field.log_omega[idx]);
        s.cell[n] = static_cast<uint32_t>(idx);
        s.weight[n] = w;
        s.d_theta[n] = w * th * (1 - th);
        s.d_omega[n] = w * om;
        s.theta += w * th;
        s.omega += w * om;
      }
    }
  }
  return s;
}

}  // namespace

FieldSample sample_field(const ReconField& field, const Point3& world) {
  if (!field.contains(world)) throw Error(ErrorCode::kOutOfFrustum, "point outside the reconstruction field");
  return read_at(field, *field.grid_coords(world));
}

FieldSample sample_field_clamped(const ReconField& field, const Point3& world) {
  const auto g = field.grid_coords(world);
  return read_at(field, g ? *g : Vec3(0.0, 0.0, 0.0));
}

double occ_term(double residual, double omega) { return residual * residual / omega + std::log(omega); }

double gnll_term(double residual, double variance) {
  return 0.5 * std::log(variance) + residual * residual / (2.0 * variance);
}

namespace {

struct SparseGrad {
  std::vector<std::pair<uint32_t, double>> logits;
  std::vector<std::pair<uint32_t, double>> log_omega;
  void clear() {
    logits.clear();
    log_omega.clear();
  }
};

void scatter(const SparseGrad& s, FieldGradients& g) {
  for (const auto& [i, v] : s.logits) g.logits[i] += v;
  for (const auto& [i, v] : s.log_omega) g.log_omega[i] += v;
}

// Gradient of one occupancy sample with respect to its eight corner cells.
struct CornerGrad {
  std::array<uint32_t, 8> cell{};
  std::array<double, 8> logit{};
  std::array<double, 8> log_omega{};
};

// Per-sample occupancy term; fills gradient entries scaled by `scale`.
double occ_sample(const ReconField& field, const OccSample& s, double scale, CornerGrad* out) {
  const FieldSample f = sample_field(field, s.point);
  const double r = s.target - f.theta;
  if (out != nullptr) {
    const double d_theta = -2.0 * r / f.omega * scale;
    const double d_omega = (1.0 / f.omega - r * r / (f.omega * f.omega)) * scale;
    for (int c = 0; c < 8; ++c) {
      out->cell[c] = f.cell[c];
      out->logit[c] = d_theta * f.d_theta[c];
      out->log_omega[c] = d_omega * f.d_omega[c];
    }
  }
  return occ_term(r, f.omega);
}

void scatter(std::span<const CornerGrad> parts, FieldGradients& g) {
  for (const CornerGrad& p : parts) {
    for (int c = 0; c < 8; ++c) {
      g.logits[p.cell[c]] += p.logit[c];
      g.log_omega[p.cell[c]] += p.log_omega[c];
    }
  }
}

void check_sampling(const ReconSampling& cfg) {
  if (cfg.n_samples < 2 || !(cfg.near > 0.0 && cfg.far > cfg.near) || !(cfg.density_scale > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid reconstruction sampling");
  }
}

struct RayPass {
  RayRender result;
  std::vector<double> t, alpha, trans, delta, omega;
  std::vector<FieldSample> fs;
  std::vector<uint8_t> inside;
};

void forward(const ReconField& field, const Ray& ray, const ReconSampling& cfg, RayPass& p) {
  const int n = cfg.n_samples;
  const double scale = 1.0 / ray.dir.dot(ray.axis);
  p.t.resize(n);
  p.alpha.assign(n, 0.0);
  p.trans.resize(n);
  p.delta.resize(n);
  p.omega.assign(n, 0.0);
  p.fs.resize(n);
  p.inside.assign(n, 0);
  const double ia = 1.0 / cfg.near, ib = 1.0 / cfg.far;
  double T = 1.0, d = 0.0, wsum = 0.0, wt2 = 0.0, wom = 0.0;
  for (int k = 0; k < n; ++k) {
    const double e0 = 1.0 / (ia + k * (ib - ia) / n);
    const double e1 = 1.0 / (ia + (k + 1) * (ib - ia) / n);
    const double t = 1.0 / (ia + (k + 0.5) * (ib - ia) / n);
    p.t[k] = t;
    p.delta[k] = (e1 - e0) * scale;
    p.trans[k] = T;
    const Point3 x = ray.point_at_depth(t);
    if (field.contains(x)) {
      p.inside[k] = 1;
      p.fs[k] = read_at(field, *field.grid_coords(x));
      p.omega[k] = p.fs[k].omega;
      p.alpha[k] = 1.0 - std::exp(-cfg.density_scale * p.fs[k].theta * p.delta[k]);
    }
    const double w = T * p.alpha[k];
    d += w * t;
    wsum += w;
    wt2 += w * t * t;
    wom += w * p.omega[k];
    T *= 1.0 - p.alpha[k];
  }
  p.result.depth = d;
  p.result.weight_sum = wsum;
  p.result.variance = wom + wt2 - 2.0 * d * d + d * d * wsum;
  p.result.hit = wsum >= cfg.min_weight;
}

void backward(const ReconSampling& cfg, const RayPass& p, double a, double b, SparseGrad& out) {
  const int n = static_cast<int>(p.t.size());
  out.logits.reserve(out.logits.size() + 8 * static_cast<size_t>(n));
  out.log_omega.reserve(out.log_omega.size() + 8 * static_cast<size_t>(n));
  const double D = p.result.depth, W = p.result.weight_sum;
  double R = 0.0;
  for (int k = n - 1; k >= 0; --k) {
    const double t = p.t[k];
    const double g = a * t + b * (p.omega[k] + t * t + D * D + 2.0 * D * t * (W - 2.0));
    if (p.inside[k]) {
      const double d_alpha = p.trans[k] * (g - R);
      const double d_theta = d_alpha * cfg.density_scale * p.delta[k] * (1.0 - p.alpha[k]);
      const double d_omega = b * p.trans[k] * p.alpha[k];
      const FieldSample& f = p.fs[k];
      for (int c = 0; c < 8; ++c) {
        if (f.weight[c] == 0.0) continue;
        out.logits.emplace_back(f.cell[c], d_theta * f.d_theta[c]);
        out.log_omega.emplace_back(f.cell[c], d_omega * f.d_omega[c]);
      }
    }
    R = p.alpha[k] * g + (1.0 - p.alpha[k]) * R;
  }
}

}  // namespace

double loss_occ(const ReconField& field, std::span<const OccSample> samples, double lambda, FieldGradients* grad) {
  if (samples.empty()) throw Error(ErrorCode::kInvalidArgument, "loss_occ needs at least one sample");
  std::vector<double> terms(samples.size());
  std::vector<CornerGrad> parts(grad != nullptr ? samples.size() : 0);
  parallel_for(static_cast<std::ptrdiff_t>(samples.size()), [&](std::ptrdiff_t i) {
    terms[i] = lambda * occ_sample(field, samples[i], lambda, grad != nullptr ? &parts[i] : nullptr);
  });
  if (grad != nullptr) scatter(parts, *grad);
  return pairwise_sum(terms);
}

RayRender render_ray(const ReconField& field, const Ray& ray, const ReconSampling& cfg) {
  check_sampling(cfg);
  RayPass p;
  forward(field, ray, cfg, p);
  return p.result;
}

RayRender render_ray_backward(const ReconField& field, const Ray& ray, const ReconSampling& cfg, double d_depth,
                              double d_variance, FieldGradients& grad) {
  check_sampling(cfg);
  RayPass p;
  forward(field, ray, cfg, p);
  SparseGrad s;
  backward(cfg, p, d_depth, d_variance, s);
  scatter(s, grad);
  return p.result;
}

ReconDepth render_recon_depth(const ReconField& field, const Pose& pose, const Intrinsics& intr,
                              const ReconSampling& cfg) {
  check_sampling(cfg);
  intr.validate();
  ReconDepth out{DepthMap(intr.height, intr.width), Grid<double>(intr.height, intr.width, 0.0),
                 Grid<double>(intr.height, intr.width, 0.0)};
  parallel_for(static_cast<std::ptrdiff_t>(intr.height) * intr.width, [&](std::ptrdiff_t i) {
    const int r = static_cast<int>(i / intr.width), c = static_cast<int>(i % intr.width);
    RayPass p;
    forward(field, pixel_ray({double(c), double(r)}, pose, intr), cfg, p);
    out.variance[i] = p.result.variance;
    out.weight_sum[i] = p.result.weight_sum;
    if (p.result.hit && p.result.depth > 0.0) out.depth.set(r, c, static_cast<float>(p.result.depth));
  });
  return out;
}

DepthLoss loss_depth(const DepthMap& rendered, const Grid<double>& variance, const DepthMap& target) {
  require_same_shape(rendered.height(), rendered.width(), target.height(), target.width(),
                     "loss_depth: rendered and target differ in size");
  require_same_shape(rendered.height(), rendered.width(), variance.height(), variance.width(),
                     "loss_depth: variance differs in size");
  DepthLoss out;
  out.d_depth = Grid<double>(rendered.height(), rendered.width(), 0.0);
  out.d_variance = Grid<double>(rendered.height(), rendered.width(), 0.0);
  std::vector<double> terms;
  std::vector<size_t> used;
  for (size_t i = 0; i < target.values.size(); ++i) {
    if (!rendered.valid[i] || !target.valid[i] || !(variance[i] > 0.0)) continue;
    terms.push_back(gnll_term(target.values[i] - rendered.values[i], variance[i]));
    used.push_back(i);
  }
  out.pixels = used.size();
  if (used.empty()) return out;
  const double inv = 1.0 / static_cast<double>(used.size());
  out.value = pairwise_sum(terms) * inv;
  for (size_t i : used) {
    const double r = target.values[i] - rendered.values[i], s = variance[i];
    out.d_depth[i] = -r / s * inv;
    out.d_variance[i] = (0.5 / s - r * r / (2.0 * s * s)) * inv;
  }
  return out;
}

namespace {

uint32_t pick(std::mt19937_64& rng, size_t n) {
  return static_cast<uint32_t>(std::uniform_int_distribution<size_t>(0, n - 1)(rng));
}

}  // namespace

DistillPool build_pool(const PseudoVolume& vol, const ReconField& field, const PoolConfig& cfg,
                       const ReconSampling& sampling) {
  check_sampling(sampling);
  if (cfg.rays < 0 || cfg.stratified < 0 || cfg.near_surface < 0 || cfg.uniform_ratio < 1 || cfg.depth_stride < 1) {
    throw Error(ErrorCode::kInvalidArgument, "invalid pool configuration");
  }
  DistillPool pool;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point3> points;
  const double ia = 1.0 / sampling.near, ib = 1.0 / sampling.far;
  for (int r = 0; r < cfg.rays; ++r) {
    const ViewTriplet& v = vol.view(pick(rng, vol.size()));
    const int row = static_cast<int>(pick(rng, v.intr.height)), col = static_cast<int>(pick(rng, v.intr.width));
    const Ray ray = pixel_ray({double(col), double(row)}, v.pose, v.intr);
    for (int k = 0; k < cfg.stratified; ++k) {
      const double t = 1.0 / (ia + (k + unit(rng)) * (ib - ia) / cfg.stratified);
      points.push_back(ray.point_at_depth(t));
    }
    if (v.depth.is_valid(row, col)) {
      const double d = v.depth.values(row, col);
      for (int k = 0; k < cfg.near_surface; ++k) {
        const double t = d + (2.0 * unit(rng) - 1.0) * cfg.surface_band;
        if (t > 0.0) points.push_back(ray.point_at_depth(t));
      }
    }
  }
  std::erase_if(points, [&](const Point3& p) { return !field.contains(p); });
  const size_t n_uniform = points.size() / cfg.uniform_ratio + (cfg.rays == 0 ? 1024 : 0);
  const Pose world_from_field = field.pose().inverse();
  const Intrinsics& fi = field.intr();
  const double fa = 1.0 / field.z_min(), fb = 1.0 / field.z_max();
  for (size_t k = 0; k < n_uniform; ++k) {
    const double u = -0.5 + unit(rng) * fi.width, v = -0.5 + unit(rng) * fi.height;
    const double z = 1.0 / (fb + unit(rng) * (fa - fb));
    const Point3 p = world_from_field.apply(unproject({u, v}, z, fi));
    if (field.contains(p)) points.push_back(p);
  }
  pool.occ.resize(points.size());
  parallel_for(static_cast<std::ptrdiff_t>(points.size()), [&](std::ptrdiff_t i) {
    pool.occ[i] = {points[i], vol.occupied(points[i]) ? 1.0 : 0.0};
  });

  for (size_t i = 0; i < vol.size(); ++i) {
    const ViewTriplet& v = vol.view(i);
    const Pose world_from_view = v.pose.inverse();
    for (int r = cfg.depth_stride / 2; r < v.intr.height; r += cfg.depth_stride) {
      for (int c = cfg.depth_stride / 2; c < v.intr.width; c += cfg.depth_stride) {
        if (!v.depth.is_valid(r, c)) continue;
        const double d = v.depth.values(r, c);
        if (d <= sampling.near || d >= sampling.far) continue;
        const Point3 target = world_from_view.apply(unproject({double(c), double(r)}, d, v.intr));
        if (!field.contains(target)) continue;
        pool.depth.push_back({pixel_ray({double(c), double(r)}, v.pose, v.intr), d});
      }
    }
  }
  return pool;
}

StepReport batch_objective(const ReconField& field, std::span<const OccSample> occ,
                           std::span<const DepthTarget> depth, const ReconSampling& sampling,
                           const OptimConfig& cfg, FieldGradients* grad) {
  StepReport rep;
  if (!occ.empty() && cfg.lambda_occ != 0.0) {
    const double scale = cfg.lambda_occ / static_cast<double>(occ.size());
    std::vector<double> terms(occ.size());
    std::vector<CornerGrad> parts(grad != nullptr ? occ.size() : 0);
    parallel_for(static_cast<std::ptrdiff_t>(occ.size()), [&](std::ptrdiff_t i) {
      terms[i] = occ_sample(field, occ[i], scale, grad != nullptr ? &parts[i] : nullptr);
    });
    rep.occ = pairwise_sum(terms) / static_cast<double>(occ.size());
    if (grad != nullptr) scatter(parts, *grad);
  }
  if (!depth.empty() && cfg.lambda_depth != 0.0) {
    std::vector<RayPass> passes(depth.size());
    parallel_for(static_cast<std::ptrdiff_t>(depth.size()),
                 [&](std::ptrdiff_t i) { forward(field, depth[i].ray, sampling, passes[i]); });
    std::vector<double> terms;
    std::vector<size_t> used;
    for (size_t i = 0; i < passes.size(); ++i) {
      const RayRender& r = passes[i].result;
      if (!r.hit || !(r.variance > 0.0)) continue;
      terms.push_back(gnll_term(depth[i].depth - r.depth, r.variance));
      used.push_back(i);
    }
    if (!used.empty()) {
      rep.depth = pairwise_sum(terms) / static_cast<double>(used.size());
      if (grad != nullptr) {
        const double scale = cfg.lambda_depth / static_cast<double>(used.size());
        std::vector<SparseGrad> parts(used.size());
        parallel_for(static_cast<std::ptrdiff_t>(used.size()), [&](std::ptrdiff_t j) {
          const RayPass& p = passes[used[j]];
          const double r = depth[used[j]].depth - p.result.depth, s = p.result.variance;
          backward(sampling, p, -r / s * scale, (0.5 / s - r * r / (2.0 * s * s)) * scale, parts[j]);
        });
        for (const auto& p : parts) scatter(p, *grad);
      }
    }
  }
  rep.loss = cfg.lambda_occ * rep.occ + cfg.lambda_depth * rep.depth;
  return rep;
}

namespace {

void spot_check(const ReconField& field, std::span<const OccSample> occ, std::span<const DepthTarget> depth,
                const ReconSampling& sampling, const OptimConfig& cfg, const FieldGradients& grad) {
  std::mt19937_64 rng(cfg.seed ^ 0x5eedULL);
  ReconField probe = field;
  const double h = 1e-4;
  double worst = 0.0;
  for (int trial = 0; trial < 16; ++trial) {
    // Probe a parameter that the batch actually touches.
    const auto& s = occ[pick(rng, occ.size())];
    const FieldSample f = sample_field(field, s.point);
    const uint32_t cell = f.cell[pick(rng, 8)];
    for (int which = 0; which < (cfg.learn_omega ? 2 : 1); ++which) {
      auto& param = which == 0 ? probe.logits[cell] : probe.log_omega[cell];
      const double orig = param;
      param = orig + h;
      const double up = batch_objective(probe, occ, depth, sampling, cfg, nullptr).loss;
      param = orig - h;
      const double down = batch_objective(probe, occ, depth, sampling, cfg, nullptr).loss;
      param = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = which == 0 ? grad.logits[cell] : grad.log_omega[cell];
      worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
    }
  }
  if (worst > 1e-3) {
    throw Error(ErrorCode::kGradientCheck, "analytic and numeric gradients disagree (rel err " +
                                               std::to_string(worst) + ")");
  }
}

}  // namespace

ReconField optimize(ReconField field, const DistillPool& pool, const ReconSampling& sampling, const OptimConfig& cfg,
                    const std::function<void(const StepReport&)>& observer) {
  check_sampling(sampling);
  if (!(cfg.step_size > 0.0) || cfg.steps < 0) throw Error(ErrorCode::kInvalidArgument, "invalid optimizer config");
  if (pool.occ.empty()) throw Error(ErrorCode::kInvalidArgument, "distillation needs occupancy samples");
  const size_t n = field.cells();
  FieldGradients grad(n);
  std::vector<double> m_l(n, 0.0), v_l(n, 0.0), m_o(n, 0.0), v_o(n, 0.0);
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::mt19937_64 rng(cfg.seed);
  std::vector<OccSample> occ(std::min<size_t>(cfg.occ_batch, pool.occ.size()));
  std::vector<DepthTarget> depth(pool.depth.empty() ? 0 : std::min<size_t>(cfg.depth_batch, pool.depth.size()));
  double initial = 0.0;
  for (int step = 0; step < cfg.steps; ++step) {
    for (auto& s : occ) s = pool.occ[pick(rng, pool.occ.size())];
    for (auto& d : depth) d = pool.depth[pick(rng, pool.depth.size())];
    grad.reset();
    StepReport rep = batch_objective(field, occ, depth, sampling, cfg, &grad);
    rep.step = step;
    if (step == 0) {
      initial = rep.loss;
      if (cfg.gradient_check) spot_check(field, occ, depth, sampling, cfg, grad);
    }
    if (!std::isfinite(rep.loss) || (std::abs(initial) > 0.0 && rep.loss > 10.0 * std::abs(initial))) {
      throw Error(ErrorCode::kDivergedLoss, "loss " + std::to_string(rep.loss) + " at step " + std::to_string(step) +
                                                " (initial " + std::to_string(initial) + ")");
    }
    if (observer) observer(rep);
    const double c1 = 1.0 - std::pow(b1, step + 1), c2 = 1.0 - std::pow(b2, step + 1);
    const double lr = cfg.step_size;
    auto adam = [&](std::vector<double>& p, std::vector<double>& g, std::vector<double>& m, std::vector<double>& v) {
      parallel_for(static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t i) {
        m[i] = b1 * m[i] + (1 - b1) * g[i];
        v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
        p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
      });
    };
    adam(field.logits, grad.logits, m_l, v_l);
    if (cfg.learn_omega) adam(field.log_omega, grad.log_omega, m_o, v_o);
  }
  return field;
}

VoxelGrid voxelize_field(const ReconField& field, const EvalCuboid& cuboid) {
  const Pose world_from_field = field.pose().inverse();
  return voxelize([&](const Point3& p) { return sample_field_clamped(field, world_from_field.apply(p)).theta > 0.5; },
                  cuboid);
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

void write_rcf(const std::filesystem::path& path, const ReconField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write("RCF1", 4);
  put<uint32_t>(out, field.planes());
  put<uint32_t>(out, field.height());
  put<uint32_t>(out, field.width());
  put<float>(out, static_cast<float>(field.z_min()));
  put<float>(out, static_cast<float>(field.z_max()));
  for (double v : field.logits) put<float>(out, static_cast<float>(v));
  for (double v : field.log_omega) put<float>(out, static_cast<float>(v));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

ReconField read_rcf(const std::filesystem::path& path, const Intrinsics& field_intr, const Pose& pose) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "RCF1", 4) != 0) {
    throw Error(ErrorCode::kIo, path.string() + ": not an RCF1 checkpoint");
  }
  const uint32_t z = get<uint32_t>(in, path), h = get<uint32_t>(in, path), w = get<uint32_t>(in, path);
  const float z_min = get<float>(in, path), z_max = get<float>(in, path);
  if (field_intr.width != static_cast<int>(w) || field_intr.height != static_cast<int>(h)) {
    throw Error(ErrorCode::kDimensionMismatch, "field intrinsics do not match the checkpoint grid");
  }
  ReconField f(static_cast<int>(z), static_cast<int>(h), static_cast<int>(w), z_min, z_max, field_intr, pose);
  for (double& v : f.logits) v = get<float>(in, path);
  for (double& v : f.log_omega) v = get<float>(in, path);
  return f;
}

}  // namespace occsynth
