#include "occsynth/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <random>

namespace occsynth {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * std::max(1.0, std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

namespace {

constexpr double kStep = 1e-4;

ReconField random_field(std::mt19937_64& rng) {
  Intrinsics cam;
  cam.width = 7;
  cam.height = 5;
  cam.fx = cam.fy = 6.0;
  cam.cx = 3.0;
  cam.cy = 2.0;
  ReconField f(6, 5, 7, 3.0, 12.0, cam, Pose::identity());
  std::uniform_real_distribution<double> logit(-3.0, 3.0), lom(-1.0, 1.0);
  for (auto& v : f.logits) v = logit(rng);
  for (auto& v : f.log_omega) v = lom(rng);
  return f;
}

Point3 random_inside(const ReconField& f, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng) * (f.width() - 1), v = unit(rng) * (f.height() - 1);
  const double inv = 1.0 / f.z_min() + unit(rng) * (1.0 / f.z_max() - 1.0 / f.z_min());
  return f.pose().inverse().apply(unproject({u, v}, 1.0 / inv, f.intr()));
}

double central(const std::function<double()>& eval, double& param) {
  const double orig = param;
  param = orig + kStep;
  const double up = eval();
  param = orig - kStep;
  const double down = eval();
  param = orig;
  return (up - down) / (2.0 * kStep);
}

struct Tracker {
  GradCheckEntry entry;
  void add(double a, double n) {
    entry.max_rel_err = std::max(entry.max_rel_err, relative_error(a, n));
    ++entry.comparisons;
  }
};

void check_sampling(Tracker& t, std::mt19937_64& rng) {
  ReconField f = random_field(rng);
  const Point3 x = random_inside(f, rng);
  const FieldSample s = sample_field(f, x);
  for (int c = 0; c < 8; ++c) {
    if (s.weight[c] == 0.0) continue;
    const uint32_t cell = s.cell[c];
    // Repeated corners (clamped axes) contribute once per appearance.
    double dth = 0.0, dom = 0.0;
    for (int k = 0; k < 8; ++k) {
      if (s.cell[k] == cell) {
        dth += s.d_theta[k];
        dom += s.d_omega[k];
      }
    }
    t.add(dth, central([&] { return sample_field(f, x).theta; }, f.logits[cell]));
    t.add(dom, central([&] { return sample_field(f, x).omega; }, f.log_omega[cell]));
  }
}

void check_occ(Tracker& t, std::mt19937_64& rng) {
  ReconField f = random_field(rng);
  std::vector<OccSample> samples(100);
  std::bernoulli_distribution coin(0.5);
  for (auto& s : samples) s = {random_inside(f, rng), coin(rng) ? 1.0 : 0.0};
  FieldGradients g(f.cells());
  loss_occ(f, samples, 1.0, &g);
  std::uniform_int_distribution<size_t> pick(0, samples.size() - 1);
  for (int k = 0; k < 4; ++k) {
    const FieldSample s = sample_field(f, samples[pick(rng)].point);
    const uint32_t cell = s.cell[std::uniform_int_distribution<int>(0, 7)(rng)];
    auto eval = [&] { return loss_occ(f, samples, 1.0, nullptr); };
    t.add(g.logits[cell], central(eval, f.logits[cell]));
    t.add(g.log_omega[cell], central(eval, f.log_omega[cell]));
  }
}

Ray random_ray(const ReconField& f, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Pixel p{unit(rng) * (f.width() - 1), unit(rng) * (f.height() - 1)};
  return pixel_ray(p, f.pose(), f.intr());
}

ReconSampling small_sampling(const ReconField& f) {
  ReconSampling s;
  s.n_samples = 24;
  s.near = f.z_min();
  s.far = f.z_max();
  s.density_scale = 1.0;
  return s;
}

// Logits and log-omegas touched by the ray.
std::vector<uint32_t> touched(const ReconField& f, const Ray& ray, const ReconSampling& cfg) {
  FieldGradients g(f.cells());
  render_ray_backward(f, ray, cfg, 1.0, 1.0, g);
  std::vector<uint32_t> out;
  for (size_t i = 0; i < g.logits.size(); ++i) {
    if (g.logits[i] != 0.0 || g.log_omega[i] != 0.0) out.push_back(static_cast<uint32_t>(i));
  }
  return out;
}

void check_render(Tracker& t, std::mt19937_64& rng) {
  ReconField f = random_field(rng);
  const Ray ray = random_ray(f, rng);
  const ReconSampling cfg = small_sampling(f);
  const auto cells = touched(f, ray, cfg);
  if (cells.empty()) return;
  for (int k = 0; k < 3; ++k) {
    const uint32_t cell = cells[std::uniform_int_distribution<size_t>(0, cells.size() - 1)(rng)];
    FieldGradients gd(f.cells()), gv(f.cells());
    render_ray_backward(f, ray, cfg, 1.0, 0.0, gd);
    render_ray_backward(f, ray, cfg, 0.0, 1.0, gv);
    t.add(gd.logits[cell], central([&] { return render_ray(f, ray, cfg).depth; }, f.logits[cell]));
    t.add(gv.logits[cell], central([&] { return render_ray(f, ray, cfg).variance; }, f.logits[cell]));
    t.add(gv.log_omega[cell], central([&] { return render_ray(f, ray, cfg).variance; }, f.log_omega[cell]));
  }
}

void check_gnll(Tracker& t, std::mt19937_64& rng) {
  // The per-pixel loss itself, through loss_depth on a 1x2 map.
  std::uniform_real_distribution<double> depth(3.0, 20.0), var(0.05, 4.0);
  DepthMap rendered(1, 2), target(1, 2);
  Grid<double> variance(1, 2);
  for (int c = 0; c < 2; ++c) {
    rendered.set(0, c, static_cast<float>(depth(rng)));
    target.set(0, c, static_cast<float>(depth(rng)));
    variance(0, c) = var(rng);
  }
  const DepthLoss l = loss_depth(rendered, variance, target);
  for (int c = 0; c < 2; ++c) {
    double d = rendered.values(0, c);
    auto eval_d = [&] {
      const double r = target.values(0, c) - d;
      return gnll_term(r, variance(0, c)) / 2.0;
    };
    t.add(l.d_depth(0, c), central(eval_d, d));
    t.add(l.d_variance(0, c),
          central([&] { return loss_depth(rendered, variance, target).value; }, variance(0, c)));
  }
  // And the full chain from field parameters to the minibatch GNLL.
  ReconField f = random_field(rng);
  ReconSampling cfg = small_sampling(f);
  cfg.min_weight = 0.0;
  std::vector<DepthTarget> targets;
  for (int k = 0; k < 4; ++k) targets.push_back({random_ray(f, rng), depth(rng) * 0.5});
  OptimConfig oc;
  oc.lambda_occ = 0.0;
  FieldGradients g(f.cells());
  batch_objective(f, {}, targets, cfg, oc, &g);
  const auto cells = touched(f, targets[0].ray, cfg);
  if (cells.empty()) return;
  for (int k = 0; k < 3; ++k) {
    const uint32_t cell = cells[std::uniform_int_distribution<size_t>(0, cells.size() - 1)(rng)];
    auto eval = [&] { return batch_objective(f, {}, targets, cfg, oc, nullptr).loss; };
    t.add(g.logits[cell], central(eval, f.logits[cell]));
    t.add(g.log_omega[cell], central(eval, f.log_omega[cell]));
  }
}

}  // namespace

GradCheckReport run_gradcheck(int draws, uint64_t seed, double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  GradCheckReport report;
  const std::pair<const char*, void (*)(Tracker&, std::mt19937_64&)> suites[] = {
      {"sample_field", check_sampling},
      {"loss_occ", check_occ},
      {"loss_depth", check_gnll},
      {"render_recon_depth", check_render},
  };
  report.pass = true;
  uint64_t salt = 0;
  for (const auto& [name, fn] : suites) {
    Tracker t;
    t.entry.name = name;
    std::mt19937_64 rng(seed * 1315423911ULL + (++salt));
    for (int d = 0; d < draws; ++d) fn(t, rng);
    t.entry.draws = draws;
    t.entry.pass = t.entry.comparisons > 0 && t.entry.max_rel_err < tolerance;
    report.pass = report.pass && t.entry.pass;
    report.entries.push_back(t.entry);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

nlohmann::json report_to_json(const GradCheckReport& r) {
  nlohmann::json j;
  j["pass"] = r.pass;
  j["seconds"] = r.seconds;
  for (const auto& e : r.entries) {
    j["checks"].push_back({{"name", e.name},
                           {"draws", e.draws},
                           {"comparisons", e.comparisons},
                           {"max_rel_err", e.max_rel_err},
                           {"pass", e.pass}});
  }
  return j;
}

}  // namespace occsynth
