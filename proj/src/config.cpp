#include "occsynth/config.hpp"

#include <fstream>
#include <set>

namespace occsynth {

SynthConfig Config::synth_config() const {
  SynthConfig s;
  s.sampling = sampling;
  s.tau = tau;
  s.tau_d = tau_d;
  s.kernel = kernel;
  s.unknown_policy = unknown_policy;
  s.depth_sampling = depth_sampling;
  return s;
}

EvalCuboid Config::eval_cuboid() const {
  EvalCuboid c = EvalCuboid::preset(cuboid);
  c.voxel = voxel;
  return c;
}

namespace {

using nlohmann::json;

// Reads the keys of one JSON object into typed fields, rejecting anything unlisted.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail("unknown key '" + it.key() + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(std::string("bad value for '") + key + "'");
    }
  }
  void range(const char* key, double& lo, double& hi) {
    std::vector<double> v{lo, hi};
    get(key, v);
    if (v.size() != 2) fail(std::string("'") + key + "' needs [min, max]");
    lo = v[0];
    hi = v[1];
  }
  bool has(const char* key) const { return j_.contains(key); }
  Section child(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, path_ + "." + key);
  }
  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }
  [[noreturn]] void fail(const std::string& what) const { throw Error(ErrorCode::kConfig, path_ + ": " + what); }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_component(Section s, ComponentSpec& c, std::initializer_list<const char*> types) {
  s.get("type", c.type);
  bool ok = false;
  for (const char* t : types) ok = ok || c.type == t;
  if (!ok) s.fail("unsupported type '" + c.type + "'");
  std::string mode = c.endpoint.mode == ExternalEndpoint::Mode::kHttp ? "http" : "process";
  s.get("mode", mode);
  if (mode != "process" && mode != "http") s.fail("mode must be process or http");
  c.endpoint.mode = mode == "http" ? ExternalEndpoint::Mode::kHttp : ExternalEndpoint::Mode::kProcess;
  s.get("command", c.endpoint.command);
  s.get("url", c.endpoint.url);
  s.get("timeout_s", c.endpoint.timeout_s);
  std::string work = c.endpoint.work_dir.string();
  s.get("work_dir", work);
  c.endpoint.work_dir = work;
  if (!(c.endpoint.timeout_s > 0.0)) s.fail("timeout_s must be positive");
}

json component_json(const ComponentSpec& c) {
  return {{"type", c.type},
          {"mode", c.endpoint.mode == ExternalEndpoint::Mode::kHttp ? "http" : "process"},
          {"command", c.endpoint.command},
          {"url", c.endpoint.url},
          {"timeout_s", c.endpoint.timeout_s},
          {"work_dir", c.endpoint.work_dir.string()}};
}

}  // namespace

Config config_from_json(const json& j) {
  Config c;
  Section root(j, "config");
  int schema = kConfigSchemaVersion;
  root.get("schema_version", schema);
  if (schema != kConfigSchemaVersion) root.fail("unsupported schema_version " + std::to_string(schema));
  {
    Section s = root.child("render");
    s.get("n_coarse", c.sampling.n_coarse);
    s.get("n_fine", c.sampling.n_fine);
    s.get("n_surface", c.sampling.n_surface);
    s.get("surface_sigma", c.sampling.surface_sigma);
    s.get("near", c.sampling.near);
    s.get("far", c.sampling.far);
    std::string spacing = c.sampling.spacing == Spacing::kLinear ? "linear" : "inverse-depth";
    s.get("spacing", spacing);
    if (spacing != "linear" && spacing != "inverse-depth") s.fail("spacing must be linear or inverse-depth");
    c.sampling.spacing = spacing == "linear" ? Spacing::kLinear : Spacing::kInverseDepth;
    s.get("jitter", c.sampling.jitter);
    s.get("seed", c.sampling.seed);
    s.get("tau_s", c.tau.tau_s);
    if (!(c.tau.tau_s > 0.0)) s.fail("tau_s must be positive");
    try {
      c.sampling.validate();
    } catch (const Error& e) {
      s.fail(e.what());
    }
  }
  {
    Section s = root.child("occlusion");
    s.get("tau_d", c.tau_d.tau_d);
    s.get("morph_radius", c.kernel.radius);
    s.get("flow_eps", c.flow_eps);
    if (!(c.tau_d.tau_d > 0.0) || c.kernel.radius < 0) s.fail("tau_d must be positive and morph_radius >= 0");
  }
  {
    Section s = root.child("volume");
    std::string policy = c.unknown_policy == UnknownPolicy::kOccupied ? "occupied" : "empty";
    s.get("unknown_policy", policy);
    if (policy != "occupied" && policy != "empty") s.fail("unknown_policy must be occupied or empty");
    c.unknown_policy = policy == "occupied" ? UnknownPolicy::kOccupied : UnknownPolicy::kEmpty;
    std::string sampling = c.depth_sampling == DepthSampling::kNearest ? "nearest" : "bilinear-min";
    s.get("depth_sampling", sampling);
    if (sampling != "nearest" && sampling != "bilinear-min") s.fail("depth_sampling must be nearest or bilinear-min");
    c.depth_sampling = sampling == "nearest" ? DepthSampling::kNearest : DepthSampling::kBilinearMin;
  }
  {
    Section s = root.child("synth");
    std::string strategy = to_string(c.strategy);
    s.get("strategy", strategy);
    try {
      c.strategy = strategy_from_string(strategy);
    } catch (const Error& e) {
      s.fail(e.what());
    }
    s.get("n", c.n_synth);
    s.get("seed", c.pose_seed);
    if (s.has("poses")) {
      for (const auto& p : s.raw("poses")) {
        try {
          c.explicit_poses.push_back(pose_from_json(p));
        } catch (const std::exception& e) {
          s.fail(std::string("bad pose: ") + e.what());
        }
      }
    }
    read_component(s.child("refiner"), c.refiner, {"identity", "oracle", "external"});
    read_component(s.child("predictor"), c.predictor, {"oracle", "passthrough", "external"});
    if (c.strategy == PoseStrategy::kExplicit && c.explicit_poses.empty()) s.fail("explicit strategy needs poses");
  }
  {
    Section s = root.child("warp");
    s.range("x", c.warp.x_min, c.warp.x_max);
    s.range("y", c.warp.y_min, c.warp.y_max);
    s.range("z", c.warp.z_min, c.warp.z_max);
    s.range("yaw_deg", c.warp.yaw_min_deg, c.warp.yaw_max_deg);
    s.get("eps", c.warp_eps);
    try {
      c.warp.validate();
    } catch (const Error& e) {
      s.fail(e.what());
    }
  }
  {
    Section s = root.child("eval");
    s.get("cuboid", c.cuboid);
    s.get("voxel", c.voxel);
    try {
      c.eval_cuboid().validate();
    } catch (const Error& e) {
      s.fail(e.what());
    }
  }
  {
    Section s = root.child("distill");
    s.get("planes", c.field.planes);
    s.get("height", c.field.height);
    s.get("width", c.field.width);
    s.get("z_min", c.field.z_min);
    s.get("z_max", c.field.z_max);
    s.get("init_logit", c.field.init_logit);
    s.get("samples", c.recon.n_samples);
    s.get("density_scale", c.recon.density_scale);
    s.get("min_weight", c.recon.min_weight);
    s.get("rays", c.pool.rays);
    s.get("stratified", c.pool.stratified);
    s.get("near_surface", c.pool.near_surface);
    s.get("surface_band", c.pool.surface_band);
    s.get("uniform_ratio", c.pool.uniform_ratio);
    s.get("depth_stride", c.pool.depth_stride);
    s.get("pool_seed", c.pool.seed);
    s.get("step_size", c.optim.step_size);
    s.get("steps", c.optim.steps);
    s.get("seed", c.optim.seed);
    s.get("lambda_occ", c.optim.lambda_occ);
    s.get("lambda_depth", c.optim.lambda_depth);
    s.get("learn_omega", c.optim.learn_omega);
    s.get("occ_batch", c.optim.occ_batch);
    s.get("depth_batch", c.optim.depth_batch);
    s.get("gradient_check", c.optim.gradient_check);
    c.recon.near = c.field.z_min;
    c.recon.far = c.field.z_max;
    if (c.field.planes < 2 || c.field.height < 1 || c.field.width < 1 || !(c.field.z_min > 0.0) ||
        !(c.field.z_max > c.field.z_min) || !(c.optim.step_size > 0.0) || c.optim.steps < 0 ||
        c.optim.occ_batch < 1 || c.optim.depth_batch < 0 || c.recon.n_samples < 2) {
      s.fail("invalid distillation settings");
    }
  }
  return c;
}

json config_to_json(const Config& c) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["render"] = {{"n_coarse", c.sampling.n_coarse},
                 {"n_fine", c.sampling.n_fine},
                 {"n_surface", c.sampling.n_surface},
                 {"surface_sigma", c.sampling.surface_sigma},
                 {"near", c.sampling.near},
                 {"far", c.sampling.far},
                 {"spacing", c.sampling.spacing == Spacing::kLinear ? "linear" : "inverse-depth"},
                 {"jitter", c.sampling.jitter},
                 {"seed", c.sampling.seed},
                 {"tau_s", c.tau.tau_s}};
  j["occlusion"] = {{"tau_d", c.tau_d.tau_d}, {"morph_radius", c.kernel.radius}, {"flow_eps", c.flow_eps}};
  j["volume"] = {{"unknown_policy", c.unknown_policy == UnknownPolicy::kOccupied ? "occupied" : "empty"},
                 {"depth_sampling", c.depth_sampling == DepthSampling::kNearest ? "nearest" : "bilinear-min"}};
  json poses = json::array();
  for (const auto& p : c.explicit_poses) poses.push_back(pose_to_json(p));
  j["synth"] = {{"strategy", to_string(c.strategy)},
                {"n", c.n_synth},
                {"seed", c.pose_seed},
                {"poses", poses},
                {"refiner", component_json(c.refiner)},
                {"predictor", component_json(c.predictor)}};
  j["warp"] = {{"x", {c.warp.x_min, c.warp.x_max}},
               {"y", {c.warp.y_min, c.warp.y_max}},
               {"z", {c.warp.z_min, c.warp.z_max}},
               {"yaw_deg", {c.warp.yaw_min_deg, c.warp.yaw_max_deg}},
               {"eps", c.warp_eps}};
  j["eval"] = {{"cuboid", c.cuboid}, {"voxel", c.voxel}};
  j["distill"] = {{"planes", c.field.planes},
                  {"height", c.field.height},
                  {"width", c.field.width},
                  {"z_min", c.field.z_min},
                  {"z_max", c.field.z_max},
                  {"init_logit", c.field.init_logit},
                  {"samples", c.recon.n_samples},
                  {"density_scale", c.recon.density_scale},
                  {"min_weight", c.recon.min_weight},
                  {"rays", c.pool.rays},
                  {"stratified", c.pool.stratified},
                  {"near_surface", c.pool.near_surface},
                  {"surface_band", c.pool.surface_band},
                  {"uniform_ratio", c.pool.uniform_ratio},
                  {"depth_stride", c.pool.depth_stride},
                  {"pool_seed", c.pool.seed},
                  {"step_size", c.optim.step_size},
                  {"steps", c.optim.steps},
                  {"seed", c.optim.seed},
                  {"lambda_occ", c.optim.lambda_occ},
                  {"lambda_depth", c.optim.lambda_depth},
                  {"learn_omega", c.optim.learn_omega},
                  {"occ_batch", c.optim.occ_batch},
                  {"depth_batch", c.optim.depth_batch},
                  {"gradient_check", c.optim.gradient_check}};
  return j;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void write_resolved_config(const std::filesystem::path& dir, const Config& c) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "config.resolved.json");
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + (dir / "config.resolved.json").string());
  out << config_to_json(c).dump(2) << '\n';
}

}  // namespace occsynth
