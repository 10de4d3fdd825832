#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>

#include "occsynth/config.hpp"
#include "occsynth/distill.hpp"
#include "occsynth/evalmod.hpp"
#include "occsynth/external.hpp"
#include "occsynth/gradcheck.hpp"
#include "occsynth/io.hpp"
#include "occsynth/parallel.hpp"
#include "occsynth/scene.hpp"
#include "occsynth/synth.hpp"
#include "occsynth/warp.hpp"

namespace fs = std::filesystem;
using namespace occsynth;

namespace {

enum Exit { kOk = 0, kConfigExit = 2, kIoExit = 3, kNumericExit = 4, kExternalExit = 5 };

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::kIo:
      return kIoExit;
    case ErrorCode::kDivergedLoss:
    case ErrorCode::kGradientCheck:
    case ErrorCode::kNonPositiveDepth:
    case ErrorCode::kBehindCamera:
    case ErrorCode::kOutOfFrustum:
    case ErrorCode::kInvalidDepthPixel:
      return kNumericExit;
    case ErrorCode::kTimeout:
    case ErrorCode::kMalformedResponse:
    case ErrorCode::kNonZeroExit:
    case ErrorCode::kRefinerFailure:
    case ErrorCode::kPredictorFailure:
      return kExternalExit;
    default:
      return kConfigExit;
  }
}

struct Options {
  std::string config_path;
  int threads = 0;
};

Config load(const Options& o) { return o.config_path.empty() ? config_from_json(nlohmann::json::object()) : load_config(o.config_path); }

std::shared_ptr<const SceneOracle> oracle_for(const fs::path& triplet_dir) {
  const fs::path scene = triplet_dir / "scene.json";
  if (!fs::exists(scene)) {
    throw Error(ErrorCode::kConfig, "oracle components need " + scene.string() + " (written by scene-gen)");
  }
  return std::make_shared<const SceneOracle>(scene_from_json(read_json(scene)));
}

std::unique_ptr<Refiner> make_refiner(const ComponentSpec& c, const fs::path& triplet_dir) {
  if (c.type == "identity") return std::make_unique<IdentityRefiner>();
  if (c.type == "oracle") return std::make_unique<OracleRefiner>(oracle_for(triplet_dir));
  return std::make_unique<ExternalRefiner>(c.endpoint);
}

std::unique_ptr<DepthPredictor> make_predictor(const ComponentSpec& c, const Config& cfg, const fs::path& triplet_dir) {
  if (c.type == "oracle") return std::make_unique<OracleDepthPredictor>(oracle_for(triplet_dir));
  if (c.type == "passthrough") return std::make_unique<PassthroughDepthPredictor>(cfg.sampling.far);
  return std::make_unique<ExternalDepthPredictor>(c.endpoint);
}

void write_rendered(const fs::path& dir, const RenderedView& v) {
  fs::create_directories(dir);
  write_png(dir / "rgb.png", v.rgb);
  write_pfm(dir / "depth.pfm", v.depth);
  write_mask_png(dir / "occlusion.png", v.occlusion);
  write_mask_png(dir / "hit_mask.png", v.hit_mask);
  write_mask_png(dir / "color_valid.png", v.color_valid);
}

int cmd_scene_gen(const Options& o, const fs::path& spec_path, const fs::path& out) {
  const Config cfg = load(o);
  const SceneSpec spec = load_scene(spec_path);
  const SceneOracle oracle(spec);
  write_triplet(out, render_input(oracle));
  write_json(out / "scene.json", scene_to_json(spec));
  write_vox(out / "gt.vox", voxelize([&](const Point3& p) { return oracle.occupied(p); }, cfg.eval_cuboid()));
  write_resolved_config(out, cfg);
  return kOk;
}

int cmd_synth(const Options& o, const fs::path& triplet_dir, const fs::path& out, const std::string& strategy,
              int64_t seed) {
  Config cfg = load(o);
  if (!strategy.empty()) cfg.strategy = strategy_from_string(strategy);
  if (seed >= 0) cfg.pose_seed = static_cast<uint64_t>(seed);
  const ViewTriplet input = read_triplet(triplet_dir);
  PoseSet poses;
  if (cfg.strategy == PoseStrategy::kExplicit) {
    for (const Pose& p : cfg.explicit_poses) poses.poses.push_back(p * input.pose);
  } else {
    const int n = cfg.strategy == PoseStrategy::kRig4 ? 4 : (cfg.strategy == PoseStrategy::kRig8 ? 8 : cfg.n_synth);
    poses = sample_poses(cfg.strategy, n, cfg.pose_seed, input.pose);
  }
  auto refiner = make_refiner(cfg.refiner, triplet_dir);
  auto predictor = make_predictor(cfg.predictor, cfg, triplet_dir);
  fs::create_directories(out);
  write_resolved_config(out, cfg);
  std::vector<fs::path> dirs{out / "views" / "000"};
  std::vector<Pose> view_poses{input.pose};
  write_triplet(dirs[0], input);
  char name[16];
  const PseudoVolume vol =
      synthesize(input, poses, *refiner, *predictor, cfg.synth_config(), [&](const SynthStep& s) {
        std::snprintf(name, sizeof(name), "%03zu", s.index + 1);
        dirs.push_back(out / "views" / name);
        view_poses.push_back(s.pose);
        write_triplet(dirs.back(), *s.completed);
        write_rendered(out / "previews" / name, *s.rendered);
      });
  write_manifest(out / "volume.json", dirs, view_poses, vol.unknown_policy(), vol.depth_sampling());
  return kOk;
}

int cmd_render(const Options& o, const fs::path& manifest, const fs::path& pose_path, const fs::path& out) {
  const Config cfg = load(o);
  const PseudoVolume vol = load_volume(manifest);
  const Pose pose = pose_from_json(read_json(pose_path));
  const auto occ = view_occlusion_maps(vol, cfg.tau_d);
  write_rendered(out, render_view(vol, vol.view(0).intr, pose, cfg.sampling, cfg.tau, occ, cfg.kernel));
  write_resolved_config(out, cfg);
  return kOk;
}

int cmd_vcm_data(const Options& o, const fs::path& triplet_dir, const fs::path& out, int count, uint64_t seed) {
  const Config cfg = load(o);
  const ViewTriplet input = read_triplet(triplet_dir);
  fs::create_directories(out);
  write_resolved_config(out, cfg);
  char name[32];
  for (int k = 0; k < count; ++k) {
    WarpPoseSampler sampler = cfg.warp;
    sampler.seed = seed * 1000003ULL + 2 * k;
    const VcmTrainingPair pair =
        make_vcm_pair(input, sampler, seed * 1000003ULL + 2 * k + 1, cfg.kernel, cfg.sampling, cfg.tau, cfg.warp_eps);
    std::snprintf(name, sizeof(name), "pair_%04d", k);
    write_vcm_pair(out / name, pair, input.intr);
  }
  return kOk;
}

ReconField read_field(const fs::path& rcf) {
  const fs::path side = fs::path(rcf.string() + ".json");
  const nlohmann::json j = read_json(side);
  try {
    return read_rcf(rcf, j.at("intrinsics").get<Intrinsics>(), pose_from_json(j.at("pose")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, side.string() + ": " + e.what());
  }
}

int cmd_voxelize(const Options& o, const fs::path& in, const fs::path& out, const std::string& ply) {
  const Config cfg = load(o);
  VoxelGrid grid;
  if (in.extension() == ".rcf") {
    grid = voxelize_field(read_field(in), cfg.eval_cuboid());
  } else {
    grid = voxelize(load_volume(in), cfg.eval_cuboid());
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_vox(out, grid);
  if (!ply.empty()) write_ply(ply, grid);
  return kOk;
}

int cmd_eval(const Options& o, const fs::path& pred_path, const fs::path& gt_path, const fs::path& triplet_dir,
             const std::string& cuboid_name, const std::string& out_path) {
  Config cfg = load(o);
  if (!cuboid_name.empty()) cfg.cuboid = cuboid_name;
  const EvalCuboid cuboid = cfg.eval_cuboid();
  const VoxelGrid pred = read_vox(pred_path), gt = read_vox(gt_path);
  const VoxelGrid expected(cuboid);
  if (pred.nx != expected.nx || pred.ny != expected.ny || pred.nz != expected.nz ||
      std::abs(pred.cuboid.y_min - cuboid.y_min) > 1e-6) {
    throw Error(ErrorCode::kCuboidMismatch, "prediction does not cover the '" + cfg.cuboid + "' cuboid");
  }
  VoxelGrid invisible = invisible_mask(read_triplet(triplet_dir), cuboid);
  invisible.cuboid = pred.cuboid;
  const nlohmann::json m = metrics_to_json(metrics(pred, gt, invisible));
  std::cout << m.dump() << std::endl;
  const fs::path dst = out_path.empty() ? fs::path(pred_path).replace_extension(".metrics.json") : fs::path(out_path);
  write_json(dst, m);
  return kOk;
}

int cmd_distill(const Options& o, const fs::path& manifest, const fs::path& out, int steps,
                const std::string& export_dir) {
  Config cfg = load(o);
  if (steps >= 0) cfg.optim.steps = steps;
  const PseudoVolume vol = load_volume(manifest);
  const ViewTriplet& input = vol.view(0);
  ReconField field(cfg.field.planes, cfg.field.height, cfg.field.width, cfg.field.z_min, cfg.field.z_max, input.intr,
                   input.pose, cfg.field.init_logit);
  const DistillPool pool = build_pool(vol, field, cfg.pool, cfg.recon);
  if (!export_dir.empty()) export_distill_dataset(export_dir, vol, pool);
  nlohmann::json losses = nlohmann::json::array();
  field = optimize(std::move(field), pool, cfg.recon, cfg.optim, [&](const StepReport& r) {
    losses.push_back({{"step", r.step}, {"loss", r.loss}, {"occ", r.occ}, {"depth", r.depth}});
  });
  const fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
  fs::create_directories(dir);
  write_rcf(out, field);
  write_json(fs::path(out.string() + ".json"), {{"intrinsics", field.intr()}, {"pose", pose_to_json(field.pose())}});
  write_json(fs::path(out.string() + ".losses.json"), losses);
  write_resolved_config(dir, cfg);
  return kOk;
}

int cmd_gradcheck(int draws, uint64_t seed) {
  const GradCheckReport r = run_gradcheck(draws, seed);
  std::cout << report_to_json(r).dump(2) << std::endl;
  return r.pass ? kOk : kNumericExit;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-occupancy scene synthesis and distillation"};
  app.require_subcommand(0, 1);
  Options opt;
  app.add_option("--config", opt.config_path, "JSON configuration file");
  app.add_option("--threads", opt.threads, "Worker thread cap (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_flag_callback(
      "--version",
      [] {
        std::cout << OCCSYNTH_BUILD_ID << " (config schema " << kConfigSchemaVersion << ")" << std::endl;
        throw CLI::Success();
      },
      "Print the build identifier");

  std::string a, b, c, d, s_strategy, ply, cuboid, out_json;
  int64_t seed = -1;
  int count = 1, steps = -1, draws = 200;
  uint64_t vseed = 0;

  auto* scene_gen = app.add_subcommand("scene-gen", "Render the input triplet of a synthetic scene");
  scene_gen->add_option("spec", a)->required();
  scene_gen->add_option("out", b)->required();

  auto* synth = app.add_subcommand("synth", "Render-refine-repeat from an input triplet");
  synth->add_option("triplet", a)->required();
  synth->add_option("out", b)->required();
  synth->add_option("--strategy", s_strategy, "rig4 | rig8 | shift | orbit | explicit");
  synth->add_option("--seed", seed, "Pose sampling seed");

  auto* render = app.add_subcommand("render", "Render one view from a volume manifest");
  render->add_option("manifest", a)->required();
  render->add_option("pose", b)->required();
  render->add_option("out", c)->required();

  auto* vcm = app.add_subcommand("vcm-data", "Forward-backward warped training pairs");
  vcm->add_option("triplet", a)->required();
  vcm->add_option("out", b)->required();
  vcm->add_option("--count", count)->check(CLI::NonNegativeNumber);
  vcm->add_option("--seed", vseed);

  auto* vox = app.add_subcommand("voxelize", "Voxelize a volume manifest or an .rcf checkpoint");
  vox->add_option("input", a)->required();
  vox->add_option("out", b)->required();
  vox->add_option("--ply", ply);

  auto* eval = app.add_subcommand("eval", "Occupancy metrics against a ground-truth grid");
  eval->add_option("pred", a)->required();
  eval->add_option("gt", b)->required();
  eval->add_option("triplet", c)->required();
  eval->add_option("--cuboid", cuboid)->check(CLI::IsMember({"kitti", "waymo"}));
  eval->add_option("--out", out_json, "Metrics file (default: <pred>.metrics.json)");

  auto* distill = app.add_subcommand("distill", "Distill a volume into a reconstruction field");
  distill->add_option("manifest", a)->required();
  distill->add_option("out", b)->required();
  distill->add_option("--steps", steps)->check(CLI::NonNegativeNumber);
  distill->add_option("--export", d, "Also write the occupancy samples and depth targets here");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
  gradcheck->add_option("--draws", draws)->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", vseed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigExit;
  }
  set_thread_count(opt.threads);
  try {
    if (*scene_gen) return cmd_scene_gen(opt, a, b);
    if (*synth) return cmd_synth(opt, a, b, s_strategy, seed);
    if (*render) return cmd_render(opt, a, b, c);
    if (*vcm) return cmd_vcm_data(opt, a, b, count, vseed);
    if (*vox) return cmd_voxelize(opt, a, b, ply);
    if (*eval) return cmd_eval(opt, a, b, c, cuboid, out_json);
    if (*distill) return cmd_distill(opt, a, b, steps, d);
    if (*gradcheck) return cmd_gradcheck(draws, vseed);
    std::cout << app.help() << std::endl;
    return kConfigExit;
  } catch (const SynthesisError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return exit_code(e.cause()) == kExternalExit ? kExternalExit : exit_code(e.code());
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kIoExit;
  }
}
