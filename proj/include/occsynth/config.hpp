#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "occsynth/distill.hpp"
#include "occsynth/evalmod.hpp"
#include "occsynth/external.hpp"
#include "occsynth/synth.hpp"
#include "occsynth/warp.hpp"

namespace occsynth {

inline constexpr int kConfigSchemaVersion = 1;

struct ComponentSpec {
  std::string type;  // refiner: identity | oracle | external; predictor: oracle | passthrough | external
  ExternalEndpoint endpoint;
};

struct FieldSpec {
  int planes = 64;
  int height = 48;
  int width = 160;
  double z_min = 3.0;
  double z_max = 50.0;
  double init_logit = 1.0;
};

struct Config {
  RaySampling sampling;
  SurfaceThreshold tau;
  GradientThreshold tau_d;
  MorphKernel kernel;
  double flow_eps = 1.0;
  UnknownPolicy unknown_policy = UnknownPolicy::kOccupied;
  DepthSampling depth_sampling = DepthSampling::kNearest;

  PoseStrategy strategy = PoseStrategy::kRig8;
  int n_synth = 8;
  uint64_t pose_seed = 0;
  std::vector<Pose> explicit_poses;  // relative to the input camera
  ComponentSpec refiner{"oracle", {}};
  ComponentSpec predictor{"oracle", {}};

  WarpPoseSampler warp;
  double warp_eps = 0.05;

  std::string cuboid = "kitti";
  double voxel = 0.2;

  FieldSpec field;
  ReconSampling recon;
  PoolConfig pool;
  OptimConfig optim;

  SynthConfig synth_config() const;
  EvalCuboid eval_cuboid() const;
};

// Missing keys keep their defaults; unknown keys and wrong types throw kConfig.
Config config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const Config& c);
Config load_config(const std::filesystem::path& path);
void write_resolved_config(const std::filesystem::path& dir, const Config& c);

}  // namespace occsynth
