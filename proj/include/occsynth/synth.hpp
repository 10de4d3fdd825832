#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "occsynth/occlusion.hpp"
#include "occsynth/render.hpp"
#include "occsynth/scene.hpp"

namespace occsynth {

enum class PoseStrategy : uint8_t { kRig4, kRig8, kRandomShift, kRandomOrbit, kExplicit };

// "rig4", "rig8", "shift", "orbit", "explicit"; throws kUnknownStrategy.
PoseStrategy strategy_from_string(const std::string& name);
std::string to_string(PoseStrategy s);

struct PoseSet {
  std::vector<Pose> poses;
  PoseStrategy strategy = PoseStrategy::kExplicit;
  uint64_t seed = 0;
};

// Poses relative to the input camera. Rig strategies need n in {4, 8} matching the
// rig; random strategies accept any n >= 1. kExplicit is rejected here.
PoseSet sample_poses(PoseStrategy strategy, int n, uint64_t seed, const Pose& input_pose);

class Refiner {
 public:
  virtual ~Refiner() = default;
  // Completed RGB for a rendered view; same size as view.rgb.
  virtual Image refine(const RenderedView& view, const Pose& pose, const Intrinsics& intr) = 0;
};

class DepthPredictor {
 public:
  virtual ~DepthPredictor() = default;
  // Dense positive depth for the completed view.
  virtual DepthMap predict(const Image& rgb, const RenderedView& view, const Pose& pose, const Intrinsics& intr) = 0;
};

class IdentityRefiner : public Refiner {
 public:
  Image refine(const RenderedView& view, const Pose&, const Intrinsics&) override { return view.rgb; }
};

// Ground-truth colors wherever the rendered view is flagged occluded.
class OracleRefiner : public Refiner {
 public:
  explicit OracleRefiner(std::shared_ptr<const SceneOracle> oracle) : oracle_(std::move(oracle)) {}
  Image refine(const RenderedView& view, const Pose& pose, const Intrinsics& intr) override;

 private:
  std::shared_ptr<const SceneOracle> oracle_;
};

class OracleDepthPredictor : public DepthPredictor {
 public:
  explicit OracleDepthPredictor(std::shared_ptr<const SceneOracle> oracle) : oracle_(std::move(oracle)) {}
  DepthMap predict(const Image& rgb, const RenderedView& view, const Pose& pose, const Intrinsics& intr) override;

 private:
  std::shared_ptr<const SceneOracle> oracle_;
};

// Rendered depth with occluded and unknown pixels filled from the nearest valid pixel
// on the same row, followed by a radius-2 median over the filled pixels.
class PassthroughDepthPredictor : public DepthPredictor {
 public:
  explicit PassthroughDepthPredictor(double far = 80.0) : far_(far) {}
  DepthMap predict(const Image& rgb, const RenderedView& view, const Pose& pose, const Intrinsics& intr) override;

 private:
  double far_;
};

struct SynthConfig {
  RaySampling sampling;
  SurfaceThreshold tau;
  GradientThreshold tau_d;
  MorphKernel kernel;
  UnknownPolicy unknown_policy = UnknownPolicy::kOccupied;
  DepthSampling depth_sampling = DepthSampling::kNearest;
};

// Refiner or predictor failure, with the volume accumulated so far.
class SynthesisError : public Error {
 public:
  SynthesisError(ErrorCode code, ErrorCode cause, const std::string& what, std::shared_ptr<PseudoVolume> partial)
      : Error(code, what), cause_(cause), partial_(std::move(partial)) {}
  ErrorCode cause() const noexcept { return cause_; }
  const std::shared_ptr<PseudoVolume>& partial() const noexcept { return partial_; }

 private:
  ErrorCode cause_;
  std::shared_ptr<PseudoVolume> partial_;
};

struct SynthStep {
  size_t index = 0;  // position in processing order
  Pose pose;
  const RenderedView* rendered = nullptr;
  const ViewTriplet* completed = nullptr;
};

// Poses in processing order: increasing distance from the input camera, ties kept.
std::vector<Pose> processing_order(const std::vector<Pose>& poses, const Pose& input_pose);

// Render-refine-repeat. The observer (optional) sees every iteration.
PseudoVolume synthesize(const ViewTriplet& input, const PoseSet& poses, Refiner& refiner, DepthPredictor& predictor,
                        const SynthConfig& cfg, const std::function<void(const SynthStep&)>& observer = {});

}  // namespace occsynth
