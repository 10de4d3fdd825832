#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "occsynth/evalmod.hpp"
#include "occsynth/pseudovol.hpp"

namespace occsynth {

// Discretized occupancy + uncertainty over a camera frustum. Cells sit on the
// field's pixel centers and on Z planes spaced uniformly in inverse depth.
class ReconField {
 public:
  ReconField() = default;
  // `camera` is the full-resolution camera; the field grid uses camera.resized(width, height).
  ReconField(int planes, int height, int width, double z_min, double z_max, const Intrinsics& camera,
             const Pose& pose, double init_logit = 0.0, double init_log_omega = 0.0);

  int planes() const { return planes_; }
  int height() const { return height_; }
  int width() const { return width_; }
  double z_min() const { return z_min_; }
  double z_max() const { return z_max_; }
  const Intrinsics& intr() const { return intr_; }
  const Pose& pose() const { return pose_; }
  size_t cells() const { return logits.size(); }
  size_t index(int k, int r, int c) const { return (static_cast<size_t>(k) * height_ + r) * width_ + c; }
  double plane_depth(int k) const;

  // Continuous (column, row, plane) grid coordinates of a world point; nullopt behind the camera.
  std::optional<Vec3> grid_coords(const Point3& world) const;
  // Inside the frustum (half-cell margin around the outer pixel centers) and the depth range.
  bool contains(const Point3& world) const;

  std::vector<double> logits;
  std::vector<double> log_omega;

 private:
  int planes_ = 0, height_ = 0, width_ = 0;
  double z_min_ = 0.0, z_max_ = 0.0;
  double inv_step_ = 0.0;
  Intrinsics intr_;
  Pose pose_;
};

// Trilinear read of theta = sigmoid(logit) and omega = exp(log_omega).
struct FieldSample {
  double theta = 0.0;
  double omega = 0.0;
  std::array<uint32_t, 8> cell{};
  std::array<double, 8> weight{};
  // d theta / d logit and d omega / d log_omega per corner.
  std::array<double, 8> d_theta{};
  std::array<double, 8> d_omega{};
};

// Throws kOutOfFrustum when the point is not inside the field.
FieldSample sample_field(const ReconField& field, const Point3& world);
// Clamps grid coordinates into the field; points behind the camera read the nearest plane.
FieldSample sample_field_clamped(const ReconField& field, const Point3& world);

struct FieldGradients {
  std::vector<double> logits;
  std::vector<double> log_omega;
  explicit FieldGradients(size_t n = 0) : logits(n, 0.0), log_omega(n, 0.0) {}
  void reset() {
    std::fill(logits.begin(), logits.end(), 0.0);
    std::fill(log_omega.begin(), log_omega.end(), 0.0);
  }
};

struct OccSample {
  Point3 point;
  double target = 0.0;  // 0 or 1
};

// Sum over samples of (target - theta)^2 / omega + log omega, times lambda. Gradients are
// accumulated into `grad` when given. Throws kInvalidArgument for an empty sample set.
double loss_occ(const ReconField& field, std::span<const OccSample> samples, double lambda,
                FieldGradients* grad = nullptr);

struct ReconSampling {
  int n_samples = 96;
  double near = 3.0;
  double far = 50.0;
  // alpha = 1 - exp(-density_scale * theta * delta), delta in meters.
  double density_scale = 10.0;
  // Pixels with total weight below this are no-hit.
  double min_weight = 0.5;
};

struct RayRender {
  double depth = 0.0;     // sum w_k t_k
  double variance = 0.0;  // sum w_k omega_k + sum w_k (t_k - depth)^2
  double weight_sum = 0.0;
  bool hit = false;
};

// Soft compositing along a ray; t is the emitting camera's z-depth.
RayRender render_ray(const ReconField& field, const Ray& ray, const ReconSampling& cfg);
// Adds d_depth * d(depth)/dparams + d_variance * d(variance)/dparams to grad.
RayRender render_ray_backward(const ReconField& field, const Ray& ray, const ReconSampling& cfg, double d_depth,
                              double d_variance, FieldGradients& grad);

struct ReconDepth {
  DepthMap depth;  // invalid at no-hit pixels
  Grid<double> variance;
  Grid<double> weight_sum;
};

ReconDepth render_recon_depth(const ReconField& field, const Pose& pose, const Intrinsics& intr,
                              const ReconSampling& cfg);

// GNLL: mean over pixels valid in both maps of 0.5 log s2 + (d - d_hat)^2 / (2 s2).
struct DepthLoss {
  double value = 0.0;
  size_t pixels = 0;
  Grid<double> d_depth;     // dL / d rendered depth
  Grid<double> d_variance;  // dL / d s2
};
DepthLoss loss_depth(const DepthMap& rendered, const Grid<double>& variance, const DepthMap& target);

// Per-pixel terms, exposed for the calibration checks.
double occ_term(double residual, double omega);
double gnll_term(double residual, double variance);

struct DepthTarget {
  Ray ray;
  double depth = 0.0;
};

struct DistillPool {
  std::vector<OccSample> occ;
  std::vector<DepthTarget> depth;
};

struct PoolConfig {
  int rays = 16384;          // rays drawn from the views for occupancy samples
  int stratified = 48;       // per ray
  int near_surface = 16;     // per ray, uniform within +-surface_band of the depth
  double surface_band = 1.0;
  int uniform_ratio = 3;     // ray samples : uniform frustum samples
  int depth_stride = 4;      // pixel stride for depth targets
  uint64_t seed = 0;
};

// Occupancy samples labelled by the volume's binary collapse and depth targets from
// every view, restricted to the field.
DistillPool build_pool(const PseudoVolume& vol, const ReconField& field, const PoolConfig& cfg,
                       const ReconSampling& sampling);

struct OptimConfig {
  double step_size = 0.01;
  int steps = 2000;
  uint64_t seed = 0;
  double lambda_occ = 1.0;
  double lambda_depth = 1.0;
  bool learn_omega = true;  // false freezes omega at its initial value
  int occ_batch = 4096;
  int depth_batch = 512;
  bool gradient_check = false;  // finite-difference spot check on the first step
};

struct StepReport {
  int step = 0;
  double loss = 0.0;
  double occ = 0.0;
  double depth = 0.0;
};

// Adam on logits and log_omega. The per-step objective is
// lambda_occ * mean occupancy term + lambda_depth * mean GNLL over the minibatch.
// Throws kDivergedLoss when the loss exceeds ten times its initial magnitude.
ReconField optimize(ReconField field, const DistillPool& pool, const ReconSampling& sampling, const OptimConfig& cfg,
                    const std::function<void(const StepReport&)>& observer = {});

// Minibatch objective with gradients (used by optimize and the gradient checks).
StepReport batch_objective(const ReconField& field, std::span<const OccSample> occ,
                           std::span<const DepthTarget> depth, const ReconSampling& sampling,
                           const OptimConfig& cfg, FieldGradients* grad);

// Occupied where the clamped field reads theta > 0.5; the cuboid is in the field camera frame.
VoxelGrid voxelize_field(const ReconField& field, const EvalCuboid& cuboid);

// "RCF1", u32 Z, H, W, f32 z_min, z_max, f32 logits[], f32 log_omega[].
void write_rcf(const std::filesystem::path& path, const ReconField& field);
// Field camera and pose are not part of the checkpoint and must be supplied.
ReconField read_rcf(const std::filesystem::path& path, const Intrinsics& field_intr, const Pose& pose);

}  // namespace occsynth
