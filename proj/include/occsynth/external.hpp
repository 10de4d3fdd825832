#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "occsynth/synth.hpp"

namespace occsynth {

// Out-of-process refiner or depth predictor. Process mode runs `command` with the
// job directory appended as the last argument; HTTP mode POSTs {"job_dir": ...} to url.
struct ExternalEndpoint {
  enum class Mode : uint8_t { kProcess, kHttp };
  Mode mode = Mode::kProcess;
  std::vector<std::string> command;
  std::string url;  // http://host:port/path
  double timeout_s = 120.0;
  std::filesystem::path work_dir = std::filesystem::temp_directory_path() / "occsynth-jobs";
};

class ExternalError : public Error {
 public:
  ExternalError(ErrorCode code, const std::string& what, std::filesystem::path job_dir)
      : Error(code, what + " (job " + job_dir.string() + ")"), job_dir_(std::move(job_dir)) {}
  const std::filesystem::path& job_dir() const noexcept { return job_dir_; }

 private:
  std::filesystem::path job_dir_;
};

struct Conditioning {
  Image rgb;
  DepthMap depth;
  Mask mask;
  Pose pose;
  Intrinsics intr;
};

// Creates a fresh job directory holding corrupted.png, depth.pfm, mask.png and meta.json.
std::filesystem::path write_job(const ExternalEndpoint& ep, const Conditioning& c, const std::string& task);
// Runs the endpoint on a prepared job directory; throws ExternalError.
void run_endpoint(const ExternalEndpoint& ep, const std::filesystem::path& job_dir);

// Reads result.png.
Image external_refine(const ExternalEndpoint& ep, const Conditioning& c);
// Reads result.pfm.
DepthMap external_depth(const ExternalEndpoint& ep, const Conditioning& c);

class ExternalRefiner : public Refiner {
 public:
  explicit ExternalRefiner(ExternalEndpoint ep) : ep_(std::move(ep)) {}
  Image refine(const RenderedView& view, const Pose& pose, const Intrinsics& intr) override;

 private:
  ExternalEndpoint ep_;
};

class ExternalDepthPredictor : public DepthPredictor {
 public:
  explicit ExternalDepthPredictor(ExternalEndpoint ep) : ep_(std::move(ep)) {}
  DepthMap predict(const Image& rgb, const RenderedView& view, const Pose& pose, const Intrinsics& intr) override;

 private:
  ExternalEndpoint ep_;
};

}  // namespace occsynth
