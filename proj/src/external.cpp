#include "occsynth/external.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <regex>
#include <thread>

#include <httplib.h>

extern char** environ;

namespace occsynth {

namespace {

std::atomic<uint64_t> g_job_counter{0};

using Clock = std::chrono::steady_clock;

void run_process(const ExternalEndpoint& ep, const std::filesystem::path& job_dir) {
  if (ep.command.empty()) throw ExternalError(ErrorCode::kNonZeroExit, "empty external command", job_dir);
  std::vector<std::string> args = ep.command;
  args.push_back(job_dir.string());
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  pid_t pid = 0;
  if (const int rc = posix_spawnp(&pid, argv[0], nullptr, nullptr, argv.data(), environ); rc != 0) {
    throw ExternalError(ErrorCode::kNonZeroExit, "cannot start '" + args[0] + "': " + std::strerror(rc), job_dir);
  }
  const auto deadline = Clock::now() + std::chrono::duration<double>(ep.timeout_s);
  int status = 0;
  for (;;) {
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) throw ExternalError(ErrorCode::kNonZeroExit, "waitpid failed", job_dir);
    if (Clock::now() >= deadline) {
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      throw ExternalError(ErrorCode::kTimeout, "external process exceeded " + std::to_string(ep.timeout_s) + " s",
                          job_dir);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const std::string why =
        WIFEXITED(status) ? "exit code " + std::to_string(WEXITSTATUS(status)) : "terminated by signal";
    throw ExternalError(ErrorCode::kNonZeroExit, "external process failed: " + why, job_dir);
  }
}

void run_http(const ExternalEndpoint& ep, const std::filesystem::path& job_dir) {
  static const std::regex url_re(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(ep.url, m, url_re)) {
    throw ExternalError(ErrorCode::kMalformedResponse, "unsupported endpoint url '" + ep.url + "'", job_dir);
  }
  const std::string path = m[2].matched ? m[2].str() : "/";
  const std::string body = nlohmann::json{{"job_dir", job_dir.string()}}.dump();
  const auto deadline = Clock::now() + std::chrono::duration<double>(ep.timeout_s);
  for (;;) {
    const double left = std::chrono::duration<double>(deadline - Clock::now()).count();
    if (left <= 0.0) {
      throw ExternalError(ErrorCode::kTimeout, "no response within " + std::to_string(ep.timeout_s) + " s", job_dir);
    }
    httplib::Client cli(m[1].str());
    const auto to = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(left));
    cli.set_connection_timeout(to);
    cli.set_read_timeout(to);
    cli.set_write_timeout(to);
    if (auto res = cli.Post(path, body, "application/json")) {
      if (res->status != 200) {
        throw ExternalError(ErrorCode::kNonZeroExit, "endpoint returned HTTP " + std::to_string(res->status), job_dir);
      }
      return;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(std::min<int>(50, static_cast<int>(left * 1000) + 1)));
  }
}

}  // namespace

std::filesystem::path write_job(const ExternalEndpoint& ep, const Conditioning& c, const std::string& task) {
  const auto dir = ep.work_dir / ("job-" + std::to_string(getpid()) + "-" + std::to_string(g_job_counter++));
  std::filesystem::create_directories(dir);
  std::filesystem::remove(dir / "result.png");
  std::filesystem::remove(dir / "result.pfm");
  write_png(dir / "corrupted.png", c.rgb);
  write_pfm(dir / "depth.pfm", c.depth);
  write_mask_png(dir / "mask.png", c.mask);
  nlohmann::json meta{{"task", task}, {"pose", pose_to_json(c.pose)}, {"intrinsics", c.intr}};
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
  return dir;
}

void run_endpoint(const ExternalEndpoint& ep, const std::filesystem::path& job_dir) {
  if (ep.mode == ExternalEndpoint::Mode::kProcess) {
    run_process(ep, job_dir);
  } else {
    run_http(ep, job_dir);
  }
}

Image external_refine(const ExternalEndpoint& ep, const Conditioning& c) {
  const auto dir = write_job(ep, c, "refine");
  run_endpoint(ep, dir);
  Image out;
  try {
    out = read_png(dir / "result.png");
  } catch (const Error& e) {
    throw ExternalError(ErrorCode::kMalformedResponse, e.what(), dir);
  }
  if (!out.same_shape(c.rgb)) throw ExternalError(ErrorCode::kMalformedResponse, "result.png has wrong size", dir);
  return out;
}

DepthMap external_depth(const ExternalEndpoint& ep, const Conditioning& c) {
  const auto dir = write_job(ep, c, "depth");
  run_endpoint(ep, dir);
  DepthMap out;
  try {
    out = read_depth(dir / "result.pfm");
  } catch (const Error& e) {
    throw ExternalError(ErrorCode::kMalformedResponse, e.what(), dir);
  }
  if (!out.values.same_shape(c.rgb)) {
    throw ExternalError(ErrorCode::kMalformedResponse, "result.pfm has wrong size", dir);
  }
  return out;
}

Image ExternalRefiner::refine(const RenderedView& view, const Pose& pose, const Intrinsics& intr) {
  return external_refine(ep_, {view.rgb, view.depth, view.occlusion, pose, intr});
}

DepthMap ExternalDepthPredictor::predict(const Image& rgb, const RenderedView& view, const Pose& pose,
                                         const Intrinsics& intr) {
  return external_depth(ep_, {rgb, view.depth, view.occlusion, pose, intr});
}

}  // namespace occsynth
