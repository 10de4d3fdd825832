#include "occsynth/io.hpp"

#include <cstdio>
#include <fstream>

namespace occsynth {

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_triplet(const std::filesystem::path& dir, const ViewTriplet& t) {
  t.validate();
  std::filesystem::create_directories(dir);
  write_png(dir / "image.png", t.image);
  write_pfm(dir / "depth.pfm", t.depth);
  write_json(dir / "pose.json", pose_to_json(t.pose));
  write_json(dir / "intrinsics.json", t.intr);
}

ViewTriplet read_triplet(const std::filesystem::path& dir) {
  ViewTriplet t;
  t.image = read_png(dir / "image.png");
  t.depth = read_depth(dir / "depth.pfm");
  try {
    t.pose = pose_from_json(read_json(dir / "pose.json"));
    t.intr = read_json(dir / "intrinsics.json").get<Intrinsics>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, dir.string() + ": " + e.what());
  }
  t.validate();
  return t;
}

void write_manifest(const std::filesystem::path& path, const std::vector<std::filesystem::path>& view_dirs,
                    const std::vector<Pose>& poses, UnknownPolicy policy, DepthSampling sampling) {
  nlohmann::json j;
  const auto base = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  j["views"] = nlohmann::json::array();
  for (size_t i = 0; i < view_dirs.size(); ++i) {
    j["views"].push_back({{"dir", std::filesystem::relative(view_dirs[i], base).generic_string()},
                          {"pose", pose_to_json(poses.at(i))}});
  }
  j["unknown_policy"] = policy == UnknownPolicy::kOccupied ? "occupied" : "empty";
  j["depth_sampling"] = sampling == DepthSampling::kNearest ? "nearest" : "bilinear-min";
  write_json(path, j);
}

PseudoVolume load_volume(const std::filesystem::path& manifest) {
  const nlohmann::json j = read_json(manifest);
  const auto base = manifest.parent_path();
  try {
    const auto& views = j.at("views");
    if (!views.is_array() || views.empty()) throw Error(ErrorCode::kIo, manifest.string() + ": no views");
    const auto policy =
        j.value("unknown_policy", std::string("occupied")) == "empty" ? UnknownPolicy::kEmpty : UnknownPolicy::kOccupied;
    const auto sampling = j.value("depth_sampling", std::string("nearest")) == "bilinear-min"
                              ? DepthSampling::kBilinearMin
                              : DepthSampling::kNearest;
    PseudoVolume vol(read_triplet(base / views[0].at("dir").get<std::string>()), policy, sampling);
    for (size_t i = 1; i < views.size(); ++i) {
      vol = vol.add_view(read_triplet(base / views[i].at("dir").get<std::string>()));
    }
    return vol;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, manifest.string() + ": " + e.what());
  }
}

void export_distill_dataset(const std::filesystem::path& dir, const PseudoVolume& vol, const DistillPool& pool) {
  std::filesystem::create_directories(dir / "targets");
  std::ofstream out(dir / "occupancy.bin", std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + (dir / "occupancy.bin").string());
  for (const OccSample& s : pool.occ) {
    const float rec[4] = {float(s.point.x()), float(s.point.y()), float(s.point.z()), float(s.target)};
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
  }
  if (!out) throw Error(ErrorCode::kIo, "short write to occupancy.bin");
  char name[16];
  for (size_t i = 0; i < vol.size(); ++i) {
    std::snprintf(name, sizeof(name), "%03zu", i);
    const ViewTriplet& v = vol.view(i);
    const auto sub = dir / "targets" / name;
    std::filesystem::create_directories(sub);
    write_pfm(sub / "depth.pfm", v.depth);
    write_json(sub / "pose.json", pose_to_json(v.pose));
    write_json(sub / "intrinsics.json", v.intr);
  }
  write_json(dir / "index.json", {{"occupancy_records", pool.occ.size()}, {"targets", vol.size()}});
}

}  // namespace occsynth
