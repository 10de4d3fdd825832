#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "occsynth/distill.hpp"
#include "occsynth/pseudovol.hpp"

namespace occsynth {

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

// Triplet directory: image.png, depth.pfm, pose.json, intrinsics.json.
void write_triplet(const std::filesystem::path& dir, const ViewTriplet& t);
ViewTriplet read_triplet(const std::filesystem::path& dir);

// Volume manifest: {"views": [{"dir", "pose"}...], "unknown_policy", "depth_sampling"}.
// View directories are stored relative to the manifest.
void write_manifest(const std::filesystem::path& path, const std::vector<std::filesystem::path>& view_dirs,
                    const std::vector<Pose>& poses, UnknownPolicy policy, DepthSampling sampling);
PseudoVolume load_volume(const std::filesystem::path& manifest);

// Training set for an external field predictor: occupancy.bin holds little-endian
// f32 records (x, y, z, value); targets/NNN/ holds each view's depth.pfm, pose.json
// and intrinsics.json.
void export_distill_dataset(const std::filesystem::path& dir, const PseudoVolume& vol, const DistillPool& pool);

}  // namespace occsynth
