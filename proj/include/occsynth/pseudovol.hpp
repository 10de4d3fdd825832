#pragma once

#include <memory>
#include <vector>

#include "occsynth/core.hpp"
#include "occsynth/grid.hpp"

namespace occsynth {

// One (image, depth, pose) element of the active view set.
struct ViewTriplet {
  Image image;  // RGB in [0,1]
  DepthMap depth;
  Pose pose;  // camera_from_world
  Intrinsics intr;

  // Throws kDimensionMismatch when image, depth and intrinsics disagree.
  void validate() const;
};

enum class OccState : uint8_t { kEmpty, kOccupied, kUnknown };
enum class UnknownPolicy : uint8_t { kOccupied, kEmpty };
enum class DepthSampling : uint8_t { kNearest, kBilinearMin };

// True iff the point is in front of the camera and projects inside the image
// (half-pixel margin around the outer pixel centers).
bool inside_frustum(const ViewTriplet& view, const Point3& world);

// x^z > d_p with d_p sampled from the view's depth map. Requires inside_frustum;
// throws kInvalidDepthPixel when the sampled depth is masked out and
// kOutOfFrustum when the point does not project into the view.
bool behind_depth(const ViewTriplet& view, const Point3& world,
                  DepthSampling sampling = DepthSampling::kNearest);

// Where a world point lands in one view.
struct ViewProbe {
  bool inside = false;     // inside the frustum
  bool has_depth = false;  // sampled depth pixel is valid
  double z = 0.0;          // camera-frame z of the point
  double u = 0.0, v = 0.0;
  double depth = 0.0;      // sampled d_p (when has_depth)
  int row = 0, col = 0;    // nearest pixel (when inside)
};

// Lazily evaluated pseudo-occupancy over the active view set. A point is Empty if
// any view containing it sees it in front of its depth, Occupied if every
// containing view sees it behind its depth, Unknown if no view constrains it.
// Immutable; add_view returns a new snapshot sharing the existing views.
class PseudoVolume {
 public:
  explicit PseudoVolume(ViewTriplet input, UnknownPolicy policy = UnknownPolicy::kOccupied,
                        DepthSampling sampling = DepthSampling::kNearest);

  size_t size() const { return views_.size(); }
  const ViewTriplet& view(size_t i) const { return *views_[i].view; }
  UnknownPolicy unknown_policy() const { return policy_; }
  DepthSampling depth_sampling() const { return sampling_; }

  OccState occupancy(const Point3& world) const;
  // Binary collapse of occupancy() per the unknown policy.
  bool occupied(const Point3& world) const;
  bool collapse(OccState s) const {
    return s == OccState::kOccupied || (s == OccState::kUnknown && policy_ == UnknownPolicy::kOccupied);
  }

  ViewProbe probe(size_t view_index, const Point3& world) const;

  // Throws kDimensionMismatch for malformed triplets.
  PseudoVolume add_view(ViewTriplet triplet) const;

  PseudoVolume with_policy(UnknownPolicy policy) const;

 private:
  struct Entry {
    std::shared_ptr<const ViewTriplet> view;
    double rot[9];
    double trans[3];
    double fx, fy, cx, cy;
    int width, height;
  };
  static Entry make_entry(std::shared_ptr<const ViewTriplet> view);

  std::vector<Entry> views_;
  UnknownPolicy policy_;
  DepthSampling sampling_;
};

}  // namespace occsynth
