#include "occsynth/pseudovol.hpp"

#include <algorithm>
#include <cmath>

namespace occsynth {

void ViewTriplet::validate() const {
  intr.validate();
  require_same_shape(image.height(), image.width(), intr.height, intr.width,
                     "triplet image does not match intrinsics");
  require_same_shape(depth.height(), depth.width(), intr.height, intr.width,
                     "triplet depth does not match intrinsics");
  require_same_shape(depth.valid.height(), depth.valid.width(), intr.height, intr.width,
                     "triplet validity mask does not match intrinsics");
}

namespace {

bool project_inside(const Vec3& cam, const Intrinsics& intr, double& u, double& v) {
  if (!(cam.z() > 1e-9)) return false;
  u = intr.fx * cam.x() / cam.z() + intr.cx;
  v = intr.fy * cam.y() / cam.z() + intr.cy;
  return u >= -0.5 && u < intr.width - 0.5 && v >= -0.5 && v < intr.height - 0.5;
}

// Returns false when no valid depth is available at the projected location.
bool sample_depth(const DepthMap& depth, double u, double v, DepthSampling sampling, double& out) {
  const int w = depth.width(), h = depth.height();
  if (sampling == DepthSampling::kNearest) {
    const int c = std::clamp(static_cast<int>(std::floor(u + 0.5)), 0, w - 1);
    const int r = std::clamp(static_cast<int>(std::floor(v + 0.5)), 0, h - 1);
    if (!depth.is_valid(r, c)) return false;
    out = depth.values(r, c);
    return true;
  }
  const int c0 = static_cast<int>(std::floor(u)), r0 = static_cast<int>(std::floor(v));
  bool any = false;
  double best = 0.0;
  for (int dr = 0; dr < 2; ++dr) {
    for (int dc = 0; dc < 2; ++dc) {
      const int r = std::clamp(r0 + dr, 0, h - 1), c = std::clamp(c0 + dc, 0, w - 1);
      if (!depth.is_valid(r, c)) continue;
      const double d = depth.values(r, c);
      if (!any || d < best) best = d;
      any = true;
    }
  }
  out = best;
  return any;
}

}  // namespace

bool inside_frustum(const ViewTriplet& view, const Point3& world) {
  double u, v;
  return project_inside(view.pose.apply(world), view.intr, u, v);
}

bool behind_depth(const ViewTriplet& view, const Point3& world, DepthSampling sampling) {
  const Vec3 cam = view.pose.apply(world);
  double u, v, d;
  if (!project_inside(cam, view.intr, u, v)) {
    throw Error(ErrorCode::kOutOfFrustum, "behind_depth query outside the view frustum");
  }
  if (!sample_depth(view.depth, u, v, sampling, d)) {
    throw Error(ErrorCode::kInvalidDepthPixel, "sampled depth pixel is invalid");
  }
  return cam.z() > d;
}

PseudoVolume::Entry PseudoVolume::make_entry(std::shared_ptr<const ViewTriplet> view) {
  Entry e;
  const Mat3& r = view->pose.rotation();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) e.rot[3 * i + j] = r(i, j);
    e.trans[i] = view->pose.translation()[i];
  }
  e.fx = view->intr.fx;
  e.fy = view->intr.fy;
  e.cx = view->intr.cx;
  e.cy = view->intr.cy;
  e.width = view->intr.width;
  e.height = view->intr.height;
  e.view = std::move(view);
  return e;
}

PseudoVolume::PseudoVolume(ViewTriplet input, UnknownPolicy policy, DepthSampling sampling)
    : policy_(policy), sampling_(sampling) {
  input.validate();
  views_.push_back(make_entry(std::make_shared<const ViewTriplet>(std::move(input))));
}

PseudoVolume PseudoVolume::add_view(ViewTriplet triplet) const {
  triplet.validate();
  PseudoVolume out = *this;
  out.views_.push_back(make_entry(std::make_shared<const ViewTriplet>(std::move(triplet))));
  return out;
}

PseudoVolume PseudoVolume::with_policy(UnknownPolicy policy) const {
  PseudoVolume out = *this;
  out.policy_ = policy;
  return out;
}

ViewProbe PseudoVolume::probe(size_t view_index, const Point3& p) const {
  const Entry& e = views_[view_index];
  ViewProbe out;
  const double* r = e.rot;
  const double x = r[0] * p.x() + r[1] * p.y() + r[2] * p.z() + e.trans[0];
  const double y = r[3] * p.x() + r[4] * p.y() + r[5] * p.z() + e.trans[1];
  const double z = r[6] * p.x() + r[7] * p.y() + r[8] * p.z() + e.trans[2];
  out.z = z;
  if (!(z > 1e-9)) return out;
  const double inv_z = 1.0 / z;
  const double u = e.fx * x * inv_z + e.cx;
  const double v = e.fy * y * inv_z + e.cy;
  out.u = u;
  out.v = v;
  if (!(u >= -0.5 && u < e.width - 0.5 && v >= -0.5 && v < e.height - 0.5)) return out;
  out.inside = true;
  out.col = std::clamp(static_cast<int>(std::floor(u + 0.5)), 0, e.width - 1);
  out.row = std::clamp(static_cast<int>(std::floor(v + 0.5)), 0, e.height - 1);
  if (sampling_ == DepthSampling::kNearest) {
    const DepthMap& dm = e.view->depth;
    if (dm.is_valid(out.row, out.col)) {
      out.has_depth = true;
      out.depth = dm.values(out.row, out.col);
    }
  } else {
    out.has_depth = sample_depth(e.view->depth, u, v, sampling_, out.depth);
  }
  return out;
}

OccState PseudoVolume::occupancy(const Point3& p) const {
  bool constrained = false;
  for (size_t i = 0; i < views_.size(); ++i) {
    const ViewProbe pr = probe(i, p);
    if (!pr.inside || !pr.has_depth) continue;  // outside, or abstaining on a masked pixel
    if (!(pr.z > pr.depth)) return OccState::kEmpty;
    constrained = true;
  }
  return constrained ? OccState::kOccupied : OccState::kUnknown;
}

bool PseudoVolume::occupied(const Point3& p) const { return collapse(occupancy(p)); }

}  // namespace occsynth
