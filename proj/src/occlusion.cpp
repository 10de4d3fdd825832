#include "occsynth/occlusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace occsynth {

Mask depth_gradient_occlusion(const DepthMap& depth, const GradientThreshold& tau) {
  const int h = depth.height(), w = depth.width();
  Grid<double> inv(h, w, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      inv(r, c) = depth.is_valid(r, c) ? 1.0 / depth.values(r, c) : 0.0;
    }
  }
  auto at = [&](int r, int c) { return inv(std::clamp(r, 0, h - 1), std::clamp(c, 0, w - 1)); };
  Mask out(h, w, 0);
  const double tau2 = tau.tau_d * tau.tau_d;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!depth.is_valid(r, c)) {
        out(r, c) = 1;
        continue;
      }
      const double gx = ((at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1)) -
                         (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1))) / 8.0;
      const double gy = ((at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1)) -
                         (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1))) / 8.0;
      out(r, c) = (gx * gx + gy * gy > tau2) ? 1 : 0;
    }
  }
  return out;
}

namespace {

// Separable min/max filter with replicate border.
Mask rank_filter(const Mask& in, int radius, bool take_max) {
  if (radius <= 0) return in;
  const int h = in.height(), w = in.width();
  Mask tmp(h, w, 0), out(h, w, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      uint8_t acc = take_max ? 0 : 1;
      for (int k = -radius; k <= radius; ++k) {
        const uint8_t v = in(r, std::clamp(c + k, 0, w - 1));
        acc = take_max ? (acc | v) : (acc & v);
      }
      tmp(r, c) = acc;
    }
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      uint8_t acc = take_max ? 0 : 1;
      for (int k = -radius; k <= radius; ++k) {
        const uint8_t v = tmp(std::clamp(r + k, 0, h - 1), c);
        acc = take_max ? (acc | v) : (acc & v);
      }
      out(r, c) = acc;
    }
  }
  return out;
}

}  // namespace

Mask morph_erode(const Mask& mask, const MorphKernel& kernel) { return rank_filter(mask, kernel.radius, false); }
Mask morph_dilate(const Mask& mask, const MorphKernel& kernel) { return rank_filter(mask, kernel.radius, true); }

Mask morph_open(const Mask& mask, const MorphKernel& kernel) {
  return morph_dilate(morph_erode(mask, kernel), kernel);
}

Mask morph_close(const Mask& mask, const MorphKernel& kernel) {
  return morph_erode(morph_dilate(mask, kernel), kernel);
}

Mask flow_occlusion(const ViewTriplet& src, const Pose& dst_pose, const Intrinsics& dst_intr,
                    double consistency_eps, const DepthMap* dst_depth) {
  const int h = dst_intr.height, w = dst_intr.width;
  const Pose src_to_dst = relative_pose(src.pose, dst_pose);
  const Pose dst_to_src = src_to_dst.inverse();

  if (dst_depth != nullptr) {
    require_same_shape(dst_depth->height(), dst_depth->width(), h, w, "flow_occlusion: destination depth size");
    Mask out(h, w, 1);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (!dst_depth->is_valid(r, c)) continue;
        const Point3 x = dst_to_src.apply(unproject({double(c), double(r)}, dst_depth->values(r, c), dst_intr));
        if (!(x.z() > 1e-9)) continue;
        const Projection p = project(x, src.intr);
        const int sc = static_cast<int>(std::floor(p.pixel.u + 0.5));
        const int sr = static_cast<int>(std::floor(p.pixel.v + 0.5));
        if (sc < 0 || sc >= src.intr.width || sr < 0 || sr >= src.intr.height || !src.depth.is_valid(sr, sc)) continue;
        const Point3 y = src_to_dst.apply(unproject({double(sc), double(sr)}, src.depth.values(sr, sc), src.intr));
        if (!(y.z() > 1e-9)) continue;
        const Projection q = project(y, dst_intr);
        const double du = q.pixel.u - c, dv = q.pixel.v - r;
        if (std::sqrt(du * du + dv * dv) <= consistency_eps) out(r, c) = 0;
      }
    }
    return out;
  }

  // Front-most splat per destination pixel.
  Grid<double> zbuf(h, w, std::numeric_limits<double>::infinity());
  Grid<int> owner(h, w, -1);
  for (int r = 0; r < src.depth.height(); ++r) {
    for (int c = 0; c < src.depth.width(); ++c) {
      if (!src.depth.is_valid(r, c)) continue;
      const Point3 x = src_to_dst.apply(unproject({double(c), double(r)}, src.depth.values(r, c), src.intr));
      if (!(x.z() > 1e-9)) continue;
      const Projection p = project(x, dst_intr);
      const int qc = static_cast<int>(std::floor(p.pixel.u + 0.5));
      const int qr = static_cast<int>(std::floor(p.pixel.v + 0.5));
      if (qc < 0 || qc >= w || qr < 0 || qr >= h) continue;
      const double du = p.pixel.u - qc, dv = p.pixel.v - qr;
      if (std::sqrt(du * du + dv * dv) > consistency_eps) continue;
      if (p.depth < zbuf(qr, qc)) {
        zbuf(qr, qc) = p.depth;
        owner(qr, qc) = r * src.depth.width() + c;
      }
    }
  }

  Mask out(h, w, 1);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (owner(r, c) < 0) continue;  // no splat: outside the source view or stretched apart
      const int sr = owner(r, c) / src.depth.width(), sc = owner(r, c) % src.depth.width();
      // Backward flow at the destination pixel center, using the splatted depth.
      const Point3 back = dst_to_src.apply(unproject({double(c), double(r)}, zbuf(r, c), dst_intr));
      if (!(back.z() > 1e-9)) continue;
      const Projection p = project(back, src.intr);
      const double du = p.pixel.u - sc, dv = p.pixel.v - sr;
      if (std::sqrt(du * du + dv * dv) <= consistency_eps) out(r, c) = 0;
    }
  }
  return out;
}

Mask fuse_occlusion(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::kDimensionMismatch, "occlusion maps differ in size");
  Mask out(a.height(), a.width(), 0);
  for (size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && b[i]) ? 1 : 0;
  return out;
}

}  // namespace occsynth
