#pragma once

#include "occsynth/grid.hpp"
#include "occsynth/pseudovol.hpp"

namespace occsynth {

struct GradientThreshold {
  // Threshold on the inverse-depth gradient magnitude, 1/m per pixel.
  double tau_d = 0.015;
};

struct MorphKernel {
  int radius = 1;  // square (2r+1)^2 structuring element
};

// Normalized 3x3 Sobel (1/8) on inverse depth, replicate border; invalid pixels are
// treated as infinitely far and are always marked.
Mask depth_gradient_occlusion(const DepthMap& depth, const GradientThreshold& tau);

Mask morph_erode(const Mask& mask, const MorphKernel& kernel);
Mask morph_dilate(const Mask& mask, const MorphKernel& kernel);
Mask morph_open(const Mask& mask, const MorphKernel& kernel);
Mask morph_close(const Mask& mask, const MorphKernel& kernel);

// Geometric stand-in for two-way optical flow: forward-splat the source into the
// destination view and keep destination pixels that receive a front-most splat
// within eps pixels whose backward mapping returns within eps of its origin.
// With `dst_depth` the backward flow comes from the destination's own geometry:
// pixels whose surface projects outside the source image are occluded, and the rest
// must map to a source pixel whose forward flow returns within eps.
Mask flow_occlusion(const ViewTriplet& src, const Pose& dst_pose, const Intrinsics& dst_intr,
                    double consistency_eps = 1.0, const DepthMap* dst_depth = nullptr);

// Conservative fusion: occluded only where both strategies agree.
Mask fuse_occlusion(const Mask& a, const Mask& b);

}  // namespace occsynth
