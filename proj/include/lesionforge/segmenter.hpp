#pragma once

#include "lesionforge/errors.hpp"
#include "lesionforge/image.hpp"

namespace lesionforge::segmenter {

struct PixelPoint {
    int x = 0;
    int y = 0;
};

struct GrowParams {
    double color_tolerance = 0.12;   // max RGB distance to the region's running mean
    int connectivity = 8;            // 4 or 8
    double max_region_fraction = 0.5;
    double smoothing_radius = 1.0;   // Gaussian pre-blur, px

    void validate() const;
};

// Thrown when region growing exceeds max_region_fraction; carries the
// partial mask accumulated so far.
class RegionOverflowError : public Error {
public:
    RegionOverflowError(Mask partial, const std::string& detail)
        : Error("overflow", detail), partial_mask(std::move(partial)) {}
    Mask partial_mask;
};

// (floor(cx*W), floor(cy*H)), clamped into the image.
PixelPoint bbox_center(const BBox& box, int width, int height);

// Breadth-first growth from `seed` over the pre-smoothed image. A frontier
// pixel joins when its Euclidean RGB distance to the running mean of the
// accepted region is <= color_tolerance. FIFO queue, row-major neighbor
// order, so the result is deterministic.
Mask grow_region(const Image& image, PixelPoint seed, const GrowParams& params);

// Largest connected component (8-connectivity) + enclosed-hole fill. Idempotent.
Mask refine_mask(const Mask& mask);

// |a AND b| / |a OR b|; 1.0 when both masks are empty.
double mask_iou(const Mask& a, const Mask& b);

}  // namespace lesionforge::segmenter
