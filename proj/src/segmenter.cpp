#include "lesionforge/segmenter.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <vector>

namespace lesionforge::segmenter {

namespace {

// row-major neighbor enumeration (dy before dx)
constexpr std::array<std::array<int, 2>, 8> kNeighbors8 = {{{-1, -1},
                                                            {0, -1},
                                                            {1, -1},
                                                            {-1, 0},
                                                            {1, 0},
                                                            {-1, 1},
                                                            {0, 1},
                                                            {1, 1}}};
constexpr std::array<std::array<int, 2>, 4> kNeighbors4 = {{{0, -1}, {-1, 0}, {1, 0}, {0, 1}}};

// connected components, 8-connectivity, first-seen order
std::vector<int> label_components(const Mask& mask, int& n_components) {
    std::vector<int> labels(mask.data.size(), -1);
    n_components = 0;
    std::deque<size_t> queue;
    for (size_t start = 0; start < mask.data.size(); ++start) {
        if (!mask.data[start] || labels[start] >= 0) continue;
        const int label = n_components++;
        labels[start] = label;
        queue.clear();
        queue.push_back(start);
        while (!queue.empty()) {
            const size_t i = queue.front();
            queue.pop_front();
            const int x = static_cast<int>(i % mask.width);
            const int y = static_cast<int>(i / mask.width);
            for (const auto& d : kNeighbors8) {
                const int nx = x + d[0], ny = y + d[1];
                if (nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height) continue;
                const size_t ni = static_cast<size_t>(ny) * mask.width + nx;
                if (mask.data[ni] && labels[ni] < 0) {
                    labels[ni] = label;
                    queue.push_back(ni);
                }
            }
        }
    }
    return labels;
}

}  // namespace

void GrowParams::validate() const {
    if (color_tolerance <= 0.0) throw ConfigError("grow: color_tolerance must be > 0");
    if (connectivity != 4 && connectivity != 8) throw ConfigError("grow: connectivity must be 4 or 8");
    if (!(max_region_fraction > 0.0) || max_region_fraction > 1.0)
        throw ConfigError("grow: max_region_fraction must lie in (0, 1]");
    if (smoothing_radius < 0.0) throw ConfigError("grow: negative smoothing_radius");
}

PixelPoint bbox_center(const BBox& box, int width, int height) {
    PixelPoint p;
    p.x = std::clamp(static_cast<int>(std::floor(box.cx * width)), 0, width - 1);
    p.y = std::clamp(static_cast<int>(std::floor(box.cy * height)), 0, height - 1);
    return p;
}

Mask grow_region(const Image& image, PixelPoint seed, const GrowParams& params) {
    params.validate();
    if (seed.x < 0 || seed.y < 0 || seed.x >= image.width || seed.y >= image.height)
        throw ShapeError("grow: seed outside image");

    const Image smoothed = gaussian_blur(image, params.smoothing_radius);
    const size_t max_pixels = std::max<size_t>(
        1, static_cast<size_t>(params.max_region_fraction * image.pixel_count()));

    Mask mask(image.width, image.height);
    std::vector<uint8_t> visited(image.pixel_count(), 0);
    std::deque<size_t> queue;

    std::array<double, 3> mean_sum{};
    size_t accepted = 0;

    auto accept = [&](size_t i) {
        mask.data[i] = 1;
        for (int c = 0; c < 3; ++c) mean_sum[c] += smoothed.data[i * 3 + c];
        ++accepted;
        queue.push_back(i);
    };

    const size_t seed_index = static_cast<size_t>(seed.y) * image.width + seed.x;
    visited[seed_index] = 1;
    accept(seed_index);

    while (!queue.empty()) {
        if (accepted > max_pixels)
            throw RegionOverflowError(mask, "region exceeded max_region_fraction");
        const size_t i = queue.front();
        queue.pop_front();
        const int x = static_cast<int>(i % image.width);
        const int y = static_cast<int>(i / image.width);

        auto try_neighbor = [&](int nx, int ny) {
            if (nx < 0 || ny < 0 || nx >= image.width || ny >= image.height) return;
            const size_t ni = static_cast<size_t>(ny) * image.width + nx;
            if (visited[ni]) return;
            visited[ni] = 1;
            double d2 = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double diff = smoothed.data[ni * 3 + c] - mean_sum[c] / accepted;
                d2 += diff * diff;
            }
            if (d2 <= params.color_tolerance * params.color_tolerance) accept(ni);
        };

        if (params.connectivity == 8) {
            for (const auto& d : kNeighbors8) try_neighbor(x + d[0], y + d[1]);
        } else {
            for (const auto& d : kNeighbors4) try_neighbor(x + d[0], y + d[1]);
        }
    }
    return mask;
}

Mask refine_mask(const Mask& mask) {
    if (mask.empty_mask()) throw EmptyInputError("refine_mask on empty mask");

    int n_components = 0;
    const std::vector<int> labels = label_components(mask, n_components);

    std::vector<size_t> sizes(static_cast<size_t>(n_components), 0);
    for (int l : labels)
        if (l >= 0) ++sizes[static_cast<size_t>(l)];
    // ties resolve to the earliest-seen component
    int best = 0;
    for (int l = 1; l < n_components; ++l)
        if (sizes[static_cast<size_t>(l)] > sizes[static_cast<size_t>(best)]) best = l;

    Mask largest(mask.width, mask.height);
    for (size_t i = 0; i < labels.size(); ++i) largest.data[i] = (labels[i] == best) ? 1 : 0;

    // fill holes: background reachable from the border (4-connectivity over
    // the complement) stays background, everything else is enclosed
    std::vector<uint8_t> outside(largest.data.size(), 0);
    std::deque<size_t> queue;
    auto push_if_bg = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= largest.width || y >= largest.height) return;
        const size_t i = static_cast<size_t>(y) * largest.width + x;
        if (!largest.data[i] && !outside[i]) {
            outside[i] = 1;
            queue.push_back(i);
        }
    };
    for (int x = 0; x < largest.width; ++x) {
        push_if_bg(x, 0);
        push_if_bg(x, largest.height - 1);
    }
    for (int y = 0; y < largest.height; ++y) {
        push_if_bg(0, y);
        push_if_bg(largest.width - 1, y);
    }
    while (!queue.empty()) {
        const size_t i = queue.front();
        queue.pop_front();
        const int x = static_cast<int>(i % largest.width);
        const int y = static_cast<int>(i / largest.width);
        push_if_bg(x - 1, y);
        push_if_bg(x + 1, y);
        push_if_bg(x, y - 1);
        push_if_bg(x, y + 1);
    }

    Mask out(largest.width, largest.height);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = outside[i] ? 0 : 1;
    return out;
}

double mask_iou(const Mask& a, const Mask& b) {
    if (!a.same_shape(b)) throw ShapeError("mask_iou: shape mismatch");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const bool va = a.data[i] != 0, vb = b.data[i] != 0;
        inter += (va && vb);
        uni += (va || vb);
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace lesionforge::segmenter
