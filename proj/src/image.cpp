#include "lesionforge/image.hpp"

#include <algorithm>
#include <cmath>

#include "lesionforge/errors.hpp"

namespace lesionforge {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[i + radius] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

}  // namespace

std::vector<double> gaussian_blur_plane(const std::vector<double>& plane, int width,
                                        int height, double sigma) {
    if (sigma <= 0.0) return plane;
    const std::vector<double> k = gaussian_kernel(sigma);
    const int radius = static_cast<int>(k.size() / 2);

    std::vector<double> tmp(plane.size()), out(plane.size());
    // horizontal
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int xx = std::clamp(x + i, 0, width - 1);
                acc += k[i + radius] * plane[static_cast<size_t>(y) * width + xx];
            }
            tmp[static_cast<size_t>(y) * width + x] = acc;
        }
    }
    // vertical
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int yy = std::clamp(y + i, 0, height - 1);
                acc += k[i + radius] * tmp[static_cast<size_t>(yy) * width + x];
            }
            out[static_cast<size_t>(y) * width + x] = acc;
        }
    }
    return out;
}

Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0.0) return img;
    Image out(img.width, img.height);
    const size_t n = img.pixel_count();
    std::vector<double> plane(n);
    for (int c = 0; c < 3; ++c) {
        for (size_t i = 0; i < n; ++i) plane[i] = img.data[i * 3 + c];
        const std::vector<double> blurred = gaussian_blur_plane(plane, img.width, img.height, sigma);
        for (size_t i = 0; i < n; ++i) out.data[i * 3 + c] = blurred[i];
    }
    return out;
}

std::vector<double> to_luma(const Image& img) {
    std::vector<double> luma(img.pixel_count());
    for (size_t i = 0; i < luma.size(); ++i) {
        luma[i] = 0.299 * img.data[i * 3 + 0] + 0.587 * img.data[i * 3 + 1] +
                  0.114 * img.data[i * 3 + 2];
    }
    return luma;
}

BBox tight_bbox(const Mask& mask) {
    int min_x = mask.width, min_y = mask.height, max_x = -1, max_y = -1;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            min_x = std::min(min_x, x);
            min_y = std::min(min_y, y);
            max_x = std::max(max_x, x);
            max_y = std::max(max_y, y);
        }
    }
    if (max_x < 0) throw EmptyInputError("tight_bbox on empty mask");
    BBox box;
    box.class_id = 0;
    box.w = static_cast<double>(max_x - min_x + 1) / mask.width;
    box.h = static_cast<double>(max_y - min_y + 1) / mask.height;
    box.cx = (min_x + max_x + 1) / 2.0 / mask.width;
    box.cy = (min_y + max_y + 1) / 2.0 / mask.height;
    return box;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace lesionforge
