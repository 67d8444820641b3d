#pragma once

#include <cstdint>
#include <vector>

namespace lesionforge {

// H x W x 3 image, row-major, interleaved RGB, intensities in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // size = width*height*3

    Image() = default;
    Image(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<size_t>(w) * h * 3, fill) {}

    double& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * 3 + c];
    }

    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
    bool same_shape(const Image& o) const { return width == o.width && height == o.height; }
};

// H x W boolean grid; nonzero = lesion / inpaint region.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> data;  // 0 or 1

    Mask() = default;
    Mask(int w, int h, uint8_t fill = 0)
        : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    uint8_t& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }

    size_t count() const {
        size_t n = 0;
        for (uint8_t v : data) n += (v != 0);
        return n;
    }
    bool empty_mask() const { return count() == 0; }
    bool same_shape(const Mask& o) const { return width == o.width && height == o.height; }
};

// Normalized YOLO-style box: class id + center/size as fractions of the image.
struct BBox {
    int class_id = 0;
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
};

// Separable Gaussian blur, per channel, kernel truncated at 3 sigma,
// edge-clamped. sigma <= 0 returns the input unchanged.
Image gaussian_blur(const Image& img, double sigma);

// Same blur on a single-channel plane (width*height doubles).
std::vector<double> gaussian_blur_plane(const std::vector<double>& plane, int width,
                                        int height, double sigma);

// Rec.601 luma: 0.299 R + 0.587 G + 0.114 B.
std::vector<double> to_luma(const Image& img);

// Tight axis-aligned bound of a mask's set pixels, normalized YOLO-style.
// Throws EmptyInputError on an all-false mask.
BBox tight_bbox(const Mask& mask);

double clamp01(double v);

}  // namespace lesionforge
