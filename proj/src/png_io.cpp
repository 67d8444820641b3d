#include "lesionforge/png_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "lesionforge/errors.hpp"

namespace lesionforge {

namespace {

constexpr uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32_be(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& data) {
    put_u32_be(out, static_cast<uint32_t>(data.size()));
    const size_t type_pos = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + type_pos, static_cast<uInt>(4 + data.size()));
    put_u32_be(out, static_cast<uint32_t>(crc));
}

void write_png(const std::filesystem::path& path, int width, int height, int channels,
               const std::vector<uint8_t>& pixels) {
    if (width <= 0 || height <= 0)
        throw IoError("png write: bad dimensions for " + path.string());
    const size_t stride = static_cast<size_t>(width) * channels;
    if (pixels.size() != stride * height)
        throw IoError("png write: pixel buffer size mismatch for " + path.string());

    // raw scanlines, filter byte 0 per row
    std::vector<uint8_t> raw((stride + 1) * height);
    for (int y = 0; y < height; ++y) {
        raw[(stride + 1) * y] = 0;
        std::memcpy(raw.data() + (stride + 1) * y + 1, pixels.data() + stride * y, stride);
    }

    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw IoError("png write: deflate failed for " + path.string());
    comp.resize(comp_len);

    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(width));
    put_u32_be(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);                                      // bit depth
    ihdr.push_back(channels == 3 ? 2 : 0);                  // color type
    ihdr.push_back(0);                                      // compression
    ihdr.push_back(0);                                      // filter method
    ihdr.push_back(0);                                      // interlace

    std::vector<uint8_t> out;
    out.insert(out.end(), kSignature, kSignature + 8);
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", comp);
    append_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + path.string());
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

struct DecodedPng {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 or 3
    std::vector<uint8_t> pixels;
};

DecodedPng read_png(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0)
        throw IoError("not a PNG file: " + path.string());

    DecodedPng png;
    int bit_depth = 0, color_type = -1;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 12 <= bytes.size()) {
        const uint32_t len = get_u32_be(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw IoError("truncated PNG: " + path.string());
        const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
        const uint8_t* data = bytes.data() + pos + 8;
        const uint32_t stored_crc = get_u32_be(bytes.data() + pos + 8 + len);
        uLong crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, bytes.data() + pos + 4, 4 + len);
        if (static_cast<uint32_t>(crc) != stored_crc)
            throw IoError("PNG CRC mismatch: " + path.string());

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw IoError("bad IHDR: " + path.string());
            png.width = static_cast<int>(get_u32_be(data));
            png.height = static_cast<int>(get_u32_be(data + 4));
            bit_depth = data[8];
            color_type = data[9];
            if (data[12] != 0) throw IoError("interlaced PNG unsupported: " + path.string());
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }

    if (bit_depth != 8 || (color_type != 0 && color_type != 2))
        throw IoError("unsupported PNG format (need 8-bit gray or RGB): " + path.string());
    png.channels = (color_type == 2) ? 3 : 1;

    const size_t stride = static_cast<size_t>(png.width) * png.channels;
    std::vector<uint8_t> raw((stride + 1) * png.height);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw IoError("PNG inflate failed: " + path.string());

    // unfilter
    png.pixels.assign(stride * png.height, 0);
    const int bpp = png.channels;
    for (int y = 0; y < png.height; ++y) {
        const uint8_t filter = raw[(stride + 1) * y];
        const uint8_t* src = raw.data() + (stride + 1) * y + 1;
        uint8_t* cur = png.pixels.data() + stride * y;
        const uint8_t* up = (y > 0) ? png.pixels.data() + stride * (y - 1) : nullptr;
        for (size_t i = 0; i < stride; ++i) {
            const int a = (i >= static_cast<size_t>(bpp)) ? cur[i - bpp] : 0;
            const int b = up ? up[i] : 0;
            const int c = (up && i >= static_cast<size_t>(bpp)) ? up[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw IoError("bad PNG filter type: " + path.string());
            }
            cur[i] = static_cast<uint8_t>(v & 0xff);
        }
    }
    return png;
}

}  // namespace

std::vector<uint8_t> quantize_rgb8(const Image& img) {
    std::vector<uint8_t> out(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        const double v = std::clamp(img.data[i], 0.0, 1.0);
        out[i] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

void write_png_rgb8(const std::filesystem::path& path, const Image& img) {
    write_png(path, img.width, img.height, 3, quantize_rgb8(img));
}

void write_png_rgb8_raw(const std::filesystem::path& path, int width, int height,
                        const std::vector<uint8_t>& rgb) {
    write_png(path, width, height, 3, rgb);
}

void write_png_gray8(const std::filesystem::path& path, const Mask& mask) {
    std::vector<uint8_t> gray(mask.data.size());
    for (size_t i = 0; i < mask.data.size(); ++i) gray[i] = mask.data[i] ? 255 : 0;
    write_png(path, mask.width, mask.height, 1, gray);
}

Image read_png_rgb(const std::filesystem::path& path) {
    const DecodedPng png = read_png(path);
    Image img(png.width, png.height);
    const size_t n = img.pixel_count();
    for (size_t i = 0; i < n; ++i) {
        if (png.channels == 3) {
            img.data[i * 3 + 0] = png.pixels[i * 3 + 0] / 255.0;
            img.data[i * 3 + 1] = png.pixels[i * 3 + 1] / 255.0;
            img.data[i * 3 + 2] = png.pixels[i * 3 + 2] / 255.0;
        } else {
            const double v = png.pixels[i] / 255.0;
            img.data[i * 3 + 0] = img.data[i * 3 + 1] = img.data[i * 3 + 2] = v;
        }
    }
    return img;
}

Mask read_png_mask(const std::filesystem::path& path) {
    const DecodedPng png = read_png(path);
    Mask mask(png.width, png.height);
    const size_t n = static_cast<size_t>(png.width) * png.height;
    for (size_t i = 0; i < n; ++i) {
        const uint8_t v = (png.channels == 3) ? png.pixels[i * 3] : png.pixels[i];
        mask.data[i] = (v >= 128) ? 1 : 0;
    }
    return mask;
}

}  // namespace lesionforge
