#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lesionforge/phantom.hpp"
#include "lesionforge/segmenter.hpp"
#include "test_util.hpp"

using namespace lesionforge;
using segmenter::GrowParams;
using segmenter::PixelPoint;

namespace {

Image uniform_image(int size, double r, double g, double b) {
    Image img(size, size);
    for (size_t i = 0; i < img.pixel_count(); ++i) {
        img.data[i * 3 + 0] = r;
        img.data[i * 3 + 1] = g;
        img.data[i * 3 + 2] = b;
    }
    return img;
}

Image two_tone(int size, double left, double right) {
    Image img(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double v = x < size / 2 ? left : right;
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = v;
        }
    return img;
}

phantom::PhantomConfig lesion_config() {
    phantom::PhantomConfig cfg;
    cfg.image_size = 64;
    cfg.lesion_count_range = {1, 1};
    return cfg;
}

}  // namespace

TEST_CASE("bbox_center arithmetic and clamping") {
    BBox b;
    b.cx = 0.5;
    b.cy = 0.5;
    b.w = 0.2;
    b.h = 0.2;
    const PixelPoint p = segmenter::bbox_center(b, 640, 640);
    CHECK(p.x == 320);
    CHECK(p.y == 320);

    b.cx = 1.0;
    b.cy = 1.0;
    const PixelPoint q = segmenter::bbox_center(b, 64, 64);
    CHECK(q.x == 63);
    CHECK(q.y == 63);
}

TEST_CASE("bbox_center lands inside the denormalized box") {
    Rng rng(31);
    for (int trial = 0; trial < 1000; ++trial) {
        const int w = static_cast<int>(rng.uniform_int(8, 512));
        const int h = static_cast<int>(rng.uniform_int(8, 512));
        BBox b;
        b.w = rng.uniform(2.0 / w, 1.0);
        b.h = rng.uniform(2.0 / h, 1.0);
        b.cx = rng.uniform(b.w / 2, 1.0 - b.w / 2);
        b.cy = rng.uniform(b.h / 2, 1.0 - b.h / 2);
        const PixelPoint p = segmenter::bbox_center(b, w, h);
        CHECK(p.x >= (b.cx - b.w / 2) * w - 1e-9);
        CHECK(p.x <= (b.cx + b.w / 2) * w + 1e-9);
        CHECK(p.y >= (b.cy - b.h / 2) * h - 1e-9);
        CHECK(p.y <= (b.cy + b.h / 2) * h + 1e-9);
    }
}

TEST_CASE("uniform image with full budget grows to the whole frame") {
    const Image img = uniform_image(16, 0.4, 0.4, 0.4);
    GrowParams params;
    params.max_region_fraction = 1.0;
    params.smoothing_radius = 0.0;
    const Mask m = segmenter::grow_region(img, {8, 8}, params);
    CHECK(m.count() == img.pixel_count());
}

TEST_CASE("two-tone image grows exactly the seeded half") {
    const Image img = two_tone(16, 0.2, 0.8);
    GrowParams params;
    params.color_tolerance = 0.1;
    params.max_region_fraction = 1.0;
    params.smoothing_radius = 0.0;  // closed-form case needs the raw image
    const Mask m = segmenter::grow_region(img, {3, 8}, params);
    CHECK(m.count() == img.pixel_count() / 2);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) CHECK(m.at(x, y) == (x < 8 ? 1 : 0));
}

TEST_CASE("overflow carries the partial mask and keeps the seed") {
    const Image img = uniform_image(16, 0.5, 0.5, 0.5);
    GrowParams params;
    params.max_region_fraction = 0.25;
    params.smoothing_radius = 0.0;
    try {
        segmenter::grow_region(img, {8, 8}, params);
        FAIL("expected RegionOverflowError");
    } catch (const segmenter::RegionOverflowError& e) {
        CHECK(e.partial_mask.count() > 0);
        CHECK(e.partial_mask.at(8, 8) == 1);
    }
}

TEST_CASE("grown mask contains the seed and matches the phantom lesion") {
    const auto cfg = lesion_config();
    double iou_sum = 0.0;
    int n = 0;
    for (uint64_t seed = 0; seed < 8; ++seed) {
        const auto s = phantom::render_phantom(cfg, seed, true, "x");
        const PixelPoint p = segmenter::bbox_center(s.boxes[0], 64, 64);
        const Mask grown = segmenter::grow_region(s.image, p, GrowParams{});
        CHECK(grown.at(p.x, p.y) == 1);
        const Mask refined = segmenter::refine_mask(grown);
        CHECK(refined.at(p.x, p.y) == 1);
        iou_sum += segmenter::mask_iou(refined, s.masks[0]);
        ++n;
    }
    CHECK(iou_sum / n >= 0.7);
}

TEST_CASE("raising the tolerance never shrinks the region") {
    const auto cfg = lesion_config();
    for (uint64_t seed = 0; seed < 6; ++seed) {
        const auto s = phantom::render_phantom(cfg, seed, true, "x");
        const PixelPoint p = segmenter::bbox_center(s.boxes[0], 64, 64);
        GrowParams lo, mid, hi;
        lo.color_tolerance = 0.08;
        mid.color_tolerance = 0.12;
        hi.color_tolerance = 0.20;
        const Mask m_lo = segmenter::grow_region(s.image, p, lo);
        const Mask m_mid = segmenter::grow_region(s.image, p, mid);
        const Mask m_hi = segmenter::grow_region(s.image, p, hi);
        for (size_t i = 0; i < m_lo.data.size(); ++i) {
            if (m_lo.data[i]) CHECK(m_mid.data[i]);
            if (m_mid.data[i]) CHECK(m_hi.data[i]);
        }
    }
}

TEST_CASE("refine_mask keeps solid blobs unchanged") {
    Mask m(16, 16);
    for (int y = 4; y < 10; ++y)
        for (int x = 3; x < 9; ++x) m.at(x, y) = 1;
    CHECK(segmenter::refine_mask(m).data == m.data);
}

TEST_CASE("refine_mask fills an interior hole") {
    Mask m(16, 16);
    for (int y = 4; y < 10; ++y)
        for (int x = 3; x < 9; ++x) m.at(x, y) = 1;
    m.at(5, 6) = 0;
    const Mask r = segmenter::refine_mask(m);
    CHECK(r.at(5, 6) == 1);
    CHECK(r.count() == 36);
}

TEST_CASE("refine_mask keeps only the largest component") {
    Mask m(32, 32);
    for (int y = 2; y < 12; ++y)
        for (int x = 2; x < 12; ++x) m.at(x, y) = 1;  // 100 px
    for (int x = 20; x < 25; ++x) m.at(x, 20) = 1;    // 5 px
    const Mask r = segmenter::refine_mask(m);
    CHECK(r.count() == 100);
    CHECK(r.at(22, 20) == 0);
    CHECK(r.at(5, 5) == 1);
}

TEST_CASE("refine_mask is idempotent on grown regions") {
    const auto s = phantom::render_phantom(lesion_config(), 12, true, "x");
    const PixelPoint p = segmenter::bbox_center(s.boxes[0], 64, 64);
    const Mask grown = segmenter::grow_region(s.image, p, GrowParams{});
    const Mask once = segmenter::refine_mask(grown);
    const Mask twice = segmenter::refine_mask(once);
    CHECK(once.data == twice.data);
}

TEST_CASE("refine_mask rejects empty input") {
    CHECK_THROWS_AS(segmenter::refine_mask(Mask(8, 8)), EmptyInputError);
}

TEST_CASE("mask_iou basics") {
    Mask a(20, 20), b(20, 20);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) a.at(x, y) = 1;

    SUBCASE("identical masks") { CHECK(segmenter::mask_iou(a, a) == 1.0); }
    SUBCASE("both empty") { CHECK(segmenter::mask_iou(Mask(4, 4), Mask(4, 4)) == 1.0); }
    SUBCASE("disjoint") {
        for (int y = 12; y < 15; ++y) b.at(15, y) = 1;
        CHECK(segmenter::mask_iou(a, b) == 0.0);
    }
    SUBCASE("shifted square overlaps one third") {
        for (int y = 0; y < 10; ++y)
            for (int x = 5; x < 15; ++x) b.at(x, y) = 1;
        CHECK(segmenter::mask_iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(segmenter::mask_iou(a, Mask(10, 10)), ShapeError);
    }
}

TEST_CASE("grow rejects a seed outside the image") {
    const Image img = uniform_image(8, 0.5, 0.5, 0.5);
    CHECK_THROWS_AS(segmenter::grow_region(img, {8, 0}, GrowParams{}), ShapeError);
}
