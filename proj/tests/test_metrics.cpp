#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "lesionforge/evaluator.hpp"
#include "lesionforge/metrics.hpp"
#include "lesionforge/phantom.hpp"
#include "test_util.hpp"

using namespace lesionforge;
using namespace lesionforge::metrics;

namespace {

Image constant_image(int size, double v) {
    Image img(size, size);
    for (double& d : img.data) d = v;
    return img;
}

Image random_image(int size, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Image img(size, size);
    for (double& d : img.data) d = rng.uniform(lo, hi);
    return img;
}

// untrained but deterministic feature extractor over a 32 px classifier
struct FxFixture {
    evaluator::Classifier classifier;
    FeatureExtractor fx;

    explicit FxFixture(int size = 32) : classifier(size, 2024) {
        fx.network = &classifier.network();
        fx.perceptual_taps = {evaluator::Classifier::kBlock1Tap,
                              evaluator::Classifier::kBlock2Tap,
                              evaluator::Classifier::kFinalConvTap};
        fx.pooled_tap = evaluator::Classifier::kPooledTap;
        fx.feature_dim = evaluator::Classifier::kFeatureDim;
        fx.input_size = size;
        fx.checkpoint_id = "test-fixture";
    }
};

}  // namespace

TEST_CASE("psnr identities and closed form") {
    Rng rng(1);
    const Image a = random_image(16, rng, 0.1, 0.8);

    SUBCASE("identical images give the +inf sentinel") {
        CHECK(std::isinf(psnr(a, a)));
        CHECK(psnr(a, a) > 0);
    }
    SUBCASE("uniform +0.1 offset gives exactly 20 dB") {
        Image b = a;
        for (double& v : b.data) v += 0.1;  // no clipping: values stay inside [0,0.9]
        CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-9));
    }
    SUBCASE("all-true region equals the full-image psnr") {
        Image b = a;
        b.data[5] += 0.2;
        const Mask all(16, 16, 1);
        CHECK(psnr(a, b, &all) == psnr(a, b));
    }
    SUBCASE("masked psnr uses only the region") {
        Image b = a;
        b.at(3, 3, 0) += 0.5;  // damage outside the region
        Mask region(16, 16);
        for (int y = 8; y < 12; ++y)
            for (int x = 8; x < 12; ++x) region.at(x, y) = 1;
        CHECK(std::isinf(psnr(a, b, &region)));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(psnr(a, constant_image(8, 0.5)), ShapeError);
        const Mask empty(16, 16);
        CHECK_THROWS_AS(psnr(a, a, &empty), EmptyInputError);
    }
}

TEST_CASE("ssim identities, closed form and symmetry") {
    Rng rng(2);
    const Image a = random_image(32, rng);

    SUBCASE("identical images score exactly 1") { CHECK(ssim(a, a) == 1.0); }
    SUBCASE("constant 0.2 vs 0.8 reproduces the luminance-only value") {
        // (2*0.16 + 1e-4) / (0.04 + 0.64 + 1e-4) = 0.47066...
        const Image x = constant_image(16, 0.2);
        const Image y = constant_image(16, 0.8);
        CHECK(ssim(x, y) == doctest::Approx(0.4707).epsilon(1e-4));
        CHECK(ssim(x, y) == doctest::Approx((0.32 + 1e-4) / (0.68 + 1e-4)).epsilon(1e-9));
    }
    SUBCASE("symmetric in its arguments") {
        for (int trial = 0; trial < 100; ++trial) {
            const Image x = random_image(16, rng);
            const Image y = random_image(16, rng);
            CHECK(ssim(x, y) == ssim(y, x));
        }
    }
    SUBCASE("value stays inside [-1, 1]") {
        for (int trial = 0; trial < 20; ++trial) {
            const Image x = random_image(16, rng);
            const Image y = random_image(16, rng);
            const double s = ssim(x, y);
            CHECK(s >= -1.0);
            CHECK(s <= 1.0);
        }
    }
    SUBCASE("image smaller than the window is rejected") {
        const Image tiny = constant_image(8, 0.5);
        CHECK_THROWS_AS(ssim(tiny, tiny), ShapeError);
    }
    SUBCASE("masked variant averages only windows centered in the region") {
        Image b = a;
        b.at(2, 2, 0) = 0.0;  // corrupt a border corner
        Mask region(32, 32);
        for (int y = 14; y < 18; ++y)
            for (int x = 14; x < 18; ++x) region.at(x, y) = 1;
        CHECK(ssim(a, b, &region) == 1.0);  // corruption is outside every counted window
        const Mask empty(32, 32);
        CHECK_THROWS_AS(ssim(a, b, &empty), EmptyInputError);
    }
}

TEST_CASE("perceptual distance identities") {
    FxFixture f;
    Rng rng(3);
    const Image a = random_image(32, rng);
    const Image b = random_image(32, rng);

    CHECK(perceptual_distance(a, a, f.fx) == 0.0);
    CHECK(perceptual_distance(a, b, f.fx) >= 0.0);

    SUBCASE("interpolation toward the target does not overshoot (soft property)") {
        int hold = 0;
        const int trials = 200;
        for (int i = 0; i < trials; ++i) {
            const Image x = random_image(32, rng);
            const Image y = random_image(32, rng);
            Image mid(32, 32);
            for (size_t k = 0; k < mid.data.size(); ++k)
                mid.data[k] = 0.5 * (x.data[k] + y.data[k]);
            if (perceptual_distance(x, mid, f.fx) <= perceptual_distance(x, y, f.fx)) ++hold;
        }
        CHECK(hold >= static_cast<int>(0.95 * trials));
    }
}

TEST_CASE("frechet distance closed forms") {
    SUBCASE("identical parameters give zero") {
        Eigen::VectorXd mu(3);
        mu << 0.3, -1.0, 2.0;
        Eigen::MatrixXd c(3, 3);
        c << 2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.9;
        CHECK(frechet_distance(mu, c, mu, c) == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("1-d gaussians: squared mean gap plus squared sigma gap") {
        Eigen::VectorXd m1(1), m2(1);
        Eigen::MatrixXd c1(1, 1), c2(1, 1);
        m1 << 0.0;
        m2 << 1.0;
        c1 << 0.0;
        c2 << 0.0;
        CHECK(frechet_distance(m1, c1, m2, c2) == doctest::Approx(1.0).epsilon(1e-9));

        Rng rng(4);
        for (int trial = 0; trial < 50; ++trial) {
            const double mu_a = rng.uniform(-2, 2), mu_b = rng.uniform(-2, 2);
            const double s_a = rng.uniform(0.1, 2), s_b = rng.uniform(0.1, 2);
            m1 << mu_a;
            m2 << mu_b;
            c1 << s_a * s_a;
            c2 << s_b * s_b;
            const double expected = (mu_a - mu_b) * (mu_a - mu_b) + (s_a - s_b) * (s_a - s_b);
            CHECK(frechet_distance(m1, c1, m2, c2) == doctest::Approx(expected).epsilon(1e-9));
        }
    }
    SUBCASE("diagonal covariances have a closed form") {
        Rng rng(5);
        const int d = 6;
        for (int trial = 0; trial < 50; ++trial) {
            Eigen::VectorXd m1(d), m2(d);
            Eigen::MatrixXd c1 = Eigen::MatrixXd::Zero(d, d), c2 = Eigen::MatrixXd::Zero(d, d);
            double expected = 0.0;
            for (int i = 0; i < d; ++i) {
                m1[i] = rng.uniform(-1, 1);
                m2[i] = rng.uniform(-1, 1);
                const double v1 = rng.uniform(0.05, 3), v2 = rng.uniform(0.05, 3);
                c1(i, i) = v1;
                c2(i, i) = v2;
                expected += (m1[i] - m2[i]) * (m1[i] - m2[i]) +
                            (std::sqrt(v1) - std::sqrt(v2)) * (std::sqrt(v1) - std::sqrt(v2));
            }
            CHECK(frechet_distance(m1, c1, m2, c2) == doctest::Approx(expected).epsilon(1e-6));
        }
    }
    SUBCASE("symmetric in its arguments") {
        Rng rng(6);
        const int d = 4;
        Eigen::MatrixXd a = Eigen::MatrixXd::Random(d, d), b = Eigen::MatrixXd::Random(d, d);
        const Eigen::MatrixXd c1 = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
        const Eigen::MatrixXd c2 = b * b.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
        const Eigen::VectorXd m1 = Eigen::VectorXd::Random(d), m2 = Eigen::VectorXd::Random(d);
        CHECK(frechet_distance(m1, c1, m2, c2) ==
              doctest::Approx(frechet_distance(m2, c2, m1, c1)).epsilon(1e-9));
    }
    SUBCASE("rejects bad input") {
        Eigen::VectorXd m1(2), m2(3);
        Eigen::MatrixXd c1 = Eigen::MatrixXd::Identity(2, 2), c2 = Eigen::MatrixXd::Identity(3, 3);
        CHECK_THROWS_AS(frechet_distance(m1, c1, m2, c2), ShapeError);
        Eigen::VectorXd bad(2);
        bad << std::numeric_limits<double>::quiet_NaN(), 0.0;
        CHECK_THROWS_AS(frechet_distance(bad, c1, m1, c1), NumericError);
    }
}

TEST_CASE("fid: identity, perturbation ordering and the sampling oracle") {
    SUBCASE("fid(X, X) is numerically zero") {
        Rng rng(7);
        std::vector<std::vector<double>> feats;
        for (int i = 0; i < 40; ++i) {
            std::vector<double> f(8);
            for (double& v : f) v = rng.normal();
            feats.push_back(f);
        }
        CHECK(fid_from_features(feats, feats) < 1e-6);
    }
    SUBCASE("replacing one image with noise strictly increases fid") {
        FxFixture f;
        phantom::PhantomConfig pc;
        pc.n_normal = 0;
        pc.n_lesion = 10;
        pc.image_size = 32;
        pc.lesion_count_range = {1, 1};
        pc.lesion_radius_range = {0.10, 0.16};
        pc.seed = 8;
        const auto ds = phantom::generate_dataset(pc);
        std::vector<Image> x;
        for (const auto& s : ds.samples) x.push_back(s.image);
        std::vector<Image> y = x;
        Rng rng(9);
        y[0] = random_image(32, rng);
        const double base = fid(x, x, f.fx);
        const double moved = fid(x, y, f.fx);
        CHECK(base < 1e-6);
        CHECK(moved > base);
    }
    SUBCASE("sampled gaussian features reproduce the closed-form distance within 5%") {
        const int d = 8, n = 10000;
        Rng rng(10);
        auto random_gaussian = [&](Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
            mu = Eigen::VectorXd::Zero(d);
            for (int i = 0; i < d; ++i) mu[i] = rng.uniform(-1, 1);
            Eigen::MatrixXd a(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) a(i, j) = rng.normal() / std::sqrt(double(d));
            cov = a * a.transpose() + 0.25 * Eigen::MatrixXd::Identity(d, d);
        };
        Eigen::VectorXd mu1, mu2;
        Eigen::MatrixXd c1, c2;
        random_gaussian(mu1, c1);
        random_gaussian(mu2, c2);

        auto sample_set = [&](const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov) {
            const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
            std::vector<std::vector<double>> out;
            out.reserve(n);
            Eigen::VectorXd z(d);
            for (int i = 0; i < n; ++i) {
                for (int k = 0; k < d; ++k) z[k] = rng.normal();
                const Eigen::VectorXd x = mu + chol * z;
                out.emplace_back(x.data(), x.data() + d);
            }
            return out;
        };
        const double truth = frechet_distance(mu1, c1, mu2, c2);
        const double estimated = fid_from_features(sample_set(mu1, c1), sample_set(mu2, c2));
        CHECK(std::abs(estimated - truth) <= 0.05 * truth);
    }
    SUBCASE("empty sets are rejected") {
        CHECK_THROWS_AS(fid_from_features({}, {}), EmptyInputError);
    }
}

TEST_CASE("pairwise summation is exact on integer-valued data") {
    std::vector<double> v(1000);
    for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % 17);
    double plain = 0.0;
    for (double x : v) plain += x;
    CHECK(pairwise_sum(v) == plain);
    CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
}

TEST_CASE("paired report aggregates and serializes the table quantities") {
    FxFixture f;
    phantom::PhantomConfig pc;
    pc.n_normal = 0;
    pc.n_lesion = 6;
    pc.image_size = 32;
    pc.lesion_count_range = {1, 1};
    pc.lesion_radius_range = {0.10, 0.16};
    pc.seed = 12;
    const auto ds = phantom::generate_dataset(pc);

    std::vector<Image> synth;
    std::vector<const Image*> originals, synths;
    std::vector<const Mask*> masks;
    std::vector<Image> fid_ref;
    Rng rng(13);
    synth.reserve(ds.samples.size());
    for (const auto& s : ds.samples) {
        Image noisy = s.image;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (s.masks[0].at(x, y))
                    for (int c = 0; c < 3; ++c)
                        noisy.at(x, y, c) = clamp01(noisy.at(x, y, c) + rng.normal(0, 0.1));
        synth.push_back(std::move(noisy));
        fid_ref.push_back(s.image);
    }
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        originals.push_back(&ds.samples[i].image);
        synths.push_back(&synth[i]);
        masks.push_back(&ds.samples[i].masks[0]);
    }

    const MetricReport r = compute_report(originals, synths, masks, fid_ref, f.fx);
    CHECK(r.n_pairs == 6);
    CHECK(r.ssim_score > 0.5);
    CHECK(r.ssim_score <= 1.0);
    CHECK(std::isfinite(r.psnr_db));
    CHECK(std::isfinite(r.psnr_mask_db));
    CHECK(r.psnr_mask_db < r.psnr_db);  // damage concentrates inside the mask
    CHECK(r.perc >= 0.0);
    CHECK(r.fid_score >= 0.0);
    CHECK(r.extractor_id == "test-fixture");
}
