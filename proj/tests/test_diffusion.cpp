#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lesionforge/diffusion.hpp"
#include "lesionforge/phantom.hpp"
#include "lesionforge/png_io.hpp"
#include "test_util.hpp"

using namespace lesionforge;
using namespace lesionforge::diffusion;
using tensornet::Param;
using tensornet::Tensor;

namespace {

// Test stub that recovers the exact noise from x_t — it knows the clean
// signal and the schedule, so MSE against the drawn eps is identically 0.
class EpsOracle : public ConditionalModel {
public:
    EpsOracle(Tensor x0_signal, const NoiseSchedule* sched)
        : x0_(std::move(x0_signal)), sched_(sched) {}

    Tensor forward(const Tensor& x, int t, int) override {
        const double abar = sched_->alpha_bar_at(t);
        Tensor eps(x.shape);
        for (size_t i = 0; i < x.size(); ++i)
            eps.data[i] = (x.data[i] - std::sqrt(abar) * x0_.data[i]) / std::sqrt(1.0 - abar);
        return eps;
    }
    Tensor backward(const Tensor& dy) override { return Tensor(dy.shape); }
    std::vector<Param*> params() override { return {}; }
    void zero_grads() override {}

private:
    Tensor x0_;
    const NoiseSchedule* sched_;
};

tensornet::UNet tiny_unet(uint64_t seed = 1) {
    tensornet::UNetConfig cfg;
    cfg.base_width = 8;
    cfg.embed_dim = 8;
    return tensornet::UNet(cfg, seed);
}

Image random_image(int size, Rng& rng) {
    Image img(size, size);
    for (double& v : img.data) v = rng.uniform();
    return img;
}

Mask random_mask(int size, Rng& rng, double fill = 0.3) {
    Mask m(size, size);
    for (auto& v : m.data) v = rng.uniform() < fill ? 1 : 0;
    return m;
}

}  // namespace

TEST_CASE("linear schedule hits its endpoints and shrinks alpha_bar") {
    const NoiseSchedule s = make_schedule(1000, 1e-4, 0.02);
    CHECK(s.beta_at(1) == doctest::Approx(1e-4).epsilon(1e-15));
    CHECK(s.beta_at(1000) == doctest::Approx(0.02).epsilon(1e-15));
    CHECK(s.alpha_bar_at(1) == doctest::Approx(1.0 - 1e-4).epsilon(1e-12));
    for (int t = 2; t <= 1000; ++t) CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
    CHECK(s.alpha_bar_at(1000) < 0.05);
}

TEST_CASE("schedule parameter validation") {
    CHECK_THROWS_AS(make_schedule(1, 1e-4, 0.02), ConfigError);
    CHECK_THROWS_AS(make_schedule(10, 0.02, 1e-4), ConfigError);
    CHECK_THROWS_AS(make_schedule(10, 0.0, 0.02), ConfigError);
    CHECK_THROWS_AS(make_schedule(10, 0.5, 1.0), ConfigError);
}

TEST_CASE("q_sample: zero noise scales the signal by sqrt(alpha_bar)") {
    const NoiseSchedule s = make_schedule(100, 1e-3, 0.05);
    Image x0(4, 4, 1.0);  // signal value +1
    Tensor eps({3, 4, 4});
    const Tensor xt = q_sample(x0, 40, eps, s);
    const double expected = std::sqrt(s.alpha_bar_at(40));
    for (double v : xt.data) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("q_sample closed form at alpha_bar = 0.25") {
    // beta_1 = 0.75 makes alpha_bar_1 exactly 0.25
    const NoiseSchedule s = make_schedule(2, 0.75, 0.9);
    CHECK(s.alpha_bar_at(1) == doctest::Approx(0.25).epsilon(1e-15));
    Image x0(4, 4, 1.0);
    Tensor eps = Tensor::full({3, 4, 4}, 1.0);
    const Tensor xt = q_sample(x0, 1, eps, s);
    for (double v : xt.data)
        CHECK(v == doctest::Approx(0.5 + std::sqrt(0.75)).epsilon(1e-12));  // 1.3660
}

TEST_CASE("q_sample moments match the forward-process law") {
    const NoiseSchedule s = make_schedule(50, 1e-3, 0.08);
    const int t = 25;
    const double abar = s.alpha_bar_at(t);
    Image x0(4, 4, 0.8);  // signal 0.6
    const double signal = 0.6;

    Rng rng(77);
    const int n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    Tensor eps({3, 4, 4});
    for (int i = 0; i < n; ++i) {
        eps.data[0] = rng.normal();
        const Tensor xt = q_sample(x0, t, eps, s);
        sum += xt.data[0];
        sum_sq += xt.data[0] * xt.data[0];
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    const double expect_mean = std::sqrt(abar) * signal;
    const double expect_var = 1.0 - abar;
    // 3 sigma Monte Carlo bands
    CHECK(std::abs(mean - expect_mean) < 3.0 * std::sqrt(expect_var / n));
    CHECK(std::abs(var - expect_var) < 3.0 * expect_var * std::sqrt(2.0 / n));
}

TEST_CASE("q_sample validates shapes and range") {
    const NoiseSchedule s = make_schedule(10, 1e-3, 0.05);
    Image x0(4, 4, 0.5);
    Tensor eps({3, 2, 2});
    CHECK_THROWS_AS(q_sample(x0, 5, eps, s), ShapeError);
    Tensor ok({3, 4, 4});
    CHECK_THROWS_AS(q_sample(x0, 0, ok, s), ConfigError);
    CHECK_THROWS_AS(q_sample(x0, 11, ok, s), ConfigError);
}

TEST_CASE("train_step with the eps oracle reports zero loss") {
    const NoiseSchedule s = make_schedule(100, 1e-3, 0.05);
    Rng img_rng(3);
    const Image img = random_image(8, img_rng);
    EpsOracle oracle(image_to_signal(img), &s);
    tensornet::Optimizer opt({tensornet::OptimAlgo::kAdam, 1e-3});
    Rng rng(4);
    const double loss = train_step(oracle, {{&img, ConditionToken::kLesion}}, s, opt, 0.1, rng);
    CHECK(loss < 1e-20);
}

TEST_CASE("fixed seed reproduces the training loss trajectory") {
    const NoiseSchedule s = make_schedule(50, 1e-3, 0.05);
    Rng img_rng(5);
    std::vector<Image> images;
    for (int i = 0; i < 4; ++i) images.push_back(random_image(8, img_rng));

    auto run = [&]() {
        tensornet::UNet unet = tiny_unet(11);
        TrainConfig tc;
        tc.steps = 10;
        tc.seed = 21;
        return train_diffusion(unet, images, s, tc).losses;
    };
    const auto a = run();
    const auto b = run();
    CHECK(a == b);
}

TEST_CASE("short training run reduces the loss on smoke phantoms") {
    phantom::PhantomConfig pc;
    pc.n_normal = 0;
    pc.n_lesion = 12;
    pc.image_size = 32;
    pc.lesion_count_range = {1, 1};
    pc.lesion_radius_range = {0.10, 0.16};
    pc.seed = 3;
    const auto ds = phantom::generate_dataset(pc);
    std::vector<Image> images;
    for (const auto& s : ds.samples) images.push_back(s.image);

    const NoiseSchedule sched = make_schedule(1000, 1e-4, 0.02);
    tensornet::UNet unet = tiny_unet(7);
    TrainConfig tc;
    tc.steps = 300;
    tc.seed = 9;
    const auto result = train_diffusion(unet, images, sched, tc);

    double early = 0.0, late = 0.0;
    for (int i = 0; i < 30; ++i) {
        early += result.losses[static_cast<size_t>(i)];
        late += result.losses[result.losses.size() - 1 - static_cast<size_t>(i)];
    }
    CHECK(late < 0.7 * early);  // the 2k-step >=50% drop is asserted in acceptance
}

TEST_CASE("classifier-free guidance identities hold bit-exactly") {
    const NoiseSchedule s = make_schedule(60, 1e-3, 0.05);
    tensornet::UNet unet = tiny_unet(13);
    Rng rng(6);
    const Tensor x = lftest::randn_tensor({3, 8, 8}, rng);
    const int t = 30;

    const Tensor pos = unet.forward(x, t, static_cast<int>(ConditionToken::kLesion));
    const Tensor neg = unet.forward(x, t, static_cast<int>(ConditionToken::kDegraded));

    SUBCASE("g = 1 returns the positive branch exactly") {
        const Tensor out = cfg_epsilon(unet, x, t, ConditionToken::kLesion,
                                       ConditionToken::kDegraded, 1.0);
        CHECK(out.data == pos.data);
    }
    SUBCASE("g = 0 returns the negative branch exactly") {
        const Tensor out = cfg_epsilon(unet, x, t, ConditionToken::kLesion,
                                       ConditionToken::kDegraded, 0.0);
        CHECK(out.data == neg.data);
    }
    SUBCASE("identical tokens make guidance inert") {
        const Tensor g0 = cfg_epsilon(unet, x, t, ConditionToken::kLesion,
                                      ConditionToken::kLesion, 0.0);
        const Tensor g75 = cfg_epsilon(unet, x, t, ConditionToken::kLesion,
                                       ConditionToken::kLesion, 7.5);
        CHECK(g0.data == g75.data);
    }
    SUBCASE("missing negative falls back to the NULL token") {
        const Tensor null_eps = unet.forward(x, t, static_cast<int>(ConditionToken::kNull));
        const Tensor out = cfg_epsilon(unet, x, t, ConditionToken::kLesion, std::nullopt, 0.0);
        CHECK(out.data == null_eps.data);
    }
}

TEST_CASE("inference timestep subsequences") {
    SUBCASE("steps == T reproduces the full schedule") {
        const auto ts = inference_timesteps(10, 10);
        REQUIRE(ts.size() == 10);
        for (int i = 0; i < 10; ++i) CHECK(ts[static_cast<size_t>(i)] == 10 - i);
    }
    SUBCASE("subsampled sequences are strictly decreasing from T to 1") {
        for (int steps : {2, 3, 7, 25, 100}) {
            const auto ts = inference_timesteps(1000, steps);
            CHECK(ts.front() == 1000);
            CHECK(ts.back() == 1);
            for (size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
        }
    }
}

TEST_CASE("sampling is deterministic per seed") {
    const NoiseSchedule s = make_schedule(50, 1e-3, 0.05);
    tensornet::UNet unet = tiny_unet(17);
    SynthParams params;
    params.inference_steps = 10;
    params.output_size = 8;
    params.seed = 33;
    const Image a = sample(unet, s, params, ConditionToken::kLesion, ConditionToken::kDegraded);
    const Image b = sample(unet, s, params, ConditionToken::kLesion, ConditionToken::kDegraded);
    CHECK(a.data == b.data);
    params.seed = 34;
    const Image c = sample(unet, s, params, ConditionToken::kLesion, ConditionToken::kDegraded);
    CHECK(a.data != c.data);
}

TEST_CASE("inpaint: all-false mask passes the input through with a warning") {
    const NoiseSchedule s = make_schedule(50, 1e-3, 0.05);
    tensornet::UNet unet = tiny_unet(19);
    Rng rng(8);
    const Image img = random_image(8, rng);
    SynthParams params;
    params.inference_steps = 5;
    params.output_size = 8;
    const InpaintResult r = inpaint(img, Mask(8, 8), unet, s, params, ConditionToken::kLesion,
                                    ConditionToken::kDegraded);
    CHECK(r.empty_mask_warning);
    REQUIRE(r.variants.size() == 3);
    for (const Image& v : r.variants) CHECK(v.data == img.data);
}

TEST_CASE("inpaint never touches pixels outside the mask") {
    const NoiseSchedule s = make_schedule(50, 1e-3, 0.05);
    tensornet::UNet unet = tiny_unet(23);
    Rng rng(9);
    SynthParams params;
    params.inference_steps = 8;
    params.output_size = 8;
    for (int trial = 0; trial < 5; ++trial) {
        const Image img = random_image(8, rng);
        const Mask mask = random_mask(8, rng);
        params.seed = rng.next_u64();
        const InpaintResult r =
            inpaint(img, mask, unet, s, params, ConditionToken::kLesion, ConditionToken::kDegraded);
        CHECK_FALSE(r.empty_mask_warning);
        REQUIRE(r.variants.size() == 3);  // default variant count
        bool changed_inside = false;
        for (const Image& v : r.variants) {
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    for (int c = 0; c < 3; ++c) {
                        if (mask.at(x, y))
                            changed_inside |= v.at(x, y, c) != img.at(x, y, c);
                        else
                            CHECK(v.at(x, y, c) == img.at(x, y, c));  // bit-exact
                    }
        }
        CHECK(changed_inside);
    }
}

TEST_CASE("inpaint survives the png round trip within one gray level") {
    const auto dir = lftest::fresh_dir("lf_inpaint_png");
    const NoiseSchedule s = make_schedule(50, 1e-3, 0.05);
    tensornet::UNet unet = tiny_unet(29);
    Rng rng(10);
    const Image img = random_image(8, rng);
    const Mask mask = random_mask(8, rng);
    SynthParams params;
    params.inference_steps = 5;
    params.output_size = 8;
    const InpaintResult r =
        inpaint(img, mask, unet, s, params, ConditionToken::kLesion, ConditionToken::kDegraded);

    write_png_rgb8(dir / "v0.png", r.variants[0]);
    const Image back = read_png_rgb(dir / "v0.png");
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            for (int c = 0; c < 3; ++c)
                if (!mask.at(x, y))
                    CHECK(std::abs(back.at(x, y, c) - img.at(x, y, c)) <= 1.0 / 255.0 + 1e-12);
}

TEST_CASE("inpaint with an all-true mask is pure conditional generation") {
    const NoiseSchedule s = make_schedule(50, 1e-3, 0.05);
    tensornet::UNet unet = tiny_unet(31);
    Rng rng(11);
    const Image img = random_image(8, rng);
    SynthParams params;
    params.inference_steps = 5;
    params.output_size = 8;
    params.variants = 2;
    const InpaintResult r = inpaint(img, Mask(8, 8, 1), unet, s, params, ConditionToken::kLesion,
                                    ConditionToken::kDegraded);
    REQUIRE(r.variants.size() == 2);
    CHECK(r.variants[0].data != img.data);
    CHECK(r.variants[0].data != r.variants[1].data);  // distinct per-variant seeds
}

TEST_CASE("degrade_image blurs and clamps into range") {
    Rng rng(12);
    const Image img = random_image(16, rng);
    Rng drng(13);
    const Image deg = degrade_image(img, drng);
    CHECK(deg.data != img.data);
    for (double v : deg.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("train_step refuses shape drift and empty batches") {
    const NoiseSchedule s = make_schedule(20, 1e-3, 0.05);
    tensornet::UNet unet = tiny_unet(37);
    tensornet::Optimizer opt({tensornet::OptimAlgo::kAdam, 1e-3});
    Rng rng(14);
    CHECK_THROWS_AS(train_step(unet, {}, s, opt, 0.1, rng), UsageError);
}
