#include "lesionforge/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "lesionforge/errors.hpp"
#include "lesionforge/losses.hpp"

namespace lesionforge::diffusion {

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
    if (T < 2) throw ConfigError("schedule: T must be >= 2");
    if (!(beta_start > 0.0) || !(beta_start < beta_end) || !(beta_end < 1.0))
        throw ConfigError("schedule: need 0 < beta_start < beta_end < 1");

    NoiseSchedule s;
    s.T = T;
    s.beta.resize(static_cast<size_t>(T));
    s.alpha.resize(static_cast<size_t>(T));
    s.alpha_bar.resize(static_cast<size_t>(T));
    double prod = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double b = beta_start + (beta_end - beta_start) * (t - 1) / (T - 1);
        s.beta[static_cast<size_t>(t - 1)] = b;
        s.alpha[static_cast<size_t>(t - 1)] = 1.0 - b;
        prod *= 1.0 - b;
        s.alpha_bar[static_cast<size_t>(t - 1)] = prod;
    }
    return s;
}

void SynthParams::validate(int schedule_T) const {
    if (guidance_scale < 0.0) throw ConfigError("synth: guidance_scale must be >= 0");
    if (inference_steps < 1 || inference_steps > schedule_T)
        throw ConfigError("synth: inference_steps must lie in [1, T]");
    if (variants < 1) throw ConfigError("synth: variants must be >= 1");
    if (output_size < 4 || output_size % 4 != 0)
        throw ConfigError("synth: output_size must be a positive multiple of 4");
}

Tensor image_to_signal(const Image& img) {
    Tensor s({3, img.height, img.width});
    const size_t hw = img.pixel_count();
    for (size_t i = 0; i < hw; ++i)
        for (int c = 0; c < 3; ++c)
            s.data[static_cast<size_t>(c) * hw + i] = img.data[i * 3 + c] * 2.0 - 1.0;
    return s;
}

Image signal_to_image(const Tensor& s) {
    if (s.shape.size() != 3 || s.shape[0] != 3) throw ShapeError("signal_to_image: want (3,H,W)");
    Image img(s.shape[2], s.shape[1]);
    const size_t hw = img.pixel_count();
    for (size_t i = 0; i < hw; ++i)
        for (int c = 0; c < 3; ++c) {
            const double v = std::clamp(s.data[static_cast<size_t>(c) * hw + i], -1.0, 1.0);
            img.data[i * 3 + c] = (v + 1.0) / 2.0;
        }
    return img;
}

Tensor q_sample_signal(const Tensor& x0_signal, int t, const Tensor& eps,
                       const NoiseSchedule& sched) {
    if (!x0_signal.same_shape(eps)) throw ShapeError("q_sample: eps shape mismatch");
    if (t < 1 || t > sched.T) throw ConfigError("q_sample: t out of range");
    const double abar = sched.alpha_bar_at(t);
    const double a = std::sqrt(abar), b = std::sqrt(1.0 - abar);
    Tensor out(x0_signal.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = a * x0_signal.data[i] + b * eps.data[i];
    return out;
}

Tensor q_sample(const Image& x0, int t, const Tensor& eps, const NoiseSchedule& sched) {
    return q_sample_signal(image_to_signal(x0), t, eps, sched);
}

std::vector<int> inference_timesteps(int T, int steps) {
    std::vector<int> ts(static_cast<size_t>(steps));
    if (steps == 1) {
        ts[0] = T;
        return ts;
    }
    for (int i = 0; i < steps; ++i) {
        const double v = T - static_cast<double>(i) * (T - 1) / (steps - 1);
        ts[static_cast<size_t>(i)] = static_cast<int>(std::lround(v));
    }
    return ts;
}

namespace {

Tensor normal_tensor(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.normal();
    return t;
}

// one ancestral step from t_cur to t_prev (t_prev == 0 lands on x0)
Tensor reverse_step(const Tensor& x, const Tensor& eps_hat, int t_cur, int t_prev,
                    const NoiseSchedule& sched, bool clip_denoised, Rng& rng) {
    const double abar_cur = sched.alpha_bar_at(t_cur);
    const double abar_prev = sched.alpha_bar_at(t_prev);
    const double alpha_eff = abar_cur / abar_prev;
    const double beta_eff = 1.0 - alpha_eff;
    const double inv_sqrt_abar = 1.0 / std::sqrt(abar_cur);
    const double sqrt_one_minus = std::sqrt(1.0 - abar_cur);

    const double coef_x0 = std::sqrt(abar_prev) * beta_eff / (1.0 - abar_cur);
    const double coef_xt = std::sqrt(alpha_eff) * (1.0 - abar_prev) / (1.0 - abar_cur);
    const double beta_tilde = beta_eff * (1.0 - abar_prev) / (1.0 - abar_cur);
    const double sigma = (t_prev > 0) ? std::sqrt(beta_tilde) : 0.0;

    Tensor out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) {
        double x0_hat = inv_sqrt_abar * (x.data[i] - sqrt_one_minus * eps_hat.data[i]);
        if (clip_denoised) x0_hat = std::clamp(x0_hat, -1.0, 1.0);
        double v = coef_x0 * x0_hat + coef_xt * x.data[i];
        if (t_prev > 0) v += sigma * rng.normal();
        if (!std::isfinite(v)) throw NumericError("sampler produced non-finite value");
        out.data[i] = v;
    }
    return out;
}

}  // namespace

double train_step(ConditionalModel& denoiser, const std::vector<TrainItem>& batch,
                  const NoiseSchedule& sched, tensornet::Optimizer& opt, double dropout_p,
                  Rng& rng) {
    if (batch.empty()) throw UsageError("train_step: empty batch");
    denoiser.zero_grads();

    double loss_sum = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const TrainItem& item : batch) {
        const int t = static_cast<int>(rng.uniform_int(1, sched.T));
        ConditionToken token = item.token;
        if (rng.uniform() < dropout_p) token = ConditionToken::kNull;
        const Tensor x0s = image_to_signal(*item.image);
        const Tensor eps = normal_tensor(x0s.shape, rng);
        const Tensor x_t = q_sample_signal(x0s, t, eps, sched);

        const Tensor pred = denoiser.forward(x_t, t, static_cast<int>(token));
        auto loss = tensornet::mse_loss(pred, eps);
        if (!std::isfinite(loss.value))
            throw NumericError("train_step: non-finite loss, parameters unchanged");
        loss_sum += loss.value;
        for (double& g : loss.grad.data) g *= inv_b;
        denoiser.backward(loss.grad);
    }
    opt.step(denoiser.params());
    return loss_sum * inv_b;
}

Tensor cfg_epsilon(ConditionalModel& denoiser, const Tensor& x_t, int t, ConditionToken positive,
                   std::optional<ConditionToken> negative, double guidance) {
    const ConditionToken neg = negative.value_or(ConditionToken::kNull);
    // exact short circuits keep the g=0 / g=1 identities bitwise
    if (guidance == 0.0) return denoiser.forward(x_t, t, static_cast<int>(neg));
    if (guidance == 1.0) return denoiser.forward(x_t, t, static_cast<int>(positive));

    const Tensor eps_neg = denoiser.forward(x_t, t, static_cast<int>(neg));
    const Tensor eps_pos = denoiser.forward(x_t, t, static_cast<int>(positive));
    Tensor out(eps_neg.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = eps_neg.data[i] + guidance * (eps_pos.data[i] - eps_neg.data[i]);
    return out;
}

Image sample(ConditionalModel& denoiser, const NoiseSchedule& sched, const SynthParams& params,
             ConditionToken positive, std::optional<ConditionToken> negative) {
    params.validate(sched.T);
    Rng rng(params.seed);
    Tensor x = normal_tensor({3, params.output_size, params.output_size}, rng);

    const std::vector<int> ts = inference_timesteps(sched.T, params.inference_steps);
    for (size_t i = 0; i < ts.size(); ++i) {
        const int t_cur = ts[i];
        const int t_prev = (i + 1 < ts.size()) ? ts[i + 1] : 0;
        const Tensor eps_hat =
            cfg_epsilon(denoiser, x, t_cur, positive, negative, params.guidance_scale);
        x = reverse_step(x, eps_hat, t_cur, t_prev, sched, params.clip_denoised, rng);
    }
    return signal_to_image(x);
}

InpaintResult inpaint(const Image& image, const Mask& mask, ConditionalModel& denoiser,
                      const NoiseSchedule& sched, const SynthParams& params,
                      ConditionToken positive, std::optional<ConditionToken> negative) {
    if (mask.width != image.width || mask.height != image.height)
        throw ShapeError("inpaint: mask shape mismatch");
    params.validate(sched.T);

    InpaintResult result;
    if (mask.empty_mask()) {
        result.empty_mask_warning = true;
        result.variants.assign(static_cast<size_t>(params.variants), image);
        return result;
    }

    const Tensor x0s = image_to_signal(image);
    const size_t hw = image.pixel_count();
    const std::vector<int> ts = inference_timesteps(sched.T, params.inference_steps);

    for (int k = 0; k < params.variants; ++k) {
        Rng rng(derive_seed(params.seed, static_cast<uint64_t>(k)));
        Tensor x = normal_tensor({3, image.height, image.width}, rng);

        for (size_t i = 0; i < ts.size(); ++i) {
            const int t_cur = ts[i];
            const int t_prev = (i + 1 < ts.size()) ? ts[i + 1] : 0;
            const Tensor eps_hat =
                cfg_epsilon(denoiser, x, t_cur, positive, negative, params.guidance_scale);
            x = reverse_step(x, eps_hat, t_cur, t_prev, sched, params.clip_denoised, rng);

            // re-inject the known region at the new noise level
            Tensor known = (t_prev > 0)
                               ? q_sample_signal(x0s, t_prev, normal_tensor(x0s.shape, rng), sched)
                               : x0s;
            for (size_t p = 0; p < hw; ++p) {
                if (mask.data[p]) continue;
                for (int c = 0; c < 3; ++c)
                    x.data[static_cast<size_t>(c) * hw + p] =
                        known.data[static_cast<size_t>(c) * hw + p];
            }
        }

        // final composite: outside the mask the input passes through untouched
        Image out = image;
        for (size_t p = 0; p < hw; ++p) {
            if (!mask.data[p]) continue;
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(x.data[static_cast<size_t>(c) * hw + p], -1.0, 1.0);
                out.data[p * 3 + c] = (v + 1.0) / 2.0;
            }
        }
        result.variants.push_back(std::move(out));
    }
    return result;
}

Image degrade_image(const Image& img, Rng& rng) {
    Image out = gaussian_blur(img, 1.5);
    for (double& v : out.data) v = clamp01(v + rng.normal(0.0, 0.05));
    return out;
}

TrainResult train_diffusion(ConditionalModel& denoiser, const std::vector<Image>& images,
                            const NoiseSchedule& sched, const TrainConfig& cfg) {
    if (images.empty()) throw EmptyInputError("train_diffusion: no training images");
    if (cfg.steps < 1 || cfg.batch_size < 1) throw ConfigError("train_diffusion: bad steps/batch");

    Rng rng(derive_seed(cfg.seed, 0xD1FF));

    // one degraded copy per image, fixed up front
    std::vector<Image> degraded;
    degraded.reserve(images.size());
    {
        Rng degrade_rng(derive_seed(cfg.seed, 0xDE62));
        for (const Image& img : images) degraded.push_back(degrade_image(img, degrade_rng));
    }

    tensornet::Optimizer opt({tensornet::OptimAlgo::kAdam, cfg.learning_rate});
    TrainResult result;
    result.losses.reserve(static_cast<size_t>(cfg.steps));

    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<TrainItem> batch;
        batch.reserve(static_cast<size_t>(cfg.batch_size));
        for (int b = 0; b < cfg.batch_size; ++b) {
            const size_t idx =
                static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(images.size()) - 1));
            TrainItem item;
            if (rng.uniform() < cfg.degraded_p) {
                item.image = &degraded[idx];
                item.token = ConditionToken::kDegraded;
            } else {
                item.image = &images[idx];
                item.token = ConditionToken::kLesion;
            }
            batch.push_back(item);
        }
        result.losses.push_back(train_step(denoiser, batch, sched, opt, cfg.dropout_p, rng));
    }
    return result;
}

}  // namespace lesionforge::diffusion
