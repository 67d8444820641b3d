#pragma once

#include <optional>
#include <vector>

#include "lesionforge/image.hpp"
#include "lesionforge/network.hpp"
#include "lesionforge/optimizer.hpp"
#include "lesionforge/rng.hpp"

namespace lesionforge::diffusion {

using tensornet::ConditionalModel;
using tensornet::Tensor;

// Discrete condition tokens standing in for text prompts. DEGRADED is
// trained on blurred+noisy copies so the negative prompt has teeth; NULL
// realizes condition dropout / unconditional guidance.
enum class ConditionToken { kLesion = 0, kDegraded = 1, kNull = 2 };

struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;       // beta[t-1] holds timestep t in 1..T
    std::vector<double> alpha;      // 1 - beta
    std::vector<double> alpha_bar;  // running product, double precision

    double beta_at(int t) const { return beta.at(static_cast<size_t>(t - 1)); }
    double alpha_bar_at(int t) const {
        return t == 0 ? 1.0 : alpha_bar.at(static_cast<size_t>(t - 1));
    }
};

// Linear beta ramp from beta_start to beta_end over T steps.
NoiseSchedule make_schedule(int T, double beta_start, double beta_end);

struct SynthParams {
    double guidance_scale = 7.5;
    int inference_steps = 100;
    int variants = 3;
    int output_size = 64;
    uint64_t seed = 0;
    bool clip_denoised = true;  // clamp x0 estimate inside each reverse step

    void validate(int schedule_T) const;
};

// [0,1] image <-> [-1,1] signal tensor (3,H,W)
Tensor image_to_signal(const Image& img);
Image signal_to_image(const Tensor& s);

// x_t = sqrt(abar_t) x0 + sqrt(1-abar_t) eps, x0 given as a [0,1] image.
Tensor q_sample(const Image& x0, int t, const Tensor& eps, const NoiseSchedule& sched);
Tensor q_sample_signal(const Tensor& x0_signal, int t, const Tensor& eps,
                       const NoiseSchedule& sched);

// Evenly spaced decreasing timesteps from T down to 1; S == T gives T..1.
std::vector<int> inference_timesteps(int T, int steps);

struct TrainItem {
    const Image* image = nullptr;
    ConditionToken token = ConditionToken::kLesion;
};

// One optimizer step of the epsilon-prediction objective: per item draws
// t ~ U[1,T] and eps ~ N(0,1), replaces the token with NULL w.p. dropout_p,
// minimizes MSE(denoiser(x_t,t,token), eps). Returns the batch loss.
double train_step(ConditionalModel& denoiser, const std::vector<TrainItem>& batch,
                  const NoiseSchedule& sched, tensornet::Optimizer& opt, double dropout_p,
                  Rng& rng);

// eps_hat = eps(neg) + g*(eps(pos) - eps(neg)); NULL plays the negative
// role when none is given. g==0 and g==1 short-circuit so the identities
// hold bit-exactly.
Tensor cfg_epsilon(ConditionalModel& denoiser, const Tensor& x_t, int t, ConditionToken positive,
                   std::optional<ConditionToken> negative, double guidance);

// Ancestral reverse process over the inference subsequence, beta-tilde
// posterior variance. Deterministic for a fixed params.seed.
Image sample(ConditionalModel& denoiser, const NoiseSchedule& sched, const SynthParams& params,
             ConditionToken positive, std::optional<ConditionToken> negative);

struct InpaintResult {
    std::vector<Image> variants;
    bool empty_mask_warning = false;
};

// RePaint-style masked inpainting: the known (mask=false) region is
// re-noised from the original at every reverse step; the final composite
// copies original pixels outside the mask bit-exactly. Variant k uses
// seed derive_seed(params.seed, k).
InpaintResult inpaint(const Image& image, const Mask& mask, ConditionalModel& denoiser,
                      const NoiseSchedule& sched, const SynthParams& params,
                      ConditionToken positive, std::optional<ConditionToken> negative);

// Gaussian blur sigma 1.5 + pixel noise sigma 0.05, clamped to [0,1];
// the DEGRADED training examples.
Image degrade_image(const Image& img, Rng& rng);

struct TrainConfig {
    int steps = 4000;
    double learning_rate = 2e-4;
    int batch_size = 1;
    double dropout_p = 0.1;   // condition dropout -> NULL
    double degraded_p = 0.1;  // degraded-copy fraction -> DEGRADED
    uint64_t seed = 0;
};

struct TrainResult {
    std::vector<double> losses;  // per step
};

// From-scratch / continued training on lesion images with Adam.
TrainResult train_diffusion(ConditionalModel& denoiser, const std::vector<Image>& images,
                            const NoiseSchedule& sched, const TrainConfig& cfg);

}  // namespace lesionforge::diffusion
