#pragma once

#include <optional>
#include <string>

#include "lesionforge/json_util.hpp"
#include "lesionforge/phantom.hpp"
#include "lesionforge/segmenter.hpp"

namespace lesionforge {

struct DiffusionTrainBlock {
    int steps = 4000;
    double learning_rate = 2e-4;  // from-scratch desk rate
    int batch_size = 1;
    double dropout_p = 0.1;   // condition dropout -> NULL token
    double degraded_p = 0.1;  // degraded-copy fraction -> DEGRADED token
    int base_width = 32;
    int embed_dim = 32;
    int timesteps = 1000;  // schedule length T
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::string init_checkpoint;  // continue training from this checkpoint when set
};

struct SynthBlock {
    double guidance_scale = 7.5;
    int inference_steps = 100;
    int variants = 3;
    bool clip_denoised = true;
    std::string mask_source = "pred";  // pred | gt
};

struct MetricsBlock {
    int extractor_epochs = 30;
    double extractor_learning_rate = 1e-3;
    int extractor_batch_size = 8;
};

struct EvalClsBlock {
    int k = 5;
    int oversample_factor = 4;
    int epochs = 30;
    double learning_rate = 1e-3;
    int batch_size = 8;
};

struct EvalDetBlock {
    int patch = 16;
    int epochs = 120;
    double learning_rate = 0.005;
    double momentum = 0.95;
    int batch_size = 4;
    double holdout_fraction = 0.25;
    int oversample_factor = 4;
    double threshold = 0.5;
    double nms_iou = 0.5;
    double confidence_threshold = 0.5;
};

struct RunConfig {
    std::string description;
    std::string preset = "desk";
    uint64_t seed = 0;
    int workers = 1;
    phantom::PhantomConfig phantom;  // phantom.seed is derived from the master seed
    segmenter::GrowParams segmenter;
    DiffusionTrainBlock diffusion_train;
    SynthBlock synth;
    MetricsBlock metrics;
    EvalClsBlock eval_cls;
    EvalDetBlock eval_det;
    int figure_count = 4;

    void validate() const;
};

// desk is the default; smoke shrinks everything for fast end-to-end runs;
// paper-finetune carries the published fine-tune constants and requires
// diffusion_train.init_checkpoint.
RunConfig preset_config(const std::string& name);

// Strict overlay: unknown keys anywhere are rejected.
void apply_json_overlay(RunConfig& cfg, const Json& j);

Json config_to_json(const RunConfig& cfg);

RunConfig resolve_config(const std::string& preset, const std::optional<std::string>& config_path,
                         std::optional<uint64_t> seed_override,
                         std::optional<int> workers_override);

}  // namespace lesionforge
