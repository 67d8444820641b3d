#include "lesionforge/config.hpp"

#include "lesionforge/dataset_io.hpp"
#include "lesionforge/errors.hpp"

namespace lesionforge {

void RunConfig::validate() const {
    phantom.validate();
    segmenter.validate();
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (diffusion_train.steps < 1) throw ConfigError("diffusion_train.steps must be >= 1");
    if (diffusion_train.timesteps < 2) throw ConfigError("diffusion_train.timesteps must be >= 2");
    if (synth.inference_steps < 1 || synth.inference_steps > diffusion_train.timesteps)
        throw ConfigError("synth.inference_steps must lie in [1, timesteps]");
    if (synth.variants < 1) throw ConfigError("synth.variants must be >= 1");
    if (synth.guidance_scale < 0.0) throw ConfigError("synth.guidance_scale must be >= 0");
    if (synth.mask_source != "pred" && synth.mask_source != "gt")
        throw ConfigError("synth.mask_source must be \"pred\" or \"gt\"");
    if (eval_cls.k < 2) throw ConfigError("eval_cls.k must be >= 2");
    if (eval_cls.oversample_factor < 0) throw ConfigError("eval_cls.oversample_factor >= 0");
    if (eval_det.patch < 8 || eval_det.patch % 4 != 0)
        throw ConfigError("eval_det.patch must be a multiple of 4, >= 8");
    if (figure_count < 0) throw ConfigError("figure_count must be >= 0");
}

RunConfig preset_config(const std::string& name) {
    RunConfig cfg;  // defaults are the desk preset
    cfg.preset = name;
    if (name == "desk") return cfg;
    if (name == "smoke") {
        cfg.phantom.n_normal = 10;
        cfg.phantom.n_lesion = 40;
        cfg.phantom.image_size = 32;
        cfg.phantom.lesion_count_range = {1, 1};
        cfg.phantom.lesion_radius_range = {0.10, 0.16};
        cfg.diffusion_train.steps = 200;
        cfg.synth.inference_steps = 20;
        cfg.metrics.extractor_epochs = 6;
        cfg.eval_cls.epochs = 6;
        cfg.eval_det.epochs = 15;
        cfg.eval_det.patch = 8;
        cfg.figure_count = 2;
        return cfg;
    }
    if (name == "paper-finetune") {
        cfg.diffusion_train.learning_rate = 5e-6;
        cfg.diffusion_train.steps = 1000;
        cfg.diffusion_train.batch_size = 1;
        cfg.synth.guidance_scale = 7.5;
        cfg.synth.inference_steps = 100;
        cfg.synth.variants = 3;
        cfg.eval_cls.oversample_factor = 4;
        cfg.eval_det.epochs = 120;
        cfg.eval_det.batch_size = 4;
        cfg.eval_det.learning_rate = 0.005;
        cfg.eval_det.momentum = 0.95;
        return cfg;
    }
    throw ConfigError("unknown preset \"" + name + "\" (want smoke, desk or paper-finetune)");
}

namespace {

template <typename T>
void read_if(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void apply_json_overlay(RunConfig& cfg, const Json& j) {
    check_keys(j, "config",
               {"description", "preset", "seed", "workers", "phantom", "segmenter",
                "diffusion_train", "synth", "metrics", "eval_cls", "eval_det", "figure_count"});
    read_if(j, "description", cfg.description);
    if (j.contains("preset")) {
        // a preset named inside the file re-bases the defaults first
        const std::string name = j.at("preset").get<std::string>();
        RunConfig base = preset_config(name);
        base.description = cfg.description;
        cfg = base;
        read_if(j, "description", cfg.description);
    }
    read_if(j, "seed", cfg.seed);
    read_if(j, "workers", cfg.workers);
    if (j.contains("phantom")) {
        Json p = j.at("phantom");
        check_keys(p, "phantom",
                   {"n_normal", "n_lesion", "image_size", "lesion_count_range",
                    "lesion_radius_range", "palette", "texture_scale", "min_color_separation"});
        Json merged = phantom_config_to_json(cfg.phantom);
        merged.update(p);
        cfg.phantom = phantom_config_from_json(merged);
    }
    if (j.contains("segmenter")) {
        const Json& s = j.at("segmenter");
        check_keys(s, "segmenter",
                   {"color_tolerance", "connectivity", "max_region_fraction", "smoothing_radius"});
        read_if(s, "color_tolerance", cfg.segmenter.color_tolerance);
        read_if(s, "connectivity", cfg.segmenter.connectivity);
        read_if(s, "max_region_fraction", cfg.segmenter.max_region_fraction);
        read_if(s, "smoothing_radius", cfg.segmenter.smoothing_radius);
    }
    if (j.contains("diffusion_train")) {
        const Json& d = j.at("diffusion_train");
        check_keys(d, "diffusion_train",
                   {"steps", "learning_rate", "batch_size", "dropout_p", "degraded_p",
                    "base_width", "embed_dim", "timesteps", "beta_start", "beta_end",
                    "init_checkpoint"});
        read_if(d, "steps", cfg.diffusion_train.steps);
        read_if(d, "learning_rate", cfg.diffusion_train.learning_rate);
        read_if(d, "batch_size", cfg.diffusion_train.batch_size);
        read_if(d, "dropout_p", cfg.diffusion_train.dropout_p);
        read_if(d, "degraded_p", cfg.diffusion_train.degraded_p);
        read_if(d, "base_width", cfg.diffusion_train.base_width);
        read_if(d, "embed_dim", cfg.diffusion_train.embed_dim);
        read_if(d, "timesteps", cfg.diffusion_train.timesteps);
        read_if(d, "beta_start", cfg.diffusion_train.beta_start);
        read_if(d, "beta_end", cfg.diffusion_train.beta_end);
        read_if(d, "init_checkpoint", cfg.diffusion_train.init_checkpoint);
    }
    if (j.contains("synth")) {
        const Json& s = j.at("synth");
        check_keys(s, "synth",
                   {"guidance_scale", "inference_steps", "variants", "clip_denoised",
                    "mask_source"});
        read_if(s, "guidance_scale", cfg.synth.guidance_scale);
        read_if(s, "inference_steps", cfg.synth.inference_steps);
        read_if(s, "variants", cfg.synth.variants);
        read_if(s, "clip_denoised", cfg.synth.clip_denoised);
        read_if(s, "mask_source", cfg.synth.mask_source);
    }
    if (j.contains("metrics")) {
        const Json& m = j.at("metrics");
        check_keys(m, "metrics",
                   {"extractor_epochs", "extractor_learning_rate", "extractor_batch_size"});
        read_if(m, "extractor_epochs", cfg.metrics.extractor_epochs);
        read_if(m, "extractor_learning_rate", cfg.metrics.extractor_learning_rate);
        read_if(m, "extractor_batch_size", cfg.metrics.extractor_batch_size);
    }
    if (j.contains("eval_cls")) {
        const Json& e = j.at("eval_cls");
        check_keys(e, "eval_cls",
                   {"k", "oversample_factor", "epochs", "learning_rate", "batch_size"});
        read_if(e, "k", cfg.eval_cls.k);
        read_if(e, "oversample_factor", cfg.eval_cls.oversample_factor);
        read_if(e, "epochs", cfg.eval_cls.epochs);
        read_if(e, "learning_rate", cfg.eval_cls.learning_rate);
        read_if(e, "batch_size", cfg.eval_cls.batch_size);
    }
    if (j.contains("eval_det")) {
        const Json& e = j.at("eval_det");
        check_keys(e, "eval_det",
                   {"patch", "epochs", "learning_rate", "momentum", "batch_size",
                    "holdout_fraction", "oversample_factor", "threshold", "nms_iou",
                    "confidence_threshold"});
        read_if(e, "patch", cfg.eval_det.patch);
        read_if(e, "epochs", cfg.eval_det.epochs);
        read_if(e, "learning_rate", cfg.eval_det.learning_rate);
        read_if(e, "momentum", cfg.eval_det.momentum);
        read_if(e, "batch_size", cfg.eval_det.batch_size);
        read_if(e, "holdout_fraction", cfg.eval_det.holdout_fraction);
        read_if(e, "oversample_factor", cfg.eval_det.oversample_factor);
        read_if(e, "threshold", cfg.eval_det.threshold);
        read_if(e, "nms_iou", cfg.eval_det.nms_iou);
        read_if(e, "confidence_threshold", cfg.eval_det.confidence_threshold);
    }
    read_if(j, "figure_count", cfg.figure_count);
}

Json config_to_json(const RunConfig& cfg) {
    Json j;
    j["description"] = cfg.description;
    j["preset"] = cfg.preset;
    j["seed"] = cfg.seed;
    j["workers"] = cfg.workers;
    Json p = phantom_config_to_json(cfg.phantom);
    p.erase("seed");  // the stage derives it from the master seed
    j["phantom"] = p;
    j["segmenter"] = Json{{"color_tolerance", cfg.segmenter.color_tolerance},
                          {"connectivity", cfg.segmenter.connectivity},
                          {"max_region_fraction", cfg.segmenter.max_region_fraction},
                          {"smoothing_radius", cfg.segmenter.smoothing_radius}};
    j["diffusion_train"] = Json{{"steps", cfg.diffusion_train.steps},
                                {"learning_rate", cfg.diffusion_train.learning_rate},
                                {"batch_size", cfg.diffusion_train.batch_size},
                                {"dropout_p", cfg.diffusion_train.dropout_p},
                                {"degraded_p", cfg.diffusion_train.degraded_p},
                                {"base_width", cfg.diffusion_train.base_width},
                                {"embed_dim", cfg.diffusion_train.embed_dim},
                                {"timesteps", cfg.diffusion_train.timesteps},
                                {"beta_start", cfg.diffusion_train.beta_start},
                                {"beta_end", cfg.diffusion_train.beta_end},
                                {"init_checkpoint", cfg.diffusion_train.init_checkpoint}};
    j["synth"] = Json{{"guidance_scale", cfg.synth.guidance_scale},
                      {"inference_steps", cfg.synth.inference_steps},
                      {"variants", cfg.synth.variants},
                      {"clip_denoised", cfg.synth.clip_denoised},
                      {"mask_source", cfg.synth.mask_source}};
    j["metrics"] = Json{{"extractor_epochs", cfg.metrics.extractor_epochs},
                        {"extractor_learning_rate", cfg.metrics.extractor_learning_rate},
                        {"extractor_batch_size", cfg.metrics.extractor_batch_size}};
    j["eval_cls"] = Json{{"k", cfg.eval_cls.k},
                         {"oversample_factor", cfg.eval_cls.oversample_factor},
                         {"epochs", cfg.eval_cls.epochs},
                         {"learning_rate", cfg.eval_cls.learning_rate},
                         {"batch_size", cfg.eval_cls.batch_size}};
    j["eval_det"] = Json{{"patch", cfg.eval_det.patch},
                         {"epochs", cfg.eval_det.epochs},
                         {"learning_rate", cfg.eval_det.learning_rate},
                         {"momentum", cfg.eval_det.momentum},
                         {"batch_size", cfg.eval_det.batch_size},
                         {"holdout_fraction", cfg.eval_det.holdout_fraction},
                         {"oversample_factor", cfg.eval_det.oversample_factor},
                         {"threshold", cfg.eval_det.threshold},
                         {"nms_iou", cfg.eval_det.nms_iou},
                         {"confidence_threshold", cfg.eval_det.confidence_threshold}};
    j["figure_count"] = cfg.figure_count;
    return j;
}

RunConfig resolve_config(const std::string& preset, const std::optional<std::string>& config_path,
                         std::optional<uint64_t> seed_override,
                         std::optional<int> workers_override) {
    RunConfig cfg = preset_config(preset);
    if (config_path) apply_json_overlay(cfg, load_json_file(*config_path));
    if (seed_override) cfg.seed = *seed_override;
    if (workers_override) cfg.workers = *workers_override;
    cfg.validate();
    return cfg;
}

}  // namespace lesionforge
