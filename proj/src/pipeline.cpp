#include "lesionforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "lesionforge/checkpoint.hpp"
#include "lesionforge/dataset_io.hpp"
#include "lesionforge/detection.hpp"
#include "lesionforge/diffusion.hpp"
#include "lesionforge/errors.hpp"
#include "lesionforge/log.hpp"
#include "lesionforge/metrics.hpp"
#include "lesionforge/png_io.hpp"
#include "lesionforge/segmenter.hpp"

namespace lesionforge {

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("LESIONFORGE_LOG");
        if (!env) return LogLevel::kInfo;
        const std::string v(env);
        if (v == "error") return LogLevel::kError;
        if (v == "debug") return LogLevel::kDebug;
        return LogLevel::kInfo;
    }();
    return level;
}

void log_error(const std::string& msg) { std::fprintf(stderr, "[lesionforge] %s\n", msg.c_str()); }
void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::kInfo) std::fprintf(stderr, "[lesionforge] %s\n", msg.c_str());
}
void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::kDebug) std::fprintf(stderr, "[lesionforge] %s\n", msg.c_str());
}

}  // namespace lesionforge

namespace lesionforge::pipeline {

namespace {

void require(bool present, const std::string& what) {
    if (!present) throw MissingInputError(what);
}

phantom::Dataset load_dataset_checked(const fs::path& out) {
    require(fs::exists(out / "dataset" / "meta.json"), "dataset/");
    return load_dataset(out / "dataset");
}

Mask union_mask(const std::vector<Mask>& masks) {
    if (masks.empty()) throw EmptyInputError("union_mask: no masks");
    Mask u = masks[0];
    for (size_t j = 1; j < masks.size(); ++j)
        for (size_t i = 0; i < u.data.size(); ++i) u.data[i] |= masks[j].data[i];
    return u;
}

// predicted (or gt) masks of one sample, one file per box
std::vector<Mask> load_sample_masks(const fs::path& dir, const phantom::Sample& s,
                                    const std::string& rel_dir) {
    std::vector<Mask> masks;
    for (size_t j = 0; j < s.boxes.size(); ++j) {
        const fs::path p = dir / (s.id + "_" + std::to_string(j) + ".png");
        require(fs::exists(p), rel_dir + "/" + p.filename().string());
        masks.push_back(read_png_mask(p));
    }
    return masks;
}

diffusion::NoiseSchedule schedule_from_manifest(const Json& manifest) {
    return diffusion::make_schedule(manifest.at("timesteps").get<int>(),
                                    manifest.at("beta_start").get<double>(),
                                    manifest.at("beta_end").get<double>());
}

tensornet::UNetConfig unet_config_from_manifest(const Json& manifest) {
    tensornet::UNetConfig ucfg;
    ucfg.base_width = manifest.at("base_width").get<int>();
    ucfg.embed_dim = manifest.at("embed_dim").get<int>();
    return ucfg;
}

}  // namespace

void write_config_echo(const RunConfig& cfg, const fs::path& out) {
    fs::create_directories(out);
    save_json_file(out / "config_resolved.json", config_to_json(cfg));
}

void stage_generate(const RunConfig& cfg, const fs::path& out) {
    log_info("generate: rendering " + std::to_string(cfg.phantom.n_normal) + " normal + " +
             std::to_string(cfg.phantom.n_lesion) + " lesion phantoms");
    phantom::PhantomConfig pc = cfg.phantom;
    pc.seed = derive_seed(cfg.seed, kSeedPhantom);
    const phantom::Dataset ds = phantom::generate_dataset(pc);
    save_dataset(ds, out / "dataset");
    log_info("generate: wrote " + std::to_string(ds.samples.size()) + " samples");
}

void stage_segment(const RunConfig& cfg, const fs::path& out) {
    const phantom::Dataset ds = load_dataset_checked(out);
    Paths paths{out};
    fs::create_directories(paths.masks_pred());

    Json per_image = Json::object();
    std::vector<double> ious;
    for (const phantom::Sample& s : ds.samples) {
        if (s.label != phantom::Label::kLesion) continue;
        std::vector<double> sample_ious;
        for (size_t j = 0; j < s.boxes.size(); ++j) {
            const segmenter::PixelPoint seed =
                segmenter::bbox_center(s.boxes[j], s.image.width, s.image.height);
            Mask grown;
            try {
                grown = segmenter::grow_region(s.image, seed, cfg.segmenter);
            } catch (const segmenter::RegionOverflowError& e) {
                log_info("segment: region overflow on " + s.id + ", keeping partial mask");
                grown = e.partial_mask;
            }
            const Mask refined = segmenter::refine_mask(grown);
            write_png_gray8(paths.masks_pred() / (s.id + "_" + std::to_string(j) + ".png"),
                            refined);
            const double iou = segmenter::mask_iou(refined, s.masks[j]);
            sample_ious.push_back(iou);
            ious.push_back(iou);
        }
        double mean = 0.0;
        for (double v : sample_ious) mean += v;
        per_image[s.id] = mean / static_cast<double>(sample_ious.size());
    }

    double mean_iou = 0.0;
    for (double v : ious) mean_iou += v;
    if (!ious.empty()) mean_iou /= static_cast<double>(ious.size());

    Json report;
    report["mean_iou"] = mean_iou;
    report["n_masks"] = ious.size();
    report["per_image"] = per_image;
    save_json_file(out / "seg_report.json", report);
    log_info("segment: mean IoU vs ground truth = " + std::to_string(mean_iou));
}

void stage_train_diffusion(const RunConfig& cfg, const fs::path& out) {
    const phantom::Dataset ds = load_dataset_checked(out);
    Paths paths{out};

    std::vector<Image> lesion_images;
    for (const phantom::Sample& s : ds.samples)
        if (s.label == phantom::Label::kLesion) lesion_images.push_back(s.image);

    const DiffusionTrainBlock& dt = cfg.diffusion_train;
    tensornet::UNetConfig ucfg;
    ucfg.base_width = dt.base_width;
    ucfg.embed_dim = dt.embed_dim;
    tensornet::UNet unet(ucfg, derive_seed(cfg.seed, kSeedDiffusion));

    int64_t prior_steps = 0;
    if (!dt.init_checkpoint.empty()) {
        const fs::path init = dt.init_checkpoint;
        require(fs::exists(init), init.string());
        const auto ckpt = tensornet::load_checkpoint(init);
        tensornet::apply_checkpoint(ckpt, unet.params());
        if (ckpt.manifest.contains("steps")) prior_steps = ckpt.manifest["steps"].get<int64_t>();
        log_info("train-diffusion: continuing from " + init.string());
    } else if (cfg.preset == "paper-finetune") {
        throw ConfigError(
            "paper-finetune preset continues from an existing checkpoint; set "
            "diffusion_train.init_checkpoint");
    }

    const diffusion::NoiseSchedule sched =
        diffusion::make_schedule(dt.timesteps, dt.beta_start, dt.beta_end);

    diffusion::TrainConfig tc;
    tc.steps = dt.steps;
    tc.learning_rate = dt.learning_rate;
    tc.batch_size = dt.batch_size;
    tc.dropout_p = dt.dropout_p;
    tc.degraded_p = dt.degraded_p;
    tc.seed = derive_seed(cfg.seed, kSeedDiffusion);

    log_info("train-diffusion: " + std::to_string(tc.steps) + " steps on " +
             std::to_string(lesion_images.size()) + " lesion images");
    const diffusion::TrainResult tr = diffusion::train_diffusion(unet, lesion_images, sched, tc);

    fs::create_directories(paths.ckpt_dir());
    Json manifest;
    manifest["architecture"] = "unet2";
    manifest["base_width"] = dt.base_width;
    manifest["embed_dim"] = dt.embed_dim;
    manifest["timesteps"] = dt.timesteps;
    manifest["beta_start"] = dt.beta_start;
    manifest["beta_end"] = dt.beta_end;
    manifest["steps"] = prior_steps + tc.steps;
    manifest["seed"] = tc.seed;
    manifest["image_size"] = cfg.phantom.image_size;
    tensornet::save_checkpoint(paths.denoiser_ckpt(), unet.params(), manifest);

    Json loss_log;
    loss_log["first_loss"] = tr.losses.front();
    loss_log["last_loss"] = tr.losses.back();
    loss_log["losses"] = tr.losses;
    save_json_file(out / "diffusion_loss.json", loss_log);
    log_info("train-diffusion: loss " + std::to_string(tr.losses.front()) + " -> " +
             std::to_string(tr.losses.back()));
}

void stage_synth(const RunConfig& cfg, const fs::path& out) {
    const phantom::Dataset ds = load_dataset_checked(out);
    Paths paths{out};
    require(fs::exists(paths.denoiser_ckpt()), "ckpt/denoiser.lfck");
    const auto ckpt = tensornet::load_checkpoint(paths.denoiser_ckpt());

    const fs::path mask_dir =
        cfg.synth.mask_source == "pred" ? paths.masks_pred() : (paths.dataset() / "masks");
    const std::string mask_rel =
        cfg.synth.mask_source == "pred" ? "dataset/masks_pred" : "dataset/masks";
    if (cfg.synth.mask_source == "pred") require(fs::exists(paths.masks_pred()), "dataset/masks_pred/");

    const diffusion::NoiseSchedule sched = schedule_from_manifest(ckpt.manifest);
    fs::create_directories(paths.synth_dir());

    struct Task {
        const phantom::Sample* sample;
        uint64_t seed;
    };
    std::vector<Task> tasks;
    const uint64_t synth_master = derive_seed(cfg.seed, kSeedSynth);
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        const phantom::Sample& s = ds.samples[i];
        if (s.label != phantom::Label::kLesion) continue;
        tasks.push_back({&s, derive_seed(synth_master, i)});
    }

    std::vector<Json> entries(tasks.size());
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        // workers get private denoisers; results only depend on the checkpoint
        tensornet::UNet unet(unet_config_from_manifest(ckpt.manifest), 0);
        tensornet::apply_checkpoint(ckpt, unet.params());
        while (!failed) {
            const size_t i = next.fetch_add(1);
            if (i >= tasks.size()) break;
            const phantom::Sample& s = *tasks[i].sample;
            try {
                const std::vector<Mask> masks = load_sample_masks(mask_dir, s, mask_rel);
                const Mask mask = union_mask(masks);

                diffusion::SynthParams params;
                params.guidance_scale = cfg.synth.guidance_scale;
                params.inference_steps = cfg.synth.inference_steps;
                params.variants = cfg.synth.variants;
                params.output_size = s.image.width;
                params.seed = tasks[i].seed;
                params.clip_denoised = cfg.synth.clip_denoised;

                const diffusion::InpaintResult res =
                    diffusion::inpaint(s.image, mask, unet, sched, params,
                                       diffusion::ConditionToken::kLesion,
                                       diffusion::ConditionToken::kDegraded);
                if (res.empty_mask_warning)
                    log_info("synth: empty mask for " + s.id + ", passing input through");

                Json entry;
                entry["id"] = s.id;
                Json mask_files = Json::array();
                for (size_t j = 0; j < s.boxes.size(); ++j)
                    mask_files.push_back(mask_rel + "/" + s.id + "_" + std::to_string(j) + ".png");
                entry["mask_files"] = mask_files;
                Json seeds = Json::array();
                Json outputs = Json::array();
                for (int k = 0; k < params.variants; ++k) {
                    const std::string name = s.id + "_v" + std::to_string(k) + ".png";
                    write_png_rgb8(paths.synth_dir() / name, res.variants[static_cast<size_t>(k)]);
                    seeds.push_back(derive_seed(params.seed, static_cast<uint64_t>(k)));
                    outputs.push_back(name);
                }
                entry["variant_seeds"] = seeds;
                entry["outputs"] = outputs;
                entry["empty_mask"] = res.empty_mask_warning;
                entries[i] = std::move(entry);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed = true;
                failure = e.what();
            }
        }
    };

    const int n_workers = std::max(1, cfg.workers);
    log_info("synth: inpainting " + std::to_string(tasks.size()) + " images x " +
             std::to_string(cfg.synth.variants) + " variants (" + std::to_string(n_workers) +
             " workers)");
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
        for (std::thread& t : threads) t.join();
    }
    if (failed) throw UsageError("synth failed: " + failure);

    Json manifest;
    manifest["params"] = Json{{"guidance_scale", cfg.synth.guidance_scale},
                              {"inference_steps", cfg.synth.inference_steps},
                              {"variants", cfg.synth.variants},
                              {"clip_denoised", cfg.synth.clip_denoised},
                              {"mask_source", cfg.synth.mask_source},
                              {"positive", "LESION"},
                              {"negative", "DEGRADED"}};
    Json items = Json::array();
    for (Json& e : entries) items.push_back(std::move(e));  // dataset order
    manifest["items"] = items;
    save_json_file(paths.synth_manifest(), manifest);
}

evaluator::SynthBank load_synth_bank(const fs::path& out) {
    Paths paths{out};
    require(fs::exists(paths.synth_manifest()), "synth/");
    const Json manifest = load_json_file(paths.synth_manifest());
    evaluator::SynthBank bank;
    for (const Json& item : manifest.at("items")) {
        std::vector<Image>& variants = bank[item.at("id").get<std::string>()];
        for (const Json& name : item.at("outputs"))
            variants.push_back(read_png_rgb(paths.synth_dir() / name.get<std::string>()));
    }
    return bank;
}

evaluator::Classifier load_or_train_extractor(const RunConfig& cfg, const fs::path& out) {
    Paths paths{out};
    if (!fs::exists(paths.classifier_ckpt())) {
        const phantom::Dataset ds = load_dataset_checked(out);
        std::vector<evaluator::LabeledImage> items;
        for (const phantom::Sample& s : ds.samples)
            items.push_back({&s.image, s.label == phantom::Label::kLesion ? 1 : 0});
        evaluator::ClassifierHyper hyper;
        hyper.epochs = cfg.metrics.extractor_epochs;
        hyper.learning_rate = cfg.metrics.extractor_learning_rate;
        hyper.batch_size = cfg.metrics.extractor_batch_size;
        hyper.seed = derive_seed(cfg.seed, kSeedExtractor);
        log_info("metrics: training feature extractor (" + std::to_string(hyper.epochs) +
                 " epochs on " + std::to_string(items.size()) + " images)");
        evaluator::Classifier model =
            evaluator::train_classifier(items, cfg.phantom.image_size, hyper);

        fs::create_directories(paths.ckpt_dir());
        Json manifest;
        manifest["architecture"] = "classifier3";
        manifest["image_size"] = cfg.phantom.image_size;
        manifest["epochs"] = hyper.epochs;
        manifest["seed"] = hyper.seed;
        tensornet::save_checkpoint(paths.classifier_ckpt(), model.network().params(), manifest);
    }
    // always serve weights from the float32 checkpoint so that a re-run
    // with the checkpoint already present reproduces identical bytes
    const auto ckpt = tensornet::load_checkpoint(paths.classifier_ckpt());
    evaluator::Classifier model(ckpt.manifest.at("image_size").get<int>(), 0);
    tensornet::apply_checkpoint(ckpt, model.network().params());
    return model;
}

void stage_metrics(const RunConfig& cfg, const fs::path& out) {
    Paths paths{out};
    require(fs::exists(paths.synth_manifest()), "synth/");
    const phantom::Dataset ds = load_dataset_checked(out);

    evaluator::Classifier classifier = load_or_train_extractor(cfg, out);
    metrics::FeatureExtractor fx;
    fx.network = &classifier.network();
    fx.perceptual_taps = {evaluator::Classifier::kBlock1Tap, evaluator::Classifier::kBlock2Tap,
                          evaluator::Classifier::kFinalConvTap};
    fx.pooled_tap = evaluator::Classifier::kPooledTap;
    fx.feature_dim = evaluator::Classifier::kFeatureDim;
    fx.input_size = classifier.image_size();
    fx.checkpoint_id = "ckpt/classifier.lfck";

    const Json manifest = load_json_file(paths.synth_manifest());
    std::vector<Image> synth_images;       // owners
    std::vector<Mask> pair_masks;          // owners
    std::vector<const Image*> originals, synths;
    std::vector<const Mask*> masks;
    std::vector<Image> fid_real;

    for (const phantom::Sample& s : ds.samples)
        if (s.label == phantom::Label::kLesion) fid_real.push_back(s.image);

    // reserve so pointers into the owner vectors stay stable
    size_t total_variants = 0;
    for (const Json& item : manifest.at("items"))
        total_variants += item.at("outputs").size();
    synth_images.reserve(total_variants);
    pair_masks.reserve(manifest.at("items").size());

    for (const Json& item : manifest.at("items")) {
        const std::string id = item.at("id").get<std::string>();
        const phantom::Sample* s = ds.find(id);
        if (!s) throw UsageError("metrics: synth manifest names unknown id " + id);

        std::vector<Mask> sample_masks;
        for (const Json& rel : item.at("mask_files"))
            sample_masks.push_back(read_png_mask(out / rel.get<std::string>()));
        pair_masks.push_back(union_mask(sample_masks));
        const Mask* mask_ptr = &pair_masks.back();

        for (const Json& name : item.at("outputs")) {
            synth_images.push_back(read_png_rgb(paths.synth_dir() / name.get<std::string>()));
            originals.push_back(&s->image);
            synths.push_back(&synth_images.back());
            masks.push_back(mask_ptr);
        }
    }

    log_info("metrics: scoring " + std::to_string(synths.size()) + " pairs");
    const metrics::MetricReport report =
        metrics::compute_report(originals, synths, masks, fid_real, fx);

    Json j;
    if (std::isinf(report.psnr_db))
        j["psnr"] = "inf";
    else
        j["psnr"] = report.psnr_db;
    j["ssim"] = report.ssim_score;
    j["perc"] = report.perc;
    j["fid"] = report.fid_score;
    if (std::isinf(report.psnr_mask_db))
        j["psnr_mask"] = "inf";
    else
        j["psnr_mask"] = report.psnr_mask_db;
    j["ssim_mask"] = report.ssim_mask;
    j["n_pairs"] = report.n_pairs;
    j["extractor"] = report.extractor_id;
    save_json_file(out / "metrics.json", j);
    log_info("metrics: fid=" + std::to_string(report.fid_score));
}

void stage_eval_cls(const RunConfig& cfg, const fs::path& out) {
    const phantom::Dataset ds = load_dataset_checked(out);
    const evaluator::SynthBank bank = load_synth_bank(out);

    evaluator::CVConfig cv;
    cv.k = cfg.eval_cls.k;
    cv.oversample_factor = cfg.eval_cls.oversample_factor;
    cv.hyper.epochs = cfg.eval_cls.epochs;
    cv.hyper.learning_rate = cfg.eval_cls.learning_rate;
    cv.hyper.batch_size = cfg.eval_cls.batch_size;
    cv.seed = derive_seed(cfg.seed, kSeedEvalCls);

    log_info("eval-cls: " + std::to_string(cv.k) + "-fold CV, both arms");
    const evaluator::CVResult original = evaluator::run_cv(ds, bank, cv, false);
    const evaluator::CVResult augmented = evaluator::run_cv(ds, bank, cv, true);

    auto arm_json = [](const evaluator::CVResult& r) {
        Json folds = Json::array();
        for (const evaluator::FoldResult& f : r.folds)
            folds.push_back(Json{{"fold", f.fold},
                                 {"auroc", f.auroc},
                                 {"accuracy", f.accuracy},
                                 {"tp", f.tp},
                                 {"fp", f.fp},
                                 {"tn", f.tn},
                                 {"fn", f.fn}});
        return Json{{"folds", folds},
                    {"mean_auroc", r.auroc_summary.mean},
                    {"std_auroc", r.auroc_summary.std_dev},
                    {"mean_accuracy", r.accuracy_summary.mean},
                    {"std_accuracy", r.accuracy_summary.std_dev}};
    };
    Json j;
    j["arms"] = Json{{"original", arm_json(original)}, {"with_synthetic", arm_json(augmented)}};
    save_json_file(out / "cv_report.json", j);
    log_info("eval-cls: accuracy " + std::to_string(original.accuracy_summary.mean) + " -> " +
             std::to_string(augmented.accuracy_summary.mean));
}

void stage_eval_det(const RunConfig& cfg, const fs::path& out) {
    const phantom::Dataset ds = load_dataset_checked(out);
    const evaluator::SynthBank bank = load_synth_bank(out);

    detection::DetExpConfig dc;
    dc.hyper.patch = cfg.eval_det.patch;
    dc.hyper.epochs = cfg.eval_det.epochs;
    dc.hyper.learning_rate = cfg.eval_det.learning_rate;
    dc.hyper.momentum = cfg.eval_det.momentum;
    dc.hyper.batch_size = cfg.eval_det.batch_size;
    dc.params.threshold = cfg.eval_det.threshold;
    dc.params.nms_iou = cfg.eval_det.nms_iou;
    dc.params.confidence_threshold = cfg.eval_det.confidence_threshold;
    dc.holdout_fraction = cfg.eval_det.holdout_fraction;
    dc.oversample_factor = cfg.eval_det.oversample_factor;
    dc.seed = derive_seed(cfg.seed, kSeedEvalDet);

    log_info("eval-det: training both detector arms");
    const detection::DetExpResult res = detection::run_detection_experiment(ds, bank, dc, true);

    auto arm_json = [](const detection::DetReport& r) {
        return Json{{"precision", r.precision},
                    {"recall", r.recall},
                    {"map50", r.map50},
                    {"map50_95", r.map50_95}};
    };
    Json j;
    j["arms"] =
        Json{{"original", arm_json(res.baseline)}, {"with_synthetic", arm_json(res.augmented)}};
    save_json_file(out / "det_report.json", j);
    log_info("eval-det: mAP50 " + std::to_string(res.baseline.map50) + " -> " +
             std::to_string(res.augmented.map50));
}

namespace {

Image mask_to_rgb(const Mask& mask) {
    Image img(mask.width, mask.height);
    for (size_t i = 0; i < mask.data.size(); ++i) {
        const double v = mask.data[i] ? 1.0 : 0.0;
        img.data[i * 3 + 0] = img.data[i * 3 + 1] = img.data[i * 3 + 2] = v;
    }
    return img;
}

Image heatmap_to_rgb(const evaluator::Heatmap& hm) {
    Image img(hm.width, hm.height);
    for (size_t i = 0; i < hm.data.size(); ++i) {
        img.data[i * 3 + 0] = hm.data[i];
        img.data[i * 3 + 1] = 0.15 * hm.data[i];
        img.data[i * 3 + 2] = 1.0 - hm.data[i];
    }
    return img;
}

Image hstack(const std::vector<const Image*>& panels, int separator = 2) {
    const int h = panels.front()->height;
    int w = -separator;
    for (const Image* p : panels) w += p->width + separator;
    Image out(w, h, 1.0);
    int x_off = 0;
    for (const Image* p : panels) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < p->width; ++x)
                for (int c = 0; c < 3; ++c) out.at(x_off + x, y, c) = p->at(x, y, c);
        x_off += p->width + separator;
    }
    return out;
}

}  // namespace

void stage_figures(const RunConfig& cfg, const fs::path& out) {
    if (cfg.figure_count == 0) return;
    Paths paths{out};
    const phantom::Dataset ds = load_dataset_checked(out);
    require(fs::exists(paths.synth_manifest()), "synth/");
    const Json manifest = load_json_file(paths.synth_manifest());
    evaluator::Classifier classifier = load_or_train_extractor(cfg, out);

    fs::create_directories(paths.figures_dir());
    int emitted = 0;
    for (const Json& item : manifest.at("items")) {
        if (emitted >= cfg.figure_count) break;
        const std::string id = item.at("id").get<std::string>();
        const phantom::Sample* s = ds.find(id);
        if (!s) continue;

        std::vector<Mask> sample_masks;
        for (const Json& rel : item.at("mask_files"))
            sample_masks.push_back(read_png_mask(out / rel.get<std::string>()));
        const Mask mask = union_mask(sample_masks);
        const Image mask_rgb = mask_to_rgb(mask);

        const Image synth0 =
            read_png_rgb(paths.synth_dir() / item.at("outputs")[0].get<std::string>());
        write_png_rgb8(paths.figures_dir() / (id + "_synth.png"),
                       hstack({&s->image, &mask_rgb, &synth0}));

        const evaluator::Heatmap hm = evaluator::grad_cam(classifier, s->image, 1);
        const Image hm_rgb = heatmap_to_rgb(hm);
        const Image gt_rgb = mask_to_rgb(union_mask(s->masks));
        write_png_rgb8(paths.figures_dir() / (id + "_gradcam.png"),
                       hstack({&s->image, &hm_rgb, &gt_rgb}));
        ++emitted;
    }
    log_info("figures: wrote " + std::to_string(emitted) + " panel pairs");
}

void run_pipeline(const RunConfig& cfg, const fs::path& out) {
    stage_generate(cfg, out);
    stage_segment(cfg, out);
    stage_train_diffusion(cfg, out);
    stage_synth(cfg, out);
    stage_metrics(cfg, out);
    stage_eval_cls(cfg, out);
    stage_eval_det(cfg, out);
    stage_figures(cfg, out);
}

}  // namespace lesionforge::pipeline
