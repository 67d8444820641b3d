#pragma once

#include <filesystem>

#include "lesionforge/config.hpp"
#include "lesionforge/evaluator.hpp"

namespace lesionforge::pipeline {

namespace fs = std::filesystem;

// Output tree under --out:
//   config_resolved.json
//   dataset/{images,labels,masks,masks_pred,meta.json}
//   ckpt/denoiser.lfck(+.json), ckpt/classifier.lfck(+.json)
//   synth/{id}_v{k}.png, synth/manifest.json
//   diffusion_loss.json, seg_report.json, metrics.json,
//   cv_report.json, det_report.json, figures/
struct Paths {
    fs::path out;

    fs::path dataset() const { return out / "dataset"; }
    fs::path masks_pred() const { return out / "dataset" / "masks_pred"; }
    fs::path ckpt_dir() const { return out / "ckpt"; }
    fs::path denoiser_ckpt() const { return ckpt_dir() / "denoiser.lfck"; }
    fs::path classifier_ckpt() const { return ckpt_dir() / "classifier.lfck"; }
    fs::path synth_dir() const { return out / "synth"; }
    fs::path synth_manifest() const { return synth_dir() / "manifest.json"; }
    fs::path figures_dir() const { return out / "figures"; }
};

// Seed streams derived from the master seed; every stage owns one so that
// stages can be re-run in isolation.
enum SeedStream : uint64_t {
    kSeedPhantom = 1,
    kSeedDiffusion = 2,
    kSeedSynth = 3,
    kSeedExtractor = 4,
    kSeedEvalCls = 5,
    kSeedEvalDet = 6,
};

void write_config_echo(const RunConfig& cfg, const fs::path& out);

void stage_generate(const RunConfig& cfg, const fs::path& out);
void stage_segment(const RunConfig& cfg, const fs::path& out);
void stage_train_diffusion(const RunConfig& cfg, const fs::path& out);
void stage_synth(const RunConfig& cfg, const fs::path& out);
void stage_metrics(const RunConfig& cfg, const fs::path& out);
void stage_eval_cls(const RunConfig& cfg, const fs::path& out);
void stage_eval_det(const RunConfig& cfg, const fs::path& out);
void stage_figures(const RunConfig& cfg, const fs::path& out);

void run_pipeline(const RunConfig& cfg, const fs::path& out);

// Synthetic bank keyed by originating lesion id, loaded from synth/.
evaluator::SynthBank load_synth_bank(const fs::path& out);

// Trains (if absent) and loads the phantom classifier checkpoint that backs
// the metrics feature extractor and the Grad-CAM figures. Features always
// come from the float32 checkpoint so reruns reproduce bytes.
evaluator::Classifier load_or_train_extractor(const RunConfig& cfg, const fs::path& out);

}  // namespace lesionforge::pipeline
