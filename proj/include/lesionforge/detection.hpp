#pragma once

#include <map>
#include <string>
#include <vector>

#include "lesionforge/evaluator.hpp"
#include "lesionforge/image.hpp"
#include "lesionforge/network.hpp"
#include "lesionforge/phantom.hpp"

namespace lesionforge::detection {

// Pixel-space box, (x, y) top-left, continuous coordinates.
struct DetBox {
    double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
};

struct Detection {
    DetBox box;
    double confidence = 0.0;
};

double box_iou(const DetBox& a, const DetBox& b);

DetBox denormalize_box(const BBox& box, int width, int height);

struct DetectorHyper {
    int patch = 16;
    int epochs = 120;             // detector defaults: SGD, lr 5e-3, momentum 0.95, batch 4
    double learning_rate = 0.005;
    double momentum = 0.95;
    int batch_size = 4;
    uint64_t seed = 0;
    double pos_coverage = 0.30;  // min lesion fraction for a positive patch
    double neg_coverage = 0.02;  // max lesion fraction for a negative patch
};

// Patch classifier slid at stride patch/2; the lesion-probability grid is
// thresholded and its connected components become detections.
class PatchDetector {
public:
    PatchDetector() = default;
    PatchDetector(int patch, uint64_t init_seed);

    double patch_probability(const Image& img, int x0, int y0);
    bool trained() const { return trained_; }
    void set_trained() { trained_ = true; }
    int patch_size() const { return patch_; }
    tensornet::Sequential& network() { return net_; }

private:
    int patch_ = 0;
    tensornet::Sequential net_;
    bool trained_ = false;
};

struct TrainSample {
    const Image* image = nullptr;
    const std::vector<Mask>* masks = nullptr;  // empty list for lesion-free images
};

PatchDetector train_detector(const std::vector<TrainSample>& train, const DetectorHyper& hyper);

struct ProbMap {
    int width = 0;
    int height = 0;
    std::vector<double> prob;

    double at(int x, int y) const { return prob[static_cast<size_t>(y) * width + x]; }
};

ProbMap probability_map(PatchDetector& det, const Image& img);

struct DetParams {
    double threshold = 0.5;
    double nms_iou = 0.5;
    double confidence_threshold = 0.5;  // precision/recall operating point
};

// Components of the thresholded map (8-connectivity) -> boxes. Each cell
// spans `cell_extent` px starting at gx*cell_stride + cell_offset;
// stride=extent=1, offset=0 makes the box exactly the blob bound in map
// coordinates. Confidence is the mean probability over the component.
// Greedy NMS at nms_iou.
std::vector<Detection> detections_from_prob_map(const ProbMap& map, double threshold,
                                                double nms_iou, double cell_stride,
                                                double cell_extent, double cell_offset = 0.0);

std::vector<Detection> detect(PatchDetector& det, const Image& img, const DetParams& params);

struct MatchResult {
    std::vector<bool> tp;  // per prediction, confidence-descending order
    int fn = 0;
};

// Greedy: each prediction takes the highest-IoU unmatched ground truth with
// IoU >= iou_thr. Predictions must arrive sorted by confidence descending.
MatchResult match_detections(const std::vector<Detection>& preds, const std::vector<DetBox>& gts,
                             double iou_thr);

// COCO-style 101-point interpolated AP over confidence-ranked TP flags.
double average_precision(const std::vector<bool>& ranked_tp, int total_gt);

struct RankedFlag {
    double confidence = 0.0;
    bool tp = false;
};

struct DetReport {
    double precision = 0.0;  // at IoU 0.5, confidence >= threshold; 0 with no predictions
    double recall = 0.0;
    double map50 = 0.0;
    double map50_95 = 0.0;
};

struct EvalItem {
    std::vector<Detection> preds;  // confidence-descending
    std::vector<DetBox> gts;
};

DetReport evaluate_detections(const std::vector<EvalItem>& items, const DetParams& params);

struct DetExpConfig {
    DetectorHyper hyper;
    DetParams params;
    double holdout_fraction = 0.25;
    int oversample_factor = 4;
    uint64_t seed = 0;
};

struct DetExpResult {
    DetReport baseline;
    DetReport augmented;
};

// Trains one arm without synthetics and one with (when use_synth), on a
// stratified holdout split; synthetic images reuse their original's masks
// and boxes. use_synth=false makes both arms identical.
DetExpResult run_detection_experiment(const phantom::Dataset& dataset,
                                      const evaluator::SynthBank& synth_bank,
                                      const DetExpConfig& cfg, bool use_synth);

}  // namespace lesionforge::detection
