#include "lesionforge/detection.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>

#include "lesionforge/errors.hpp"
#include "lesionforge/losses.hpp"
#include "lesionforge/optimizer.hpp"
#include "lesionforge/rng.hpp"

namespace lesionforge::detection {

using tensornet::Tensor;

double box_iou(const DetBox& a, const DetBox& b) {
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

DetBox denormalize_box(const BBox& box, int width, int height) {
    DetBox d;
    d.w = box.w * width;
    d.h = box.h * height;
    d.x = box.cx * width - d.w / 2.0;
    d.y = box.cy * height - d.h / 2.0;
    return d;
}

PatchDetector::PatchDetector(int patch, uint64_t init_seed) : patch_(patch) {
    if (patch < 8 || patch % 4 != 0) throw ConfigError("detector: patch must be a multiple of 4, >= 8");
    Rng rng(init_seed);
    net_.add(std::make_unique<tensornet::Conv2d>("p1.conv", 3, 16, 3, 2, 1, rng));
    net_.add(std::make_unique<tensornet::GroupNorm>("p1.gn", 16));
    net_.add(std::make_unique<tensornet::ReLU>());
    net_.add(std::make_unique<tensornet::Conv2d>("p2.conv", 16, 32, 3, 2, 1, rng));
    net_.add(std::make_unique<tensornet::GroupNorm>("p2.gn", 32));
    net_.add(std::make_unique<tensornet::ReLU>());
    net_.add(std::make_unique<tensornet::GlobalAvgPool>());
    net_.add(std::make_unique<tensornet::Dense>("phead", 32, 2, rng));
}

namespace {

Tensor crop_tensor(const Image& img, int x0, int y0, int patch) {
    Tensor x({3, patch, patch});
    for (int y = 0; y < patch; ++y)
        for (int xx = 0; xx < patch; ++xx)
            for (int c = 0; c < 3; ++c)
                x.data[(static_cast<size_t>(c) * patch + y) * patch + xx] =
                    img.at(x0 + xx, y0 + y, c);
    return x;
}

double lesion_coverage(const std::vector<Mask>& masks, int x0, int y0, int patch) {
    if (masks.empty()) return 0.0;
    size_t covered = 0;
    for (int y = y0; y < y0 + patch; ++y)
        for (int x = x0; x < x0 + patch; ++x)
            for (const Mask& m : masks)
                if (m.at(x, y)) {
                    ++covered;
                    break;
                }
    return static_cast<double>(covered) / (static_cast<double>(patch) * patch);
}

struct PatchRef {
    const Image* image;
    int x0, y0;
    int label;
};

}  // namespace

double PatchDetector::patch_probability(const Image& img, int x0, int y0) {
    return tensornet::softmax(net_.forward(crop_tensor(img, x0, y0, patch_))).data[1];
}

PatchDetector train_detector(const std::vector<TrainSample>& train, const DetectorHyper& hyper) {
    if (train.empty()) throw EmptyInputError("train_detector: no training samples");

    PatchDetector det(hyper.patch, derive_seed(hyper.seed, 0xDE7C));
    const int patch = hyper.patch;
    const int stride = patch / 2;

    std::vector<PatchRef> pos, neg;
    for (const TrainSample& ts : train) {
        const Image& img = *ts.image;
        if (img.width < patch || img.height < patch)
            throw ShapeError("train_detector: image smaller than patch");
        for (int y0 = 0; y0 + patch <= img.height; y0 += stride) {
            for (int x0 = 0; x0 + patch <= img.width; x0 += stride) {
                const double cov =
                    ts.masks ? lesion_coverage(*ts.masks, x0, y0, patch) : 0.0;
                if (cov >= hyper.pos_coverage)
                    pos.push_back({&img, x0, y0, 1});
                else if (cov <= hyper.neg_coverage)
                    neg.push_back({&img, x0, y0, 0});
                // ambiguous coverage skipped
            }
        }
    }
    if (pos.empty() || neg.empty())
        throw ConfigError("train_detector: need both positive and negative patches");

    // cap the background class at 2x the positives
    Rng rng(derive_seed(hyper.seed, 0xBA1A));
    for (size_t i = neg.size(); i > 1; --i)
        std::swap(neg[i - 1], neg[rng.uniform_int(0, static_cast<int64_t>(i) - 1)]);
    if (neg.size() > 2 * pos.size()) neg.resize(2 * pos.size());

    std::vector<PatchRef> items = pos;
    items.insert(items.end(), neg.begin(), neg.end());

    tensornet::Optimizer opt({tensornet::OptimAlgo::kSgdMomentum, hyper.learning_rate,
                              hyper.momentum});
    std::vector<size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int64_t>(i) - 1)]);
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(hyper.batch_size)) {
            const size_t end =
                std::min(order.size(), start + static_cast<size_t>(hyper.batch_size));
            det.network().zero_grads();
            const double inv_b = 1.0 / static_cast<double>(end - start);
            for (size_t i = start; i < end; ++i) {
                const PatchRef& ref = items[order[i]];
                const Tensor logits =
                    det.network().forward(crop_tensor(*ref.image, ref.x0, ref.y0, patch));
                auto loss = tensornet::cross_entropy_loss(logits, ref.label);
                for (double& g : loss.grad.data) g *= inv_b;
                det.network().backward(loss.grad);
            }
            opt.step(det.network().params());
        }
    }
    det.set_trained();
    return det;
}

ProbMap probability_map(PatchDetector& det, const Image& img) {
    if (!det.trained()) throw UsageError("probability_map: detector not trained");
    const int patch = det.patch_size();
    const int stride = patch / 2;
    ProbMap map;
    map.width = (img.width - patch) / stride + 1;
    map.height = (img.height - patch) / stride + 1;
    map.prob.resize(static_cast<size_t>(map.width) * map.height);
    for (int gy = 0; gy < map.height; ++gy)
        for (int gx = 0; gx < map.width; ++gx)
            map.prob[static_cast<size_t>(gy) * map.width + gx] =
                det.patch_probability(img, gx * stride, gy * stride);
    return map;
}

std::vector<Detection> detections_from_prob_map(const ProbMap& map, double threshold,
                                                double nms_iou, double cell_stride,
                                                double cell_extent, double cell_offset) {
    // 8-connected components of the thresholded grid, first-seen order
    std::vector<int> labels(map.prob.size(), -1);
    std::vector<Detection> dets;
    std::deque<size_t> queue;
    int n_components = 0;
    for (size_t start = 0; start < map.prob.size(); ++start) {
        if (map.prob[start] < threshold || labels[start] >= 0) continue;
        const int comp = n_components++;
        labels[start] = comp;
        queue.clear();
        queue.push_back(start);
        int min_x = map.width, min_y = map.height, max_x = -1, max_y = -1;
        double prob_sum = 0.0;
        size_t count = 0;
        while (!queue.empty()) {
            const size_t i = queue.front();
            queue.pop_front();
            const int x = static_cast<int>(i % map.width);
            const int y = static_cast<int>(i / map.width);
            min_x = std::min(min_x, x);
            min_y = std::min(min_y, y);
            max_x = std::max(max_x, x);
            max_y = std::max(max_y, y);
            prob_sum += map.prob[i];
            ++count;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= map.width || ny >= map.height) continue;
                    const size_t ni = static_cast<size_t>(ny) * map.width + nx;
                    if (map.prob[ni] >= threshold && labels[ni] < 0) {
                        labels[ni] = comp;
                        queue.push_back(ni);
                    }
                }
        }
        Detection d;
        d.box.x = min_x * cell_stride + cell_offset;
        d.box.y = min_y * cell_stride + cell_offset;
        d.box.w = (max_x - min_x) * cell_stride + cell_extent;
        d.box.h = (max_y - min_y) * cell_stride + cell_extent;
        d.confidence = prob_sum / static_cast<double>(count);
        dets.push_back(d);
    }

    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) {
                         return a.confidence > b.confidence;
                     });

    // greedy NMS
    std::vector<Detection> kept;
    for (const Detection& d : dets) {
        bool suppressed = false;
        for (const Detection& k : kept)
            if (box_iou(d.box, k.box) >= nms_iou) {
                suppressed = true;
                break;
            }
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

std::vector<Detection> detect(PatchDetector& det, const Image& img, const DetParams& params) {
    if (!det.trained()) throw UsageError("detect: detector not trained");
    const ProbMap map = probability_map(det, img);
    // each firing window contributes its central stride-cell: boxes follow
    // the lesion support instead of the window footprint
    const double stride = det.patch_size() / 2.0;
    return detections_from_prob_map(map, params.threshold, params.nms_iou, stride, stride,
                                    (det.patch_size() - stride) / 2.0);
}

MatchResult match_detections(const std::vector<Detection>& preds, const std::vector<DetBox>& gts,
                             double iou_thr) {
    MatchResult r;
    r.tp.assign(preds.size(), false);
    std::vector<bool> gt_used(gts.size(), false);
    for (size_t p = 0; p < preds.size(); ++p) {
        double best_iou = 0.0;
        size_t best_gt = gts.size();
        for (size_t g = 0; g < gts.size(); ++g) {
            if (gt_used[g]) continue;
            const double iou = box_iou(preds[p].box, gts[g]);
            if (iou > best_iou) {
                best_iou = iou;
                best_gt = g;
            }
        }
        if (best_gt < gts.size() && best_iou >= iou_thr) {
            r.tp[p] = true;
            gt_used[best_gt] = true;
        }
    }
    for (bool used : gt_used)
        if (!used) ++r.fn;
    return r;
}

double average_precision(const std::vector<bool>& ranked_tp, int total_gt) {
    if (total_gt < 1) throw UndefinedMetricError("average_precision: zero ground truth");
    const size_t n = ranked_tp.size();
    std::vector<double> prec(n), rec(n);
    int tp = 0;
    for (size_t i = 0; i < n; ++i) {
        tp += ranked_tp[i] ? 1 : 0;
        prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        rec[i] = static_cast<double>(tp) / static_cast<double>(total_gt);
    }
    // precision envelope from the right
    std::vector<double> env(n);
    double running = 0.0;
    for (size_t i = n; i-- > 0;) {
        running = std::max(running, prec[i]);
        env[i] = running;
    }
    double acc = 0.0;
    size_t idx = 0;
    for (int j = 0; j <= 100; ++j) {
        const double r = static_cast<double>(j) / 100.0;
        while (idx < n && rec[idx] < r) ++idx;
        if (idx < n) acc += env[idx];
    }
    return acc / 101.0;
}

DetReport evaluate_detections(const std::vector<EvalItem>& items, const DetParams& params) {
    int total_gt = 0;
    for (const EvalItem& item : items) total_gt += static_cast<int>(item.gts.size());
    if (total_gt < 1) throw UndefinedMetricError("evaluate_detections: no ground truth boxes");

    DetReport report;

    // operating-point precision/recall at IoU 0.5
    int tp = 0, n_pred = 0;
    for (const EvalItem& item : items) {
        std::vector<Detection> conf_preds;
        for (const Detection& d : item.preds)
            if (d.confidence >= params.confidence_threshold) conf_preds.push_back(d);
        const MatchResult m = match_detections(conf_preds, item.gts, 0.5);
        for (bool f : m.tp) tp += f ? 1 : 0;
        n_pred += static_cast<int>(conf_preds.size());
    }
    report.precision = n_pred > 0 ? static_cast<double>(tp) / n_pred : 0.0;
    report.recall = static_cast<double>(tp) / total_gt;

    // mAP over IoU 0.50:0.05:0.95
    double ap_sum = 0.0;
    for (int k = 0; k < 10; ++k) {
        const double thr = static_cast<double>(50 + 5 * k) / 100.0;
        std::vector<RankedFlag> flags;
        for (const EvalItem& item : items) {
            const MatchResult m = match_detections(item.preds, item.gts, thr);
            for (size_t p = 0; p < item.preds.size(); ++p)
                flags.push_back({item.preds[p].confidence, m.tp[p]});
        }
        std::stable_sort(flags.begin(), flags.end(), [](const RankedFlag& a, const RankedFlag& b) {
            return a.confidence > b.confidence;
        });
        std::vector<bool> ranked(flags.size());
        for (size_t i = 0; i < flags.size(); ++i) ranked[i] = flags[i].tp;
        const double ap = average_precision(ranked, total_gt);
        if (k == 0) report.map50 = ap;
        ap_sum += ap;
    }
    report.map50_95 = ap_sum / 10.0;
    return report;
}

DetExpResult run_detection_experiment(const phantom::Dataset& dataset,
                                      const evaluator::SynthBank& synth_bank,
                                      const DetExpConfig& cfg, bool use_synth) {
    if (!(cfg.holdout_fraction > 0.0) || cfg.holdout_fraction >= 1.0)
        throw ConfigError("detection experiment: holdout_fraction must lie in (0,1)");

    // stratified holdout
    std::vector<std::string> normal_ids, lesion_ids;
    for (const phantom::Sample& s : dataset.samples)
        (s.label == phantom::Label::kLesion ? lesion_ids : normal_ids).push_back(s.id);
    Rng rng(derive_seed(cfg.seed, 0x401D));
    auto shuffle_ids = [&rng](std::vector<std::string>& ids) {
        for (size_t i = ids.size(); i > 1; --i)
            std::swap(ids[i - 1], ids[rng.uniform_int(0, static_cast<int64_t>(i) - 1)]);
    };
    shuffle_ids(normal_ids);
    shuffle_ids(lesion_ids);

    std::set<std::string> test_ids;
    const auto take_test = [&](const std::vector<std::string>& ids) {
        const size_t n_test = std::max<size_t>(1, static_cast<size_t>(
                                                      std::floor(ids.size() * cfg.holdout_fraction)));
        for (size_t i = 0; i < n_test && i < ids.size(); ++i) test_ids.insert(ids[i]);
    };
    if (!normal_ids.empty()) take_test(normal_ids);
    if (lesion_ids.empty()) throw ConfigError("detection experiment: no lesion samples");
    take_test(lesion_ids);

    std::vector<const phantom::Sample*> train_samples, test_samples;
    for (const phantom::Sample& s : dataset.samples)
        (test_ids.count(s.id) ? test_samples : train_samples).push_back(&s);

    auto build_arm = [&](bool with_synth) {
        std::vector<TrainSample> items;
        for (const phantom::Sample* s : train_samples) items.push_back({&s->image, &s->masks});
        if (with_synth) {
            for (const phantom::Sample* s : train_samples) {
                if (s->label != phantom::Label::kLesion) continue;
                const auto it = synth_bank.find(s->id);
                if (it == synth_bank.end() || it->second.empty())
                    throw UsageError("detection experiment: synth bank has no variants for " +
                                     s->id);
                if (test_ids.count(s->id))
                    throw LeakageError("synthetic from held-out original " + s->id);
                for (int k = 0; k < cfg.oversample_factor; ++k)
                    items.push_back(
                        {&it->second[static_cast<size_t>(k) % it->second.size()], &s->masks});
            }
        }
        return items;
    };

    DetectorHyper hyper = cfg.hyper;
    hyper.seed = derive_seed(cfg.seed, 0xA2B);  // same seed for both arms

    auto evaluate_arm = [&](PatchDetector& det) {
        std::vector<EvalItem> eval_items;
        for (const phantom::Sample* s : test_samples) {
            EvalItem item;
            item.preds = detect(det, s->image, cfg.params);
            for (const BBox& b : s->boxes)
                item.gts.push_back(denormalize_box(b, s->image.width, s->image.height));
            eval_items.push_back(std::move(item));
        }
        return evaluate_detections(eval_items, cfg.params);
    };

    DetExpResult result;
    {
        PatchDetector det = train_detector(build_arm(false), hyper);
        result.baseline = evaluate_arm(det);
    }
    {
        PatchDetector det = train_detector(build_arm(use_synth), hyper);
        result.augmented = evaluate_arm(det);
    }
    return result;
}

}  // namespace lesionforge::detection
