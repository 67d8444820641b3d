#include "lesionforge/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "lesionforge/errors.hpp"
#include "lesionforge/losses.hpp"
#include "lesionforge/optimizer.hpp"
#include "lesionforge/rng.hpp"

namespace lesionforge::evaluator {

using tensornet::Tensor;

Classifier::Classifier(int image_size, uint64_t init_seed) : image_size_(image_size) {
    Rng rng(init_seed);
    net_.add(std::make_unique<tensornet::Conv2d>("block1.conv", 3, 16, 3, 2, 1, rng));
    net_.add(std::make_unique<tensornet::GroupNorm>("block1.gn", 16));
    net_.add(std::make_unique<tensornet::ReLU>());
    net_.add(std::make_unique<tensornet::Conv2d>("block2.conv", 16, 32, 3, 2, 1, rng));
    net_.add(std::make_unique<tensornet::GroupNorm>("block2.gn", 32));
    net_.add(std::make_unique<tensornet::ReLU>());
    net_.add(std::make_unique<tensornet::Conv2d>("block3.conv", 32, 64, 3, 2, 1, rng));
    net_.add(std::make_unique<tensornet::GroupNorm>("block3.gn", 64));
    net_.add(std::make_unique<tensornet::ReLU>());
    net_.add(std::make_unique<tensornet::GlobalAvgPool>());
    net_.add(std::make_unique<tensornet::Dense>("head", kFeatureDim, 2, rng));
}

Tensor Classifier::image_tensor(const Image& img) {
    Tensor x({3, img.height, img.width});
    const size_t hw = img.pixel_count();
    for (size_t i = 0; i < hw; ++i)
        for (int c = 0; c < 3; ++c) x.data[static_cast<size_t>(c) * hw + i] = img.data[i * 3 + c];
    return x;
}

Tensor Classifier::logits(const Image& img) {
    if (img.width != image_size_ || img.height != image_size_)
        throw ShapeError("classifier: expected " + std::to_string(image_size_) + "px input");
    return net_.forward(image_tensor(img));
}

double Classifier::lesion_score(const Image& img) {
    return tensornet::softmax(logits(img)).data[1];
}

int Classifier::predict(const Image& img) {
    const Tensor l = logits(img);
    return l.data[1] > l.data[0] ? 1 : 0;
}

Classifier train_classifier(const std::vector<LabeledImage>& train, int image_size,
                            const ClassifierHyper& hyper) {
    bool has0 = false, has1 = false;
    for (const LabeledImage& item : train) {
        has0 |= item.label == 0;
        has1 |= item.label == 1;
    }
    if (!has0 || !has1) throw ConfigError("train_classifier: single-class training set");

    Classifier model(image_size, derive_seed(hyper.seed, 0xC1A5));
    tensornet::Optimizer opt({tensornet::OptimAlgo::kAdam, hyper.learning_rate});
    Rng rng(derive_seed(hyper.seed, 0x50FF));

    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int64_t>(i) - 1)]);
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(hyper.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(hyper.batch_size));
            model.network().zero_grads();
            const double inv_b = 1.0 / static_cast<double>(end - start);
            for (size_t i = start; i < end; ++i) {
                const LabeledImage& item = train[order[i]];
                const Tensor logits = model.network().forward(Classifier::image_tensor(*item.image));
                auto loss = tensornet::cross_entropy_loss(logits, item.label);
                for (double& g : loss.grad.data) g *= inv_b;
                model.network().backward(loss.grad);
            }
            opt.step(model.network().params());
        }
    }
    return model;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ShapeError("auroc: size mismatch");
    size_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l != 0 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw UndefinedMetricError("auroc needs both classes present");

    std::vector<size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // midranks over tie blocks
    std::vector<double> rank(scores.size(), 0.0);
    size_t i = 0;
    while (i < idx.size()) {
        size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (size_t k = i; k <= j; ++k) rank[idx[k]] = mid;
        i = j + 1;
    }

    double rank_sum_pos = 0.0;
    for (size_t k = 0; k < labels.size(); ++k)
        if (labels[k] != 0) rank_sum_pos += rank[k];
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

Summary summarize(const std::vector<double>& values) {
    Summary s;
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    for (double v : values) s.mean += v;
    s.mean /= n;
    double acc = 0.0;
    for (double v : values) acc += (v - s.mean) * (v - s.mean);
    s.std_dev = std::sqrt(acc / n);  // population std (N denominator)
    return s;
}

CVResult run_cv(const phantom::Dataset& dataset, const SynthBank& synth_bank, const CVConfig& cfg,
                bool use_synth) {
    if (cfg.oversample_factor < 0) throw ConfigError("run_cv: negative oversample_factor");
    const auto splits = phantom::split_kfold(dataset, cfg.k, derive_seed(cfg.seed, 0xF01D));

    CVResult result;
    for (int f = 0; f < cfg.k; ++f) {
        const phantom::KFoldSplit& split = splits[static_cast<size_t>(f)];
        const std::set<std::string> test_set(split.test_ids.begin(), split.test_ids.end());

        std::vector<LabeledImage> items;
        std::vector<std::string> synth_provenance;
        for (const std::string& id : split.train_ids) {
            const phantom::Sample* s = dataset.find(id);
            if (!s) throw UsageError("run_cv: unknown id " + id);
            items.push_back({&s->image, s->label == phantom::Label::kLesion ? 1 : 0});
        }
        if (use_synth && cfg.oversample_factor > 0) {
            for (const std::string& id : split.train_ids) {
                const phantom::Sample* s = dataset.find(id);
                if (s->label != phantom::Label::kLesion) continue;
                const auto it = synth_bank.find(id);
                if (it == synth_bank.end() || it->second.empty())
                    throw UsageError("run_cv: synth bank has no variants for " + id);
                for (int k = 0; k < cfg.oversample_factor; ++k) {
                    items.push_back({&it->second[static_cast<size_t>(k) % it->second.size()], 1});
                    synth_provenance.push_back(id);
                }
            }
            for (const std::string& prov : synth_provenance)
                if (test_set.count(prov))
                    throw LeakageError("synthetic from test-fold original " + prov +
                                       " entered training");
        }

        ClassifierHyper hyper = cfg.hyper;
        hyper.seed = derive_seed(cfg.seed, 1000 + static_cast<uint64_t>(f));
        Classifier model = train_classifier(items, dataset.config.image_size, hyper);

        FoldResult fr;
        fr.fold = f;
        std::vector<double> scores;
        std::vector<int> labels;
        for (const std::string& id : split.test_ids) {
            const phantom::Sample* s = dataset.find(id);
            const int label = s->label == phantom::Label::kLesion ? 1 : 0;
            const double score = model.lesion_score(s->image);
            const int pred = score > 0.5 ? 1 : 0;
            scores.push_back(score);
            labels.push_back(label);
            if (pred == 1 && label == 1) ++fr.tp;
            if (pred == 1 && label == 0) ++fr.fp;
            if (pred == 0 && label == 0) ++fr.tn;
            if (pred == 0 && label == 1) ++fr.fn;
        }
        fr.auroc = auroc(scores, labels);
        fr.accuracy = static_cast<double>(fr.tp + fr.tn) / static_cast<double>(scores.size());
        result.folds.push_back(fr);
    }

    std::vector<double> aurocs, accs;
    for (const FoldResult& fr : result.folds) {
        aurocs.push_back(fr.auroc);
        accs.push_back(fr.accuracy);
    }
    result.auroc_summary = summarize(aurocs);
    result.accuracy_summary = summarize(accs);
    return result;
}

namespace {

// align_corners=false bilinear resize of a single plane
std::vector<double> bilinear_resize(const std::vector<double>& src, int sw, int sh, int dw,
                                    int dh) {
    std::vector<double> dst(static_cast<size_t>(dw) * dh);
    const double sx_scale = static_cast<double>(sw) / dw;
    const double sy_scale = static_cast<double>(sh) / dh;
    for (int y = 0; y < dh; ++y) {
        const double sy = std::clamp((y + 0.5) * sy_scale - 0.5, 0.0, static_cast<double>(sh - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, sh - 1);
        const double fy = sy - y0;
        for (int x = 0; x < dw; ++x) {
            const double sx =
                std::clamp((x + 0.5) * sx_scale - 0.5, 0.0, static_cast<double>(sw - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, sw - 1);
            const double fx = sx - x0;
            const double v00 = src[static_cast<size_t>(y0) * sw + x0];
            const double v01 = src[static_cast<size_t>(y0) * sw + x1];
            const double v10 = src[static_cast<size_t>(y1) * sw + x0];
            const double v11 = src[static_cast<size_t>(y1) * sw + x1];
            dst[static_cast<size_t>(y) * dw + x] =
                (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
        }
    }
    return dst;
}

}  // namespace

Heatmap grad_cam(Classifier& model, const Image& image, int target_class) {
    auto& net = model.network();
    std::vector<Tensor> taps;
    const Tensor logits = net.forward_collect(Classifier::image_tensor(image), taps);
    if (target_class < 0 || target_class >= static_cast<int>(logits.size()))
        throw UsageError("grad_cam: bad target class");

    Tensor dlogits(logits.shape);
    dlogits.data[static_cast<size_t>(target_class)] = 1.0;
    net.zero_grads();
    std::vector<Tensor> boundary;
    net.backward(dlogits, &boundary);
    net.zero_grads();

    const Tensor& maps = taps.at(Classifier::kFinalConvTap);
    const Tensor& dmaps = boundary.at(Classifier::kFinalConvTap);
    const int c = maps.shape[0], h = maps.shape[1], w = maps.shape[2];

    std::vector<double> cam(static_cast<size_t>(h) * w, 0.0);
    for (int ch = 0; ch < c; ++ch) {
        const double* dplane = dmaps.data.data() + static_cast<size_t>(ch) * h * w;
        double weight = 0.0;
        for (int i = 0; i < h * w; ++i) weight += dplane[i];
        weight /= static_cast<double>(h * w);
        const double* aplane = maps.data.data() + static_cast<size_t>(ch) * h * w;
        for (int i = 0; i < h * w; ++i) cam[static_cast<size_t>(i)] += weight * aplane[i];
    }
    for (double& v : cam) v = std::max(0.0, v);

    Heatmap hm;
    hm.width = image.width;
    hm.height = image.height;
    hm.data = bilinear_resize(cam, w, h, image.width, image.height);
    double max_v = 0.0;
    for (double v : hm.data) max_v = std::max(max_v, v);
    if (max_v > 0.0)
        for (double& v : hm.data) v /= max_v;
    return hm;
}

double heatmap_containment(const Heatmap& heatmap, const Mask& mask) {
    if (heatmap.width != mask.width || heatmap.height != mask.height)
        throw ShapeError("heatmap_containment: shape mismatch");
    double inside = 0.0, total = 0.0;
    for (size_t i = 0; i < heatmap.data.size(); ++i) {
        total += heatmap.data[i];
        if (mask.data[i]) inside += heatmap.data[i];
    }
    return total > 0.0 ? inside / total : 0.0;
}

}  // namespace lesionforge::evaluator
