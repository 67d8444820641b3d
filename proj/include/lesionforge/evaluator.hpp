#pragma once

#include <map>
#include <string>
#include <vector>

#include "lesionforge/image.hpp"
#include "lesionforge/network.hpp"
#include "lesionforge/phantom.hpp"

namespace lesionforge::evaluator {

struct LabeledImage {
    const Image* image = nullptr;
    int label = 0;  // 0 = normal, 1 = lesion
};

struct ClassifierHyper {
    int epochs = 30;
    double learning_rate = 1e-3;
    int batch_size = 8;
    uint64_t seed = 0;
};

// Small CNN: three stride-2 conv/groupnorm/relu blocks (16,32,64), global
// average pool, dense to 2 logits. The pooled 64-vector doubles as the
// metrics feature extractor; the last conv block feeds Grad-CAM.
class Classifier {
public:
    static constexpr size_t kBlock1Tap = 2;
    static constexpr size_t kBlock2Tap = 5;
    static constexpr size_t kFinalConvTap = 8;
    static constexpr size_t kPooledTap = 9;
    static constexpr int kFeatureDim = 64;

    Classifier(int image_size, uint64_t init_seed);

    tensornet::Tensor logits(const Image& img);
    double lesion_score(const Image& img);  // softmax probability of class 1
    int predict(const Image& img);

    tensornet::Sequential& network() { return net_; }
    int image_size() const { return image_size_; }

    static tensornet::Tensor image_tensor(const Image& img);

private:
    int image_size_;
    tensornet::Sequential net_;
};

// Cross-entropy + Adam, deterministic per seed. Throws ConfigError when the
// training set is single-class.
Classifier train_classifier(const std::vector<LabeledImage>& train, int image_size,
                            const ClassifierHyper& hyper);

// Mann-Whitney AUROC with midrank tie handling: U / (n_pos * n_neg).
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

struct Summary {
    double mean = 0.0;
    double std_dev = 0.0;  // population (N denominator)
};
Summary summarize(const std::vector<double>& values);

struct FoldResult {
    int fold = 0;
    double auroc = 0.0;
    double accuracy = 0.0;
    int tp = 0, fp = 0, tn = 0, fn = 0;
};

struct CVConfig {
    int k = 5;
    int oversample_factor = 4;  // synthetics per lesion original, train folds only
    ClassifierHyper hyper;
    uint64_t seed = 0;
};

struct CVResult {
    std::vector<FoldResult> folds;
    Summary auroc_summary;
    Summary accuracy_summary;
};

using SynthBank = std::map<std::string, std::vector<Image>>;

// Stratified k-fold protocol. With use_synth, each training-fold lesion
// original contributes oversample_factor synthetic copies drawn from the
// bank (cycling variants); a runtime guard rejects any synthetic whose
// provenance id sits in the test fold.
CVResult run_cv(const phantom::Dataset& dataset, const SynthBank& synth_bank, const CVConfig& cfg,
                bool use_synth);

struct Heatmap {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // >= 0, max-normalized (all-zero stays zero)

    double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
};

// Grad-CAM on the final conv block: channel weights are the spatial mean
// of d(logit_target)/d(activation); heatmap = relu(sum_k w_k A_k),
// bilinearly upsampled to the input size and divided by its max.
Heatmap grad_cam(Classifier& model, const Image& image, int target_class);

// heatmap mass inside the mask / total mass
double heatmap_containment(const Heatmap& heatmap, const Mask& mask);

}  // namespace lesionforge::evaluator
