#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "lesionforge/image.hpp"
#include "lesionforge/network.hpp"

namespace lesionforge::metrics {

// Deterministic pairwise (cascade) summation; the reduction order is part
// of the reproducibility contract.
double pairwise_sum(const double* data, size_t n);
double pairwise_sum(const std::vector<double>& v);

// 10*log10(1/MSE) over the whole image or a mask region; +inf when MSE=0.
double psnr(const Image& a, const Image& b, const Mask* region = nullptr);

// Windowed SSIM on Rec.601 luma: 11x11 Gaussian window sigma 1.5,
// K1=0.01, K2=0.03, L=1, windows fully inside the image. The region
// variant averages windows whose center pixel is inside the mask.
double ssim(const Image& a, const Image& b, const Mask* region = nullptr);

// Task-trained stand-in for a pretrained perceptual backbone: a classifier
// network plus declared tap layers. Pooled features drive the Frechet
// distance; per-layer maps drive the perceptual distance. Absolute values
// are not comparable across extractors; identities and orderings are.
struct FeatureExtractor {
    tensornet::Sequential* network = nullptr;
    std::vector<size_t> perceptual_taps;  // conv block outputs
    size_t pooled_tap = 0;                // penultimate (pooled) layer
    int feature_dim = 64;
    int input_size = 64;
    std::string checkpoint_id;

    std::vector<double> pooled_features(const Image& img) const;
};

// LPIPS-style: unit-normalize each feature map across channels per
// location, mean squared difference, averaged over declared tap layers.
double perceptual_distance(const Image& a, const Image& b, const FeatureExtractor& fx);

// ||mu1-mu2||^2 + tr(C1 + C2 - 2 (C1 C2)^{1/2}), matrix square roots via
// eigendecomposition of the symmetrized forms, eigenvalues below 1e-10
// clamped to zero. Results in [-1e-6, 0) floor to 0.
double frechet_distance(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& c1,
                        const Eigen::VectorXd& mu2, const Eigen::MatrixXd& c2);

struct GaussianStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;  // N-1 denominator
};

GaussianStats feature_stats(const std::vector<std::vector<double>>& features);

double fid_from_features(const std::vector<std::vector<double>>& fa,
                         const std::vector<std::vector<double>>& fb);

double fid(const std::vector<Image>& set_a, const std::vector<Image>& set_b,
           const FeatureExtractor& fx);

struct MetricReport {
    double psnr_db = 0.0;
    double ssim_score = 0.0;
    double perc = 0.0;
    double fid_score = 0.0;
    double psnr_mask_db = 0.0;
    double ssim_mask = 0.0;
    int n_pairs = 0;
    std::string extractor_id;
};

// Paired quality report: element i of `originals` pairs with element i of
// `synthesized`; region metrics use the matching inpainting mask. The FID
// column compares fid_reference (the real lesion set, no duplicates)
// against all synthesized images.
MetricReport compute_report(const std::vector<const Image*>& originals,
                            const std::vector<const Image*>& synthesized,
                            const std::vector<const Mask*>& masks,
                            const std::vector<Image>& fid_reference, const FeatureExtractor& fx);

}  // namespace lesionforge::metrics
