#include "lesionforge/metrics.hpp"

#include <cmath>
#include <iostream>
#include <limits>

#include "lesionforge/errors.hpp"

namespace lesionforge::metrics {

double pairwise_sum(const double* data, size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double acc = data[0];
        for (size_t i = 1; i < n; ++i) acc += data[i];
        return acc;
    }
    const size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

double psnr(const Image& a, const Image& b, const Mask* region) {
    if (!a.same_shape(b)) throw ShapeError("psnr: shape mismatch");
    if (region && (region->width != a.width || region->height != a.height))
        throw ShapeError("psnr: region shape mismatch");

    std::vector<double> sq;
    sq.reserve(a.data.size());
    const size_t hw = a.pixel_count();
    for (size_t p = 0; p < hw; ++p) {
        if (region && !region->data[p]) continue;
        for (int c = 0; c < 3; ++c) {
            const double d = a.data[p * 3 + c] - b.data[p * 3 + c];
            sq.push_back(d * d);
        }
    }
    if (sq.empty()) throw EmptyInputError("psnr: empty region");
    const double mse = pairwise_sum(sq) / static_cast<double>(sq.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kWin = 11;
constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2
constexpr double kC2 = 0.03 * 0.03;  // (K2*L)^2

const std::vector<double>& ssim_window() {
    static const std::vector<double> w = [] {
        std::vector<double> win(kWin * kWin);
        const double sigma = 1.5;
        double sum = 0.0;
        for (int y = 0; y < kWin; ++y)
            for (int x = 0; x < kWin; ++x) {
                const double dx = x - kWin / 2, dy = y - kWin / 2;
                const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                win[static_cast<size_t>(y) * kWin + x] = v;
                sum += v;
            }
        for (double& v : win) v /= sum;
        return win;
    }();
    return w;
}

}  // namespace

double ssim(const Image& a, const Image& b, const Mask* region) {
    if (!a.same_shape(b)) throw ShapeError("ssim: shape mismatch");
    if (region && (region->width != a.width || region->height != a.height))
        throw ShapeError("ssim: region shape mismatch");
    if (a.width < kWin || a.height < kWin)
        throw ShapeError("ssim: image smaller than the 11x11 window");

    const std::vector<double> la = to_luma(a);
    const std::vector<double> lb = to_luma(b);
    const std::vector<double>& win = ssim_window();
    const int half = kWin / 2;

    std::vector<double> scores;
    for (int cy = half; cy < a.height - half; ++cy) {
        for (int cx = half; cx < a.width - half; ++cx) {
            if (region && !region->at(cx, cy)) continue;
            double mu_a = 0.0, mu_b = 0.0;
            const double* wp = win.data();
            for (int wy = -half; wy <= half; ++wy)
                for (int wx = -half; wx <= half; ++wx, ++wp) {
                    const size_t i = static_cast<size_t>(cy + wy) * a.width + (cx + wx);
                    mu_a += *wp * la[i];
                    mu_b += *wp * lb[i];
                }
            double var_a = 0.0, var_b = 0.0, cov = 0.0;
            wp = win.data();
            for (int wy = -half; wy <= half; ++wy)
                for (int wx = -half; wx <= half; ++wx, ++wp) {
                    const size_t i = static_cast<size_t>(cy + wy) * a.width + (cx + wx);
                    const double da = la[i] - mu_a, db = lb[i] - mu_b;
                    var_a += *wp * (da * da);
                    var_b += *wp * (db * db);
                    cov += *wp * (da * db);  // grouped so ssim(a,b) == ssim(b,a) bitwise
                }
            const double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
            const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
            scores.push_back(num / den);
        }
    }
    if (scores.empty()) throw EmptyInputError("ssim: no fully-interior windows in region");
    return pairwise_sum(scores) / static_cast<double>(scores.size());
}

std::vector<double> FeatureExtractor::pooled_features(const Image& img) const {
    if (!network) throw UsageError("feature extractor: no network");
    if (img.width != input_size || img.height != input_size)
        throw ShapeError("feature extractor: input must be " + std::to_string(input_size) + "px");
    tensornet::Tensor x({3, img.height, img.width});
    const size_t hw = img.pixel_count();
    for (size_t i = 0; i < hw; ++i)
        for (int c = 0; c < 3; ++c) x.data[static_cast<size_t>(c) * hw + i] = img.data[i * 3 + c];
    std::vector<tensornet::Tensor> taps;
    network->forward_collect(x, taps);
    const tensornet::Tensor& pooled = taps.at(pooled_tap);
    if (static_cast<int>(pooled.size()) != feature_dim)
        throw ShapeError("feature extractor: pooled dim mismatch");
    return pooled.data;
}

double perceptual_distance(const Image& a, const Image& b, const FeatureExtractor& fx) {
    if (!fx.network) throw UsageError("perceptual_distance: no network");
    if (!a.same_shape(b)) throw ShapeError("perceptual_distance: shape mismatch");

    auto collect = [&](const Image& img) {
        tensornet::Tensor x({3, img.height, img.width});
        const size_t hw = img.pixel_count();
        for (size_t i = 0; i < hw; ++i)
            for (int c = 0; c < 3; ++c)
                x.data[static_cast<size_t>(c) * hw + i] = img.data[i * 3 + c];
        std::vector<tensornet::Tensor> taps;
        fx.network->forward_collect(x, taps);
        return taps;
    };
    const std::vector<tensornet::Tensor> ta = collect(a);
    const std::vector<tensornet::Tensor> tb = collect(b);

    // channel-unit-normalize at each spatial location, then mean squared diff
    auto normalized = [](const tensornet::Tensor& t) {
        tensornet::Tensor out = t;
        const int c = t.shape[0], hw = t.shape[1] * t.shape[2];
        for (int i = 0; i < hw; ++i) {
            double norm2 = 0.0;
            for (int ch = 0; ch < c; ++ch) {
                const double v = t.data[static_cast<size_t>(ch) * hw + i];
                norm2 += v * v;
            }
            const double inv = 1.0 / std::sqrt(norm2 + 1e-10);
            for (int ch = 0; ch < c; ++ch)
                out.data[static_cast<size_t>(ch) * hw + i] =
                    t.data[static_cast<size_t>(ch) * hw + i] * inv;
        }
        return out;
    };

    std::vector<double> layer_scores;
    for (size_t tap : fx.perceptual_taps) {
        const tensornet::Tensor na = normalized(ta.at(tap));
        const tensornet::Tensor nb = normalized(tb.at(tap));
        std::vector<double> sq(na.size());
        for (size_t i = 0; i < na.size(); ++i) {
            const double d = na.data[i] - nb.data[i];
            sq[i] = d * d;
        }
        layer_scores.push_back(pairwise_sum(sq) / static_cast<double>(sq.size()));
    }
    if (layer_scores.empty()) throw UsageError("perceptual_distance: no tap layers declared");
    return pairwise_sum(layer_scores) / static_cast<double>(layer_scores.size());
}

namespace {

constexpr double kEigClamp = 1e-10;

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    Eigen::VectorXd vals = eig.eigenvalues();
    for (Eigen::Index i = 0; i < vals.size(); ++i)
        vals[i] = vals[i] > kEigClamp ? std::sqrt(vals[i]) : 0.0;
    return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& c1,
                        const Eigen::VectorXd& mu2, const Eigen::MatrixXd& c2) {
    if (mu1.size() != mu2.size() || c1.rows() != mu1.size() || c2.rows() != mu2.size() ||
        c1.rows() != c1.cols() || c2.rows() != c2.cols())
        throw ShapeError("frechet_distance: dimension mismatch");
    if (!mu1.allFinite() || !mu2.allFinite() || !c1.allFinite() || !c2.allFinite())
        throw NumericError("frechet_distance: non-finite input");

    const Eigen::MatrixXd s1 = 0.5 * (c1 + c1.transpose());
    const Eigen::MatrixXd s2 = 0.5 * (c2 + c2.transpose());

    const Eigen::MatrixXd sqrt_s1 = psd_sqrt(s1);
    // sqrt of the product via the symmetric similarity sqrt(C1) C2 sqrt(C1)
    const Eigen::MatrixXd inner = sqrt_s1 * s2 * sqrt_s1;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()));
    double trace_sqrt = 0.0;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        const double v = eig.eigenvalues()[i];
        if (v > kEigClamp) trace_sqrt += std::sqrt(v);
    }

    const double d =
        (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * trace_sqrt;
    if (d < 0.0) {
        if (d >= -1e-6) return 0.0;
        throw NumericError("frechet_distance: negative result " + std::to_string(d));
    }
    return d;
}

GaussianStats feature_stats(const std::vector<std::vector<double>>& features) {
    if (features.empty()) throw EmptyInputError("feature_stats: empty set");
    const size_t n = features.size();
    const size_t d = features[0].size();
    for (const auto& f : features)
        if (f.size() != d) throw ShapeError("feature_stats: inconsistent dims");

    GaussianStats stats;
    stats.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    std::vector<double> column(n);
    for (size_t j = 0; j < d; ++j) {
        for (size_t i = 0; i < n; ++i) column[i] = features[i][j];
        stats.mean[static_cast<Eigen::Index>(j)] = pairwise_sum(column) / static_cast<double>(n);
    }

    stats.cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    if (n < 2) return stats;
    std::vector<double> prod(n);
    for (size_t j = 0; j < d; ++j) {
        for (size_t k = j; k < d; ++k) {
            for (size_t i = 0; i < n; ++i)
                prod[i] = (features[i][j] - stats.mean[static_cast<Eigen::Index>(j)]) *
                          (features[i][k] - stats.mean[static_cast<Eigen::Index>(k)]);
            const double c = pairwise_sum(prod) / static_cast<double>(n - 1);
            stats.cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = c;
            stats.cov(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = c;
        }
    }
    return stats;
}

double fid_from_features(const std::vector<std::vector<double>>& fa,
                         const std::vector<std::vector<double>>& fb) {
    if (fa.empty() || fb.empty()) throw EmptyInputError("fid: empty feature set");
    const size_t d = fa[0].size();
    if (fa.size() <= d || fb.size() <= d)
        std::cerr << "[lesionforge] warning: fid sample count (" << fa.size() << "," << fb.size()
                  << ") <= feature dim " << d << "; covariance is rank-deficient\n";
    const GaussianStats sa = feature_stats(fa);
    const GaussianStats sb = feature_stats(fb);
    return frechet_distance(sa.mean, sa.cov, sb.mean, sb.cov);
}

double fid(const std::vector<Image>& set_a, const std::vector<Image>& set_b,
           const FeatureExtractor& fx) {
    if (set_a.empty() || set_b.empty()) throw EmptyInputError("fid: empty image set");
    std::vector<std::vector<double>> fa, fb;
    fa.reserve(set_a.size());
    fb.reserve(set_b.size());
    for (const Image& img : set_a) fa.push_back(fx.pooled_features(img));
    for (const Image& img : set_b) fb.push_back(fx.pooled_features(img));
    return fid_from_features(fa, fb);
}

MetricReport compute_report(const std::vector<const Image*>& originals,
                            const std::vector<const Image*>& synthesized,
                            const std::vector<const Mask*>& masks,
                            const std::vector<Image>& fid_reference, const FeatureExtractor& fx) {
    if (originals.size() != synthesized.size() || originals.size() != masks.size())
        throw ShapeError("compute_report: pair count mismatch");
    if (originals.empty()) throw EmptyInputError("compute_report: no pairs");

    MetricReport r;
    r.n_pairs = static_cast<int>(originals.size());
    r.extractor_id = fx.checkpoint_id;

    std::vector<double> psnrs, ssims, percs, psnrs_mask, ssims_mask;
    for (size_t i = 0; i < originals.size(); ++i) {
        psnrs.push_back(psnr(*originals[i], *synthesized[i]));
        ssims.push_back(ssim(*originals[i], *synthesized[i]));
        percs.push_back(perceptual_distance(*originals[i], *synthesized[i], fx));
        psnrs_mask.push_back(psnr(*originals[i], *synthesized[i], masks[i]));
        ssims_mask.push_back(ssim(*originals[i], *synthesized[i], masks[i]));
    }
    const double n = static_cast<double>(originals.size());
    r.psnr_db = pairwise_sum(psnrs) / n;
    r.ssim_score = pairwise_sum(ssims) / n;
    r.perc = pairwise_sum(percs) / n;
    r.psnr_mask_db = pairwise_sum(psnrs_mask) / n;
    r.ssim_mask = pairwise_sum(ssims_mask) / n;

    std::vector<Image> set_b;
    for (const Image* img : synthesized) set_b.push_back(*img);
    r.fid_score = fid(fid_reference, set_b, fx);
    return r;
}

}  // namespace lesionforge::metrics
