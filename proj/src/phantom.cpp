#include "lesionforge/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "lesionforge/errors.hpp"
#include "lesionforge/rng.hpp"

namespace lesionforge::phantom {

namespace {

// Unit-variance smoothed noise plane: white noise blurred at `scale` px,
// then renormalized so the amplitude knob in the palette means what it says.
std::vector<double> smooth_noise_plane(Rng& rng, int size, double scale) {
    std::vector<double> plane(static_cast<size_t>(size) * size);
    for (double& v : plane) v = rng.normal();
    plane = gaussian_blur_plane(plane, size, size, scale);

    double mean = 0.0;
    for (double v : plane) mean += v;
    mean /= static_cast<double>(plane.size());
    double var = 0.0;
    for (double v : plane) var += (v - mean) * (v - mean);
    var /= static_cast<double>(plane.size());
    const double inv_std = (var > 1e-18) ? 1.0 / std::sqrt(var) : 0.0;
    for (double& v : plane) v = (v - mean) * inv_std;
    return plane;
}

struct BlobShape {
    double cx = 0.0, cy = 0.0;
    double base_radius = 0.0;
    // radius(theta) = base_radius * (1 + sum_k amp[k] * sin((k+2) theta + phase[k]))
    std::array<double, 3> amp{};
    std::array<double, 3> phase{};

    double radius_at(double theta) const {
        double f = 1.0;
        for (int k = 0; k < 3; ++k) f += amp[k] * std::sin((k + 2) * theta + phase[k]);
        return base_radius * f;
    }
    bool contains(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        const double d = std::sqrt(dx * dx + dy * dy);
        if (d < 1e-12) return true;
        return d <= radius_at(std::atan2(dy, dx));
    }
};

Mask rasterize_blob(const BlobShape& blob, int size) {
    Mask mask(size, size);
    const int r_max = static_cast<int>(std::ceil(blob.base_radius * 1.3)) + 1;
    const int x0 = std::max(0, static_cast<int>(blob.cx) - r_max);
    const int x1 = std::min(size - 1, static_cast<int>(blob.cx) + r_max);
    const int y0 = std::max(0, static_cast<int>(blob.cy) - r_max);
    const int y1 = std::min(size - 1, static_cast<int>(blob.cy) + r_max);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if (blob.contains(x, y)) mask.at(x, y) = 1;
    return mask;
}

}  // namespace

void PhantomConfig::validate() const {
    if (n_normal < 0 || n_lesion < 0) throw ConfigError("phantom: negative sample count");
    if (image_size < 16) throw ConfigError("phantom: image_size must be >= 16");
    if (lesion_count_range[0] < 1 || lesion_count_range[1] < lesion_count_range[0])
        throw ConfigError("phantom: bad lesion_count_range");
    if (!(lesion_radius_range[0] > 0.0) || lesion_radius_range[1] > 0.5 ||
        lesion_radius_range[1] < lesion_radius_range[0])
        throw ConfigError("phantom: lesion_radius_range must lie in (0, 0.5]");
    if (texture_scale <= 0.0) throw ConfigError("phantom: texture_scale must be > 0");
    if (min_color_separation < 0.0) throw ConfigError("phantom: negative min_color_separation");
}

Sample render_phantom(const PhantomConfig& config, uint64_t sample_seed, bool with_lesion,
                      const std::string& id) {
    config.validate();
    Rng rng(sample_seed);
    const int size = config.image_size;
    const Palette& pal = config.palette;

    Sample sample;
    sample.id = id;
    sample.label = with_lesion ? Label::kLesion : Label::kNormal;
    sample.image = Image(size, size);

    // background: band-limited noise around the background palette
    const std::vector<double> shade = smooth_noise_plane(rng, size, config.texture_scale);
    for (int c = 0; c < 3; ++c) {
        const std::vector<double> chroma = smooth_noise_plane(rng, size, config.texture_scale);
        for (size_t i = 0; i < shade.size(); ++i) {
            const double v = pal.background_mean[c] +
                             pal.background_variation * (0.6 * shade[i] + 0.4 * chroma[i]);
            sample.image.data[i * 3 + c] = clamp01(v);
        }
    }

    if (!with_lesion) return sample;

    const int n_lesions =
        static_cast<int>(rng.uniform_int(config.lesion_count_range[0], config.lesion_count_range[1]));

    // placement: blobs must fit inside the frame and stay apart so each
    // keeps its own tight box
    std::vector<BlobShape> blobs;
    for (int j = 0; j < n_lesions; ++j) {
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            BlobShape blob;
            blob.base_radius =
                rng.uniform(config.lesion_radius_range[0], config.lesion_radius_range[1]) * size;
            const double margin = blob.base_radius * 1.3 + 2.0;
            if (2.0 * margin >= size) continue;  // this radius cannot fit, burn the attempt
            blob.cx = rng.uniform(margin, size - margin);
            blob.cy = rng.uniform(margin, size - margin);
            for (int k = 0; k < 3; ++k) {
                blob.amp[k] = rng.uniform(0.0, 0.12 / (k + 1));
                blob.phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
            }
            bool clear = true;
            for (const BlobShape& other : blobs) {
                const double dx = blob.cx - other.cx, dy = blob.cy - other.cy;
                const double min_gap = 1.3 * (blob.base_radius + other.base_radius) + 3.0;
                if (dx * dx + dy * dy < min_gap * min_gap) {
                    clear = false;
                    break;
                }
            }
            if (clear) {
                blobs.push_back(blob);
                placed = true;
            }
        }
        if (!placed)
            throw ConfigError("phantom: could not place " + std::to_string(n_lesions) +
                              " lesions (radius too large for requested count)");
    }

    // lesion texture: distinct mean color, finer-grained and stronger noise
    for (const BlobShape& blob : blobs) {
        Mask mask = rasterize_blob(blob, size);
        std::array<double, 3> mean_jitter{};
        for (double& v : mean_jitter) v = rng.uniform(-0.04, 0.04);
        std::array<std::vector<double>, 3> tex;
        for (int c = 0; c < 3; ++c) tex[c] = smooth_noise_plane(rng, size, 1.5);

        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                if (!mask.at(x, y)) continue;
                const size_t i = static_cast<size_t>(y) * size + x;
                for (int c = 0; c < 3; ++c) {
                    const double v = pal.lesion_mean[c] + mean_jitter[c] +
                                     pal.lesion_variation * tex[c][i];
                    sample.image.data[i * 3 + c] = clamp01(v);
                }
            }
        }
        sample.boxes.push_back(tight_bbox(mask));
        sample.masks.push_back(std::move(mask));
    }

    // separability contract: lesion vs background mean gap per lesion
    Mask any_lesion(size, size);
    for (const Mask& m : sample.masks)
        for (size_t i = 0; i < m.data.size(); ++i) any_lesion.data[i] |= m.data[i];
    std::array<double, 3> bg_mean{};
    size_t bg_n = 0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if (!any_lesion.at(x, y)) {
                for (int c = 0; c < 3; ++c) bg_mean[c] += sample.image.at(x, y, c);
                ++bg_n;
            }
    for (double& v : bg_mean) v /= static_cast<double>(std::max<size_t>(bg_n, 1));
    for (const Mask& m : sample.masks) {
        std::array<double, 3> lesion_mean{};
        size_t n = 0;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                if (m.at(x, y)) {
                    for (int c = 0; c < 3; ++c) lesion_mean[c] += sample.image.at(x, y, c);
                    ++n;
                }
        double diff = 0.0;
        for (int c = 0; c < 3; ++c)
            diff += std::abs(lesion_mean[c] / static_cast<double>(n) - bg_mean[c]);
        diff /= 3.0;
        if (diff < config.min_color_separation)
            throw ConfigError("phantom: lesion/background separation " + std::to_string(diff) +
                              " below configured minimum");
    }

    return sample;
}

Dataset generate_dataset(const PhantomConfig& config) {
    config.validate();
    Dataset ds;
    ds.config = config;
    ds.seed = config.seed;
    ds.samples.reserve(static_cast<size_t>(config.n_normal) + config.n_lesion);

    char buf[32];
    for (int i = 0; i < config.n_normal; ++i) {
        std::snprintf(buf, sizeof(buf), "normal_%04d", i);
        ds.samples.push_back(
            render_phantom(config, derive_seed(config.seed, static_cast<uint64_t>(i)), false, buf));
    }
    for (int i = 0; i < config.n_lesion; ++i) {
        std::snprintf(buf, sizeof(buf), "lesion_%04d", i);
        const uint64_t index = static_cast<uint64_t>(config.n_normal) + i;
        ds.samples.push_back(render_phantom(config, derive_seed(config.seed, index), true, buf));
    }
    return ds;
}

const Sample* Dataset::find(const std::string& id) const {
    for (const Sample& s : samples)
        if (s.id == id) return &s;
    return nullptr;
}

std::vector<KFoldSplit> split_kfold(const Dataset& dataset, int k, uint64_t seed) {
    if (k < 2) throw StratificationError("k must be >= 2");

    std::map<Label, std::vector<std::string>> by_class;
    for (const Sample& s : dataset.samples) by_class[s.label].push_back(s.id);
    for (const auto& [label, ids] : by_class)
        if (static_cast<int>(ids.size()) < k)
            throw StratificationError(std::string("class ") + label_name(label) + " has " +
                                      std::to_string(ids.size()) + " members, fewer than k=" +
                                      std::to_string(k));

    std::vector<std::vector<std::string>> test_folds(static_cast<size_t>(k));
    int offset = 0;  // rotates per-class leftovers across folds
    int class_index = 0;
    for (auto& [label, ids] : by_class) {
        Rng rng(derive_seed(seed, static_cast<uint64_t>(class_index++)));
        for (size_t i = ids.size(); i > 1; --i)
            std::swap(ids[i - 1], ids[rng.uniform_int(0, static_cast<int64_t>(i) - 1)]);
        for (size_t i = 0; i < ids.size(); ++i)
            test_folds[(offset + i) % k].push_back(ids[i]);
        offset = (offset + static_cast<int>(ids.size() % k)) % k;
    }

    std::vector<KFoldSplit> splits(static_cast<size_t>(k));
    for (int f = 0; f < k; ++f) {
        std::sort(test_folds[f].begin(), test_folds[f].end());
        splits[f].test_ids = test_folds[f];
        for (const Sample& s : dataset.samples) {
            if (!std::binary_search(test_folds[f].begin(), test_folds[f].end(), s.id))
                splits[f].train_ids.push_back(s.id);
        }
        std::sort(splits[f].train_ids.begin(), splits[f].train_ids.end());
    }
    return splits;
}

}  // namespace lesionforge::phantom
