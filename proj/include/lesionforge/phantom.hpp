#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lesionforge/image.hpp"

namespace lesionforge::phantom {

struct Palette {
    std::array<double, 3> background_mean{0.72, 0.48, 0.45};
    std::array<double, 3> lesion_mean{0.42, 0.16, 0.18};
    double background_variation = 0.035;
    double lesion_variation = 0.06;
};

struct PhantomConfig {
    int n_normal = 29;
    int n_lesion = 127;   // default 145:632 ratio at 1/5 scale
    int image_size = 64;
    std::array<int, 2> lesion_count_range{1, 2};
    std::array<double, 2> lesion_radius_range{0.10, 0.18};  // fraction of image size
    Palette palette;
    double texture_scale = 6.0;          // px, background noise correlation length
    double min_color_separation = 0.15;  // contracted lesion/background mean gap
    uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

enum class Label { kNormal, kLesion };

inline const char* label_name(Label l) { return l == Label::kNormal ? "normal" : "lesion"; }

struct Sample {
    std::string id;
    Image image;
    Label label = Label::kNormal;
    std::vector<Mask> masks;  // one per lesion; empty for normal
    std::vector<BBox> boxes;  // tight bound of each mask, normalized
};

struct Dataset {
    std::vector<Sample> samples;
    PhantomConfig config;
    uint64_t seed = 0;

    const Sample* find(const std::string& id) const;
};

// Renders one phantom. Deterministic for a fixed (config, seed, id).
// Throws ConfigError when the requested lesions cannot be placed.
Sample render_phantom(const PhantomConfig& config, uint64_t sample_seed, bool with_lesion,
                      const std::string& id);

// n_normal normal + n_lesion lesion samples; per-sample seed is
// derive_seed(config.seed, sample_index) with normals occupying the
// first indices.
Dataset generate_dataset(const PhantomConfig& config);

struct KFoldSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
};

// Stratified k-fold: per-class counts across test folds differ by <= 1 and
// leftover samples rotate across folds so total fold sizes also differ by <= 1.
std::vector<KFoldSplit> split_kfold(const Dataset& dataset, int k, uint64_t seed);

}  // namespace lesionforge::phantom
