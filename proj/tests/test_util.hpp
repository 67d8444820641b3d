#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "lesionforge/rng.hpp"
#include "lesionforge/tensor.hpp"

namespace lftest {

// relative error with a floor so near-zero pairs do not explode
inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

inline lesionforge::tensornet::Tensor randn_tensor(std::vector<int> shape, lesionforge::Rng& rng,
                                                   double scale = 1.0) {
    lesionforge::tensornet::Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.normal() * scale;
    return t;
}

// map of relative path -> file bytes, sorted paths
inline std::map<std::string, std::string> dir_contents(const std::filesystem::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream f(entry.path(), std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        out[std::filesystem::relative(entry.path(), root).string()] = std::move(bytes);
    }
    return out;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
    const std::filesystem::path p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace lftest
