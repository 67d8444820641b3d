#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lesionforge/json_util.hpp"
#include "lesionforge/phantom.hpp"

namespace lesionforge {

// On-disk dataset layout:
//   dataset/images/{id}.png        8-bit RGB
//   dataset/labels/{id}.txt        "0 {cx} {cy} {w} {h}" per box, 6 decimals; empty for normal
//   dataset/masks/{id}_{j}.png     8-bit gray, 0 or 255
//   dataset/meta.json              config echo, seed, id->label map

void save_dataset(const phantom::Dataset& dataset, const std::filesystem::path& dir);

// Loads everything back (images re-enter as 8-bit quantized values).
phantom::Dataset load_dataset(const std::filesystem::path& dir);

std::string format_label_line(const BBox& box);
std::vector<BBox> parse_label_file(const std::filesystem::path& path);

Json phantom_config_to_json(const phantom::PhantomConfig& config);
phantom::PhantomConfig phantom_config_from_json(const Json& j);

}  // namespace lesionforge
