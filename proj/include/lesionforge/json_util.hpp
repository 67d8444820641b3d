#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>

#include <json.hpp>

namespace lesionforge {

using Json = nlohmann::ordered_json;

// Rejects unknown keys: every key in `obj` must appear in `allowed`.
void check_keys(const Json& obj, const std::string& context,
                std::initializer_list<const char*> allowed);

Json load_json_file(const std::filesystem::path& path);

// Canonical file form: 2-space indent, trailing newline.
void save_json_file(const std::filesystem::path& path, const Json& doc);

}  // namespace lesionforge
