#include "lesionforge/json_util.hpp"

#include <algorithm>
#include <fstream>

#include "lesionforge/errors.hpp"

namespace lesionforge {

void check_keys(const Json& obj, const std::string& context,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(context + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* a) { return key == a; });
        if (!known) throw ConfigError(context + ": unknown key \"" + key + "\"");
    }
}

Json load_json_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path.string());
    try {
        return Json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

void save_json_file(const std::filesystem::path& path, const Json& doc) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + path.string());
    f << doc.dump(2) << '\n';
    if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace lesionforge
