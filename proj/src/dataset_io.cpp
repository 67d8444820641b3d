#include "lesionforge/dataset_io.hpp"

#include <cstdio>
#include <fstream>

#include "lesionforge/errors.hpp"
#include "lesionforge/png_io.hpp"

namespace lesionforge {

namespace fs = std::filesystem;

std::string format_label_line(const BBox& box) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d %.6f %.6f %.6f %.6f", box.class_id, box.cx, box.cy,
                  box.w, box.h);
    return buf;
}

std::vector<BBox> parse_label_file(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path.string());
    std::vector<BBox> boxes;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        BBox b;
        if (std::sscanf(line.c_str(), "%d %lf %lf %lf %lf", &b.class_id, &b.cx, &b.cy, &b.w,
                        &b.h) != 5)
            throw IoError("bad label line in " + path.string() + ": " + line);
        boxes.push_back(b);
    }
    return boxes;
}

Json phantom_config_to_json(const phantom::PhantomConfig& c) {
    Json j;
    j["n_normal"] = c.n_normal;
    j["n_lesion"] = c.n_lesion;
    j["image_size"] = c.image_size;
    j["lesion_count_range"] = c.lesion_count_range;
    j["lesion_radius_range"] = c.lesion_radius_range;
    j["palette"] = Json{{"background_mean", c.palette.background_mean},
                        {"lesion_mean", c.palette.lesion_mean},
                        {"background_variation", c.palette.background_variation},
                        {"lesion_variation", c.palette.lesion_variation}};
    j["texture_scale"] = c.texture_scale;
    j["min_color_separation"] = c.min_color_separation;
    j["seed"] = c.seed;
    return j;
}

phantom::PhantomConfig phantom_config_from_json(const Json& j) {
    phantom::PhantomConfig c;
    check_keys(j, "phantom config",
               {"n_normal", "n_lesion", "image_size", "lesion_count_range", "lesion_radius_range",
                "palette", "texture_scale", "min_color_separation", "seed"});
    if (j.contains("n_normal")) c.n_normal = j["n_normal"].get<int>();
    if (j.contains("n_lesion")) c.n_lesion = j["n_lesion"].get<int>();
    if (j.contains("image_size")) c.image_size = j["image_size"].get<int>();
    if (j.contains("lesion_count_range"))
        c.lesion_count_range = j["lesion_count_range"].get<std::array<int, 2>>();
    if (j.contains("lesion_radius_range"))
        c.lesion_radius_range = j["lesion_radius_range"].get<std::array<double, 2>>();
    if (j.contains("palette")) {
        const Json& p = j["palette"];
        check_keys(p, "phantom palette",
                   {"background_mean", "lesion_mean", "background_variation", "lesion_variation"});
        if (p.contains("background_mean"))
            c.palette.background_mean = p["background_mean"].get<std::array<double, 3>>();
        if (p.contains("lesion_mean"))
            c.palette.lesion_mean = p["lesion_mean"].get<std::array<double, 3>>();
        if (p.contains("background_variation"))
            c.palette.background_variation = p["background_variation"].get<double>();
        if (p.contains("lesion_variation"))
            c.palette.lesion_variation = p["lesion_variation"].get<double>();
    }
    if (j.contains("texture_scale")) c.texture_scale = j["texture_scale"].get<double>();
    if (j.contains("min_color_separation"))
        c.min_color_separation = j["min_color_separation"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
    return c;
}

void save_dataset(const phantom::Dataset& dataset, const fs::path& dir) {
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "labels");
    fs::create_directories(dir / "masks");

    Json labels = Json::object();
    for (const phantom::Sample& s : dataset.samples) {
        write_png_rgb8(dir / "images" / (s.id + ".png"), s.image);

        std::ofstream lf(dir / "labels" / (s.id + ".txt"), std::ios::trunc);
        if (!lf) throw IoError("cannot write label file for " + s.id);
        for (const BBox& b : s.boxes) lf << format_label_line(b) << '\n';

        for (size_t j = 0; j < s.masks.size(); ++j)
            write_png_gray8(dir / "masks" / (s.id + "_" + std::to_string(j) + ".png"), s.masks[j]);

        labels[s.id] = phantom::label_name(s.label);
    }

    Json meta;
    meta["config"] = phantom_config_to_json(dataset.config);
    meta["seed"] = dataset.seed;
    meta["labels"] = labels;
    save_json_file(dir / "meta.json", meta);
}

phantom::Dataset load_dataset(const fs::path& dir) {
    if (!fs::exists(dir / "meta.json")) throw MissingInputError(dir.string() + "/meta.json");

    const Json meta = load_json_file(dir / "meta.json");
    check_keys(meta, "dataset meta", {"config", "seed", "labels"});

    phantom::Dataset ds;
    ds.config = phantom_config_from_json(meta.at("config"));
    ds.seed = meta.at("seed").get<uint64_t>();

    for (const auto& [id, label_str] : meta.at("labels").items()) {
        phantom::Sample s;
        s.id = id;
        s.label = (label_str.get<std::string>() == "lesion") ? phantom::Label::kLesion
                                                             : phantom::Label::kNormal;
        const fs::path img_path = dir / "images" / (id + ".png");
        if (!fs::exists(img_path)) throw MissingInputError(img_path.string());
        s.image = read_png_rgb(img_path);
        s.boxes = parse_label_file(dir / "labels" / (id + ".txt"));
        for (size_t j = 0; j < s.boxes.size(); ++j) {
            const fs::path m = dir / "masks" / (id + "_" + std::to_string(j) + ".png");
            if (!fs::exists(m)) throw MissingInputError(m.string());
            s.masks.push_back(read_png_mask(m));
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace lesionforge
