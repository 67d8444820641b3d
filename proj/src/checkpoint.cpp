#include "lesionforge/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "lesionforge/errors.hpp"

namespace lesionforge::tensornet {

namespace {

constexpr char kMagic[4] = {'L', 'F', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ofstream& f, uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);  // little-endian host assumed
}

uint32_t get_u32(std::ifstream& f) {
    uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<Param*>& params,
                     const Json& manifest) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + path.string());

    f.write(kMagic, 4);
    put_u32(f, kVersion);
    put_u32(f, static_cast<uint32_t>(params.size()));
    for (const Param* p : params) {
        put_u32(f, static_cast<uint32_t>(p->name.size()));
        f.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        put_u32(f, static_cast<uint32_t>(p->value.shape.size()));
        for (int d : p->value.shape) put_u32(f, static_cast<uint32_t>(d));
        std::vector<float> buf(p->value.size());
        for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(p->value.data[i]);
        f.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!f) throw IoError("write failed: " + path.string());
    f.close();

    save_json_file(path.string() + ".json", manifest);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingInputError(path.string());

    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("not a checkpoint file: " + path.string());
    const uint32_t version = get_u32(f);
    if (version != kVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ckpt;
    const uint32_t count = get_u32(f);
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = get_u32(f);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        const uint32_t rank = get_u32(f);
        std::vector<int> shape(rank);
        for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(get_u32(f));
        Tensor t(shape);
        std::vector<float> buf(t.size());
        f.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!f) throw IoError("truncated checkpoint: " + path.string());
        for (size_t k = 0; k < buf.size(); ++k) t.data[k] = static_cast<double>(buf[k]);
        ckpt.tensors.emplace(std::move(name), std::move(t));
    }

    const std::filesystem::path manifest_path = path.string() + ".json";
    if (std::filesystem::exists(manifest_path)) ckpt.manifest = load_json_file(manifest_path);
    return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, const std::vector<Param*>& params) {
    for (Param* p : params) {
        const auto it = ckpt.tensors.find(p->name);
        if (it == ckpt.tensors.end())
            throw IoError("checkpoint missing tensor: " + p->name);
        if (it->second.shape != p->value.shape)
            throw ShapeError("checkpoint shape mismatch for " + p->name + ": stored " +
                             it->second.shape_str() + ", wanted " + p->value.shape_str());
        p->value = it->second;
    }
}

}  // namespace lesionforge::tensornet
