#include "frvs/checkpoint.hpp"

#include <bit>
#include <cstring>

namespace frvs {

namespace {

// This codebase only targets little-endian hosts; fail loudly otherwise.
static_assert(std::endian::native == std::endian::little, "little-endian host required");

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_f32(std::ostream& os, float v) { os.write(reinterpret_cast<const char*>(&v), 4); }

uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
float read_f32(std::istream& is) {
    float v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

}  // namespace

void save_checkpoint(const ModelParams& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write("FRVS", 4);
    write_u32(os, kCheckpointVersion);
    write_u32(os, static_cast<uint32_t>(m.variant));
    write_f32(os, m.max_disp);
    for (const auto& [name, node] : m.store.params) {
        write_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<uint32_t>(node->value.shape.size()));
        for (int e : node->value.shape) write_u32(os, static_cast<uint32_t>(e));
        os.write(reinterpret_cast<const char*>(node->value.data.data()),
                 static_cast<std::streamsize>(node->value.numel() * sizeof(float)));
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "FRVS", 4) != 0)
        throw std::runtime_error("not a checkpoint file (bad magic): " + path);
    uint32_t version = read_u32(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    ModelParams m;
    uint32_t tag = read_u32(is);
    if (tag > 2) throw std::runtime_error("bad variant tag in checkpoint");
    m.variant = static_cast<ModelVariant>(tag);
    m.max_disp = read_f32(is);
    while (true) {
        uint32_t name_len = read_u32(is);
        if (is.eof()) break;
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        uint32_t rank = read_u32(is);
        std::vector<int> shape(rank);
        for (auto& e : shape) e = static_cast<int>(read_u32(is));
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(float)));
        if (!is) throw std::runtime_error("truncated checkpoint: " + path);
        m.store.add(name, std::move(t));
    }
    return m;
}

}  // namespace frvs
