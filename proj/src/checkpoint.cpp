#include <bit>
#include <cstring>
#include <fstream>

#include "gnnstrat/models.hpp"

namespace gnnstrat {

namespace {

constexpr char kMagic[8] = {'G', 'N', 'N', 'S', 'T', 'R', 'A', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::int64_t kNoTheta = -1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ModelError("truncated checkpoint: " + path.string());
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    check_weights(ckpt.spec, ckpt.weights);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelError("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(ckpt.spec.arch));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(ckpt.spec.variant));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.spec.num_layers));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.spec.input_dim));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.spec.hidden_dim));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.spec.num_classes));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.spec.gat_heads));
    put<double>(out, ckpt.spec.leaky_slope);
    put<std::int64_t>(out, ckpt.theta ? static_cast<std::int64_t>(*ckpt.theta) : kNoTheta);
    const auto params = ckpt.weights.parameters();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.rows()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.cols()));
        const auto data = p.value().data();
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    }
    if (!out) throw ModelError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw ModelError("not a checkpoint: " + path.string());
    if (const auto version = get<std::uint32_t>(in, path); version != kVersion) {
        throw ModelError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    const auto arch = get<std::uint8_t>(in, path);
    const auto variant = get<std::uint8_t>(in, path);
    if (arch > static_cast<std::uint8_t>(Arch::sage) || variant > static_cast<std::uint8_t>(Variant::random_split)) {
        throw ModelError("corrupt checkpoint header: " + path.string());
    }
    ckpt.spec.arch = static_cast<Arch>(arch);
    ckpt.spec.variant = static_cast<Variant>(variant);
    ckpt.spec.num_layers = get<std::uint32_t>(in, path);
    ckpt.spec.input_dim = get<std::uint32_t>(in, path);
    ckpt.spec.hidden_dim = get<std::uint32_t>(in, path);
    ckpt.spec.num_classes = get<std::uint32_t>(in, path);
    ckpt.spec.gat_heads = get<std::uint32_t>(in, path);
    ckpt.spec.leaky_slope = get<double>(in, path);
    if (const auto theta = get<std::int64_t>(in, path); theta != kNoTheta) ckpt.theta = static_cast<std::uint32_t>(theta);

    // Rebuild the parameter layout from the spec, then overwrite values block by block.
    ckpt.weights = init_weights(ckpt.spec, 0);
    auto params = ckpt.weights.parameters();
    if (get<std::uint32_t>(in, path) != params.size()) throw ModelError("checkpoint parameter count mismatch");
    for (auto& p : params) {
        const auto rows = get<std::uint32_t>(in, path);
        const auto cols = get<std::uint32_t>(in, path);
        if (rows != p.rows() || cols != p.cols()) throw ModelError("checkpoint block shape mismatch for " + p.name());
        auto data = p.mutable_value().data();
        in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!in) throw ModelError("truncated checkpoint: " + path.string());
    }
    if (in.peek() != std::ifstream::traits_type::eof()) throw ModelError("trailing bytes in checkpoint: " + path.string());
    return ckpt;
}

}  // namespace gnnstrat
