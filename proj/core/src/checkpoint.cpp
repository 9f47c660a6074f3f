#include "csda/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace csda {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <class T>
void put(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<CheckpointBlock>& blocks) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for write");
    os.write("CSDA", 4);
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(blocks.size()));
    for (const auto& b : blocks) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(b.name.size()));
        os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(b.shape.size()));
        for (int e : b.shape) put<std::uint64_t>(os, static_cast<std::uint64_t>(e));
        if (static_cast<std::int64_t>(b.data.size()) != shape_numel(b.shape))
            throw std::invalid_argument("checkpoint: block '" + b.name +
                                        "' data does not match shape " + shape_str(b.shape));
        os.write(reinterpret_cast<const char*>(b.data.data()),
                 static_cast<std::streamsize>(b.data.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

std::vector<CheckpointBlock> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CSDA", 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path.string());
    const auto version = get<std::uint32_t>(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const auto count = get<std::uint32_t>(is);
    std::vector<CheckpointBlock> blocks(count);
    for (auto& b : blocks) {
        const auto name_len = get<std::uint32_t>(is);
        b.name.resize(name_len);
        is.read(b.name.data(), name_len);
        const auto rank = get<std::uint32_t>(is);
        b.shape.resize(rank);
        for (auto& e : b.shape) e = static_cast<int>(get<std::uint64_t>(is));
        b.data.resize(static_cast<std::size_t>(shape_numel(b.shape)));
        is.read(reinterpret_cast<char*>(b.data.data()),
                static_cast<std::streamsize>(b.data.size() * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint: truncated block '" + b.name + "'");
    }
    return blocks;
}

}  // namespace csda
