#include "csda/depth_sample.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace csda {

namespace {

static_assert(std::endian::native == std::endian::little,
              ".dsmp writer assumes a little-endian host");

template <class T>
void put(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("dsmp: truncated file");
    return v;
}

}  // namespace

const char* domain_name(Domain d) {
    return d == Domain::synthetic ? "synthetic" : "surrogate_real";
}

Domain domain_from_name(const std::string& name) {
    if (name == "synthetic") return Domain::synthetic;
    if (name == "surrogate_real") return Domain::surrogate_real;
    throw std::invalid_argument("unknown domain '" + name + "'");
}

std::size_t DepthSample::foreground_count() const {
    std::size_t n = 0;
    for (std::uint8_t l : labels) n += l != 0;
    return n;
}

void save_dsmp(const std::filesystem::path& path, const DepthSample& s) {
    if (s.depth.size() != static_cast<std::size_t>(s.width) * s.height ||
        s.labels.size() != s.depth.size())
        throw std::invalid_argument("dsmp: raster sizes do not match extents");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("dsmp: cannot open " + path.string() + " for write");
    os.write("DSMP", 4);
    put<std::uint32_t>(os, kDsmpVersion);
    put<std::uint16_t>(os, static_cast<std::uint16_t>(s.width));
    put<std::uint16_t>(os, static_cast<std::uint16_t>(s.height));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(s.domain));
    put<std::uint32_t>(os, s.hang_id);
    put<std::uint16_t>(os, s.camera_index);
    put<std::uint64_t>(os, s.seed);
    os.write(reinterpret_cast<const char*>(s.depth.data()),
             static_cast<std::streamsize>(s.depth.size() * sizeof(float)));
    os.write(reinterpret_cast<const char*>(s.labels.data()),
             static_cast<std::streamsize>(s.labels.size()));
    if (!os) throw std::runtime_error("dsmp: write failed for " + path.string());
}

DepthSample load_dsmp(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("dsmp: cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "DSMP", 4) != 0)
        throw std::runtime_error("dsmp: bad magic in " + path.string());
    const auto version = get<std::uint32_t>(is);
    if (version != kDsmpVersion)
        throw std::runtime_error("dsmp: unsupported version " + std::to_string(version));
    DepthSample s;
    s.width = get<std::uint16_t>(is);
    s.height = get<std::uint16_t>(is);
    s.domain = static_cast<Domain>(get<std::uint8_t>(is));
    s.hang_id = get<std::uint32_t>(is);
    s.camera_index = get<std::uint16_t>(is);
    s.seed = get<std::uint64_t>(is);
    const std::size_t n = static_cast<std::size_t>(s.width) * s.height;
    s.depth.resize(n);
    is.read(reinterpret_cast<char*>(s.depth.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    s.labels.resize(n);
    is.read(reinterpret_cast<char*>(s.labels.data()), static_cast<std::streamsize>(n));
    if (!is) throw std::runtime_error("dsmp: truncated rasters in " + path.string());
    return s;
}

void save_manifest(const std::filesystem::path& path,
                   const std::vector<ManifestEntry>& entries) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("manifest: cannot open " + path.string() + " for write");
    for (const auto& e : entries)
        os << e.path << "\t" << domain_name(e.domain) << "\t" << e.split << "\n";
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("manifest: cannot open " + path.string());
    std::vector<ManifestEntry> entries;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ManifestEntry e;
        std::string domain;
        if (!(std::getline(ls, e.path, '\t') && std::getline(ls, domain, '\t') &&
              std::getline(ls, e.split)))
            throw std::runtime_error("manifest: malformed line '" + line + "'");
        e.domain = domain_from_name(domain);
        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace csda
