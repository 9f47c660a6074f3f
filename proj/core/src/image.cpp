#include "csda/image.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace csda {

namespace {

std::uint32_t crc32_table_entry(std::uint32_t n) {
    for (int k = 0; k < 8; ++k) n = (n & 1) ? 0xedb88320u ^ (n >> 1) : n >> 1;
    return n;
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t crc = 0) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) t[i] = crc32_table_entry(i);
        return t;
    }();
    crc ^= 0xffffffffu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

std::uint32_t adler32(const std::uint8_t* data, std::size_t len) {
    std::uint32_t a = 1, b = 0;
    for (std::size_t i = 0; i < len; ++i) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void chunk(std::vector<std::uint8_t>& out, const char type[4],
           const std::vector<std::uint8_t>& payload) {
    put_be32(out, static_cast<std::uint32_t>(payload.size()));
    std::vector<std::uint8_t> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    out.insert(out.end(), body.begin(), body.end());
    put_be32(out, crc32(body.data(), body.size()));
}

}  // namespace

void write_png(const std::filesystem::path& path, const std::vector<std::uint8_t>& rgb,
               int width, int height) {
    if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
        throw std::invalid_argument("write_png: buffer does not match extents");

    // raw scanlines with filter byte 0
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(height) * (static_cast<std::size_t>(width) * 3 + 1));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        const auto* row = rgb.data() + static_cast<std::size_t>(y) * width * 3;
        raw.insert(raw.end(), row, row + static_cast<std::size_t>(width) * 3);
    }

    // zlib stream of stored deflate blocks
    std::vector<std::uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    std::size_t off = 0;
    while (off < raw.size()) {
        const std::size_t n = std::min<std::size_t>(65535, raw.size() - off);
        const bool last = off + n == raw.size();
        z.push_back(last ? 1 : 0);
        z.push_back(static_cast<std::uint8_t>(n & 0xff));
        z.push_back(static_cast<std::uint8_t>(n >> 8));
        z.push_back(static_cast<std::uint8_t>(~n & 0xff));
        z.push_back(static_cast<std::uint8_t>((~n >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + static_cast<std::ptrdiff_t>(off),
                 raw.begin() + static_cast<std::ptrdiff_t>(off + n));
        off += n;
    }
    put_be32(z, adler32(raw.data(), raw.size()));

    std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(width));
    put_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    chunk(png, "IHDR", ihdr);
    chunk(png, "IDAT", z);
    chunk(png, "IEND", {});

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_png: cannot open " + path.string());
    os.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
    if (!os) throw std::runtime_error("write_png: write failed for " + path.string());
}

std::array<std::uint8_t, 3> class_color(std::uint8_t cls) {
    switch (cls) {
        case 1: return {0, 200, 0};     // body: green
        case 2:
        case 3:
        case 4: return {40, 90, 255};   // edges: blue
        case 5: return {255, 32, 32};   // grasp: red
        default: return {0, 0, 0};      // background: black
    }
}

std::vector<std::uint8_t> depth_to_rgb(const DepthSample& s) {
    float lo = 0, hi = 0;
    bool any = false;
    for (std::size_t i = 0; i < s.depth.size(); ++i)
        if (s.labels[i] != 0) {
            if (!any) {
                lo = hi = s.depth[i];
                any = true;
            }
            lo = std::min(lo, s.depth[i]);
            hi = std::max(hi, s.depth[i]);
        }
    std::vector<std::uint8_t> rgb(s.depth.size() * 3, 0);
    const float range = hi > lo ? hi - lo : 1.0f;
    for (std::size_t i = 0; i < s.depth.size(); ++i) {
        if (s.labels[i] == 0) continue;
        const auto v = static_cast<std::uint8_t>(40 + 215 * (1.0f - (s.depth[i] - lo) / range));
        rgb[i * 3] = rgb[i * 3 + 1] = rgb[i * 3 + 2] = v;
    }
    return rgb;
}

std::vector<std::uint8_t> labels_to_rgb(const std::vector<std::uint8_t>& labels) {
    std::vector<std::uint8_t> rgb(labels.size() * 3);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto c = class_color(labels[i]);
        rgb[i * 3] = c[0];
        rgb[i * 3 + 1] = c[1];
        rgb[i * 3 + 2] = c[2];
    }
    return rgb;
}

std::vector<std::uint8_t> compose_viz(const DepthSample& sample,
                                      const std::vector<std::uint8_t>& predicted_labels,
                                      const GraspPrediction& grasp) {
    const int w = sample.width, h = sample.height;
    auto left = depth_to_rgb(sample);
    auto mid = labels_to_rgb(sample.labels);
    auto right = labels_to_rgb(predicted_labels);
    // red dot, 3x3, centred on the most confident grasp pixel
    for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
            const int r = grasp.row + dr, c = grasp.col + dc;
            if (r < 0 || r >= h || c < 0 || c >= w) continue;
            right[(static_cast<std::size_t>(r) * w + c) * 3] = 255;
            right[(static_cast<std::size_t>(r) * w + c) * 3 + 1] = 0;
            right[(static_cast<std::size_t>(r) * w + c) * 3 + 2] = 0;
        }
    std::vector<std::uint8_t> out(static_cast<std::size_t>(3) * w * h * 3);
    for (int y = 0; y < h; ++y) {
        auto* dst = out.data() + static_cast<std::size_t>(y) * 3 * w * 3;
        std::memcpy(dst, left.data() + static_cast<std::size_t>(y) * w * 3,
                    static_cast<std::size_t>(w) * 3);
        std::memcpy(dst + w * 3, mid.data() + static_cast<std::size_t>(y) * w * 3,
                    static_cast<std::size_t>(w) * 3);
        std::memcpy(dst + 2 * w * 3, right.data() + static_cast<std::size_t>(y) * w * 3,
                    static_cast<std::size_t>(w) * 3);
    }
    return out;
}

}  // namespace csda
