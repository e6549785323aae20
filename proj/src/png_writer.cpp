#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "rgmc/io.hpp"

namespace rgmc {

namespace {

void push_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

void push_chunk(std::vector<unsigned char>& out, const char type[4],
                const std::vector<unsigned char>& payload) {
    push_u32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const uLong crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
    push_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_png_gray(const std::filesystem::path& path, const std::vector<double>& values,
                    int width, int height, double window_hi) {
    if (width < 1 || height < 1 ||
        values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw InvalidInputError("write_png_gray: size mismatch");
    }
    const double hi = (window_hi > 0.0) ? window_hi : 1.0;

    // Raw scanlines with filter byte 0.
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(height) * (width + 1));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        for (int x = 0; x < width; ++x) {
            const double v = std::clamp(values[static_cast<std::size_t>(y) * width + x] / hi, 0.0, 1.0);
            raw.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
        }
    }

    uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> compressed(comp_size);
    if (compress2(compressed.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()), 9) !=
        Z_OK) {
        throw InvalidInputError("write_png_gray: deflate failed");
    }
    compressed.resize(comp_size);

    std::vector<unsigned char> png;
    const unsigned char signature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    png.insert(png.end(), signature, signature + 8);

    std::vector<unsigned char> ihdr;
    push_u32(ihdr, static_cast<std::uint32_t>(width));
    push_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // adaptive filtering
    ihdr.push_back(0);  // no interlace
    push_chunk(png, "IHDR", ihdr);
    push_chunk(png, "IDAT", compressed);
    push_chunk(png, "IEND", {});

    atomic_write_bytes(path, png.data(), png.size());
}

}  // namespace rgmc
