#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "barecam/errors.hpp"

namespace barecam {

// 8-bit image stored as channel planes (CHW), matching the CIFAR-10 record
// layout. channels is 1 (grayscale) or 3 (RGB).
struct ImageU8 {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;  // size = channels * height * width

    ImageU8() = default;
    ImageU8(int c, int h, int w, uint8_t fill = 0)
        : channels(c), height(h), width(w),
          data(static_cast<size_t>(c) * h * w, fill) {
        if (c < 1 || h < 1 || w < 1) throw DomainError("image dimensions must be >= 1");
    }

    size_t plane() const { return static_cast<size_t>(height) * width; }
    size_t size() const { return data.size(); }

    uint8_t& at(int c, int y, int x) { return data[plane() * c + static_cast<size_t>(y) * width + x]; }
    uint8_t at(int c, int y, int x) const { return data[plane() * c + static_cast<size_t>(y) * width + x]; }

    bool operator==(const ImageU8& o) const = default;
};

struct LabeledImage {
    ImageU8 image;
    int label = 0;
};

// Round half away from zero, the single rounding rule used everywhere an
// 8-bit value is produced.
inline double round_half_away(double x) {
    return x >= 0.0 ? std::floor(x + 0.5) : std::ceil(x - 0.5);
}

inline uint8_t to_u8_clamped(double x) {
    double r = round_half_away(x);
    if (r < 0.0) return 0;
    if (r > 255.0) return 255;
    return static_cast<uint8_t>(r);
}

// Binary PPM (P6, maxval 255). Single-channel images are expanded to RGB on
// write; read always yields 3 channels.
void write_ppm(const ImageU8& img, const std::string& path);
ImageU8 read_ppm(const std::string& path);

}  // namespace barecam
