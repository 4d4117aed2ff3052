#include "fixtures.hpp"

#include <cmath>
#include <fstream>

#include "barecam/rng.hpp"

namespace barecam::testfix {

namespace {

constexpr int kDim = 32;
constexpr double kPi = 3.14159265358979323846;

struct Blob {
    double cx, cy, sigma, amp;
};

double blob_at(const Blob& b, double x, double y) {
    const double dx = x - b.cx, dy = y - b.cy;
    return b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
}

}  // namespace

std::vector<LabeledImage> make_synthetic_corpus(int per_class, uint64_t seed) {
    std::vector<LabeledImage> out;
    out.reserve(static_cast<size_t>(per_class) * 10);
    const double center = kDim / 2.0;

    for (int cls = 0; cls < 10; ++cls) {
        const double blob_angle = cls * (2.0 * kPi / 10.0);
        const double grating_angle = cls * (kPi / 10.0);
        Rng rng(derive_seed(seed, "synthetic-class", cls));
        for (int i = 0; i < per_class; ++i) {
            LabeledImage li;
            li.label = cls;
            li.image = ImageU8(3, kDim, kDim);

            const double a = blob_angle + rng.uniform(-0.21, 0.21);
            const double r = 4.0 + rng.uniform(-0.8, 0.8);
            Blob cue{center + r * std::cos(a), center + r * std::sin(a),
                     4.0, rng.uniform(70.0, 110.0)};

            const double da = rng.uniform(0.0, 2.0 * kPi);
            const double dr = rng.uniform(2.5, 5.5);
            Blob distractor{center + dr * std::cos(da), center + dr * std::sin(da),
                            4.0, rng.uniform(35.0, 65.0)};

            const double theta = grating_angle + rng.uniform(-0.14, 0.14);
            const double freq = rng.uniform(1.8, 2.6);
            const double phase = rng.uniform(0.0, 2.0 * kPi);
            const double grating_amp = rng.uniform(25.0, 45.0);
            const double cos_t = std::cos(theta), sin_t = std::sin(theta);

            const double background = rng.uniform(80.0, 140.0);
            const double tint[3] = {rng.uniform(0.85, 1.0), rng.uniform(0.85, 1.0),
                                    rng.uniform(0.85, 1.0)};

            for (int y = 0; y < kDim; ++y) {
                for (int x = 0; x < kDim; ++x) {
                    const double u = (x * cos_t + y * sin_t) / kDim;
                    const double structure =
                        blob_at(cue, x, y) + blob_at(distractor, x, y) +
                        grating_amp * std::sin(2.0 * kPi * freq * u + phase);
                    for (int c = 0; c < 3; ++c) {
                        const double v = (background + structure) * tint[c] +
                                         rng.normal() * 5.0;
                        li.image.at(c, y, x) = to_u8_clamped(v);
                    }
                }
            }
            out.push_back(std::move(li));
        }
    }

    // Interleave the classes so per-class file order is not a shortcut.
    std::vector<LabeledImage> mixed;
    mixed.reserve(out.size());
    for (int i = 0; i < per_class; ++i)
        for (int cls = 0; cls < 10; ++cls)
            mixed.push_back(std::move(out[static_cast<size_t>(cls) * per_class + i]));
    return mixed;
}

void write_cifar_batch(const std::vector<LabeledImage>& images, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + path);
    for (const auto& li : images) {
        os.put(static_cast<char>(li.label));
        os.write(reinterpret_cast<const char*>(li.image.data.data()),
                 static_cast<std::streamsize>(li.image.data.size()));
    }
    if (!os) throw FormatError("short write: " + path);
}

}  // namespace barecam::testfix
