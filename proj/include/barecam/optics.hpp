#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "barecam/image.hpp"

namespace barecam::optics {

// Display shown to the bare sensor. extent_mm is the physical width; pixels
// are square, so physical height = height_px * pitch.
struct DisplayGeometry {
    int width_px = 20;
    int height_px = 20;
    double extent_mm = 6.0;
    int channels = 3;

    double pitch_mm() const { return extent_mm / width_px; }
    void validate() const;
};

struct SensorGeometry {
    int width_px = 320;
    int height_px = 240;
    double pitch_mm = 0.0022;
    int channels = 3;

    void validate() const;
    // Integer-division downsample for desk-scale runs; pitch grows by the
    // same factor so the active area is preserved.
    SensorGeometry downsampled(int factor) const;
};

struct GapConfig {
    double t_mm = 1.0;
    double dx_mm = 0.0;  // display center offset from the sensor axis
    double dy_mm = 0.0;

    void validate() const;
};

// Field of view of the display as seen from the sensor, in degrees.
double field_of_view(double extent_mm, double t_mm);

// Dense map from display pixels to sensor pixels for one geometry. The three
// color channels share identical geometry, so a single matrix serves all of
// them. Immutable after construction.
class TransportMatrix {
public:
    TransportMatrix() = default;

    int sensor_rows() const { return sensor_.height_px; }
    int sensor_cols() const { return sensor_.width_px; }
    size_t rows() const { return static_cast<size_t>(sensor_.width_px) * sensor_.height_px; }
    size_t cols() const { return static_cast<size_t>(display_.width_px) * display_.height_px; }
    double weight(size_t sensor_pixel, size_t display_pixel) const {
        return weights_[sensor_pixel * cols() + display_pixel];
    }
    const std::vector<double>& weights() const { return weights_; }
    const DisplayGeometry& display() const { return display_; }
    const SensorGeometry& sensor() const { return sensor_; }
    const GapConfig& gap() const { return gap_; }
    uint64_t fingerprint() const { return fingerprint_; }

    void save(const std::string& path) const;
    static TransportMatrix load(const std::string& path);

    friend TransportMatrix build_transport_matrix(const DisplayGeometry&,
                                                  const SensorGeometry&,
                                                  const GapConfig&, size_t);

private:
    DisplayGeometry display_;
    SensorGeometry sensor_;
    GapConfig gap_;
    uint64_t fingerprint_ = 0;
    std::vector<double> weights_;  // row-major, sensor_pixels x display_pixels
};

constexpr size_t kDefaultMatrixBudgetBytes = 512ull << 20;

uint64_t geometry_fingerprint(const DisplayGeometry& d, const SensorGeometry& s,
                              const GapConfig& g);

// Lambertian point-to-point kernel: weight = t^4 / (t^2 + d_lat^2)^3 times the
// display pixel area, evaluated center to center.
TransportMatrix build_transport_matrix(const DisplayGeometry& display,
                                       const SensorGeometry& sensor,
                                       const GapConfig& gap,
                                       size_t max_bytes = kDefaultMatrixBudgetBytes);

// Simulated raw frame before quantization. channels is 3 for color scenes and
// for grayscale scenes broadcast across the sensor channels.
struct RawSensorImage {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> radiance;  // CHW planes
    double t_mm = 0.0;

    double& at(int c, int y, int x) {
        return radiance[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return radiance[(static_cast<size_t>(c) * height + y) * width + x];
    }
};

// Quantized frame plus exposure metadata.
struct SensorImage {
    ImageU8 pixels;
    double t_mm = 0.0;
    double exposure_scale = 1.0;
    bool degenerate_exposure = false;
};

RawSensorImage render_sensor_image(const ImageU8& scene, const TransportMatrix& transport);

enum class ExposureMode { PerImageMax, FixedGain };

// PerImageMax scales so the brightest sample maps to 255; FixedGain multiplies
// by `gain`. Rounding is half away from zero, clamped to [0, 255]. An all-zero
// frame in PerImageMax mode comes back all zero with the degenerate flag set.
SensorImage quantize_expose(const RawSensorImage& raw,
                            ExposureMode mode = ExposureMode::PerImageMax,
                            double gain = 1.0);

// Adds zero-mean Gaussian noise (std sigma, in 8-bit counts), then re-clamps.
// Deterministic for a fixed seed. sigma = 0 returns the input unchanged.
SensorImage add_sensor_noise(const SensorImage& img, double sigma, uint64_t seed);

}  // namespace barecam::optics
