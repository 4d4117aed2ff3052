#include "barecam/optics.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "barecam/binio.hpp"
#include "barecam/rng.hpp"

namespace barecam::optics {

void DisplayGeometry::validate() const {
    if (width_px < 1 || height_px < 1) throw DomainError("display pixel counts must be >= 1");
    if (!(extent_mm > 0.0) || !std::isfinite(extent_mm))
        throw DomainError("display extent must be positive and finite");
    if (channels != 1 && channels != 3) throw DomainError("display channels must be 1 or 3");
}

void SensorGeometry::validate() const {
    if (width_px < 1 || height_px < 1) throw DomainError("sensor pixel counts must be >= 1");
    if (!(pitch_mm > 0.0) || !std::isfinite(pitch_mm))
        throw DomainError("sensor pitch must be positive and finite");
    if (channels != 3) throw DomainError("sensor has 3 color channels");
}

SensorGeometry SensorGeometry::downsampled(int factor) const {
    if (factor < 1) throw DomainError("downsample factor must be >= 1");
    SensorGeometry s = *this;
    s.width_px = width_px / factor;
    s.height_px = height_px / factor;
    s.pitch_mm = pitch_mm * factor;
    s.validate();
    return s;
}

void GapConfig::validate() const {
    if (!(t_mm > 0.0) || !std::isfinite(t_mm)) throw DomainError("gap t must be positive");
    if (!std::isfinite(dx_mm) || !std::isfinite(dy_mm))
        throw DomainError("lateral offset must be finite");
}

double field_of_view(double extent_mm, double t_mm) {
    if (!(extent_mm > 0.0)) throw DomainError("field_of_view: extent must be positive");
    if (!(t_mm > 0.0)) throw DomainError("field_of_view: gap must be positive");
    return 2.0 * std::atan((extent_mm / 2.0) / t_mm) * 180.0 / M_PI;
}

uint64_t geometry_fingerprint(const DisplayGeometry& d, const SensorGeometry& s,
                              const GapConfig& g) {
    // FNV-1a over the packed little-endian field bytes.
    uint64_t h = 0xCBF29CE484222325ull;
    auto mix = [&h](const void* p, size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001B3ull;
        }
    };
    auto mix_i32 = [&](int v) { int32_t x = v; mix(&x, sizeof x); };
    auto mix_f64 = [&](double v) { mix(&v, sizeof v); };
    mix_i32(d.width_px); mix_i32(d.height_px); mix_f64(d.extent_mm); mix_i32(d.channels);
    mix_i32(s.width_px); mix_i32(s.height_px); mix_f64(s.pitch_mm); mix_i32(s.channels);
    mix_f64(g.t_mm); mix_f64(g.dx_mm); mix_f64(g.dy_mm);
    return h;
}

TransportMatrix build_transport_matrix(const DisplayGeometry& display,
                                       const SensorGeometry& sensor,
                                       const GapConfig& gap, size_t max_bytes) {
    display.validate();
    sensor.validate();
    gap.validate();

    const size_t rows = static_cast<size_t>(sensor.width_px) * sensor.height_px;
    const size_t cols = static_cast<size_t>(display.width_px) * display.height_px;
    const size_t need = rows * cols * sizeof(double);
    if (need > max_bytes)
        throw SizeError("transport matrix needs " + std::to_string(need) +
                            " bytes, budget is " + std::to_string(max_bytes),
                        need);

    TransportMatrix tm;
    tm.display_ = display;
    tm.sensor_ = sensor;
    tm.gap_ = gap;
    tm.fingerprint_ = geometry_fingerprint(display, sensor, gap);
    tm.weights_.resize(rows * cols);

    const double pd = display.pitch_mm();
    const double area = pd * pd;
    const double t2 = gap.t_mm * gap.t_mm;
    const double t4 = t2 * t2;

    // Pixel centers relative to the sensor axis.
    std::vector<double> dx(cols), dy(cols);
    for (int i = 0; i < display.height_px; ++i)
        for (int j = 0; j < display.width_px; ++j) {
            size_t d = static_cast<size_t>(i) * display.width_px + j;
            dx[d] = gap.dx_mm + (j + 0.5 - display.width_px / 2.0) * pd;
            dy[d] = gap.dy_mm + (i + 0.5 - display.height_px / 2.0) * pd;
        }

    for (int r = 0; r < sensor.height_px; ++r) {
        const double sy = (r + 0.5 - sensor.height_px / 2.0) * sensor.pitch_mm;
        for (int c = 0; c < sensor.width_px; ++c) {
            const double sx = (c + 0.5 - sensor.width_px / 2.0) * sensor.pitch_mm;
            double* row = &tm.weights_[(static_cast<size_t>(r) * sensor.width_px + c) * cols];
            for (size_t d = 0; d < cols; ++d) {
                const double ex = dx[d] - sx;
                const double ey = dy[d] - sy;
                const double q = t2 + ex * ex + ey * ey;
                row[d] = t4 / (q * q * q) * area;
            }
        }
    }
    return tm;
}

RawSensorImage render_sensor_image(const ImageU8& scene, const TransportMatrix& transport) {
    const auto& disp = transport.display();
    if (scene.height != disp.height_px || scene.width != disp.width_px)
        throw ShapeError("scene is " + std::to_string(scene.width) + "x" +
                         std::to_string(scene.height) + ", transport expects " +
                         std::to_string(disp.width_px) + "x" + std::to_string(disp.height_px));
    if (scene.channels != 1 && scene.channels != 3)
        throw ShapeError("scene must have 1 or 3 channels");

    const auto& sg = transport.sensor();
    RawSensorImage out;
    out.channels = sg.channels;
    out.height = sg.height_px;
    out.width = sg.width_px;
    out.t_mm = transport.gap().t_mm;
    out.radiance.assign(static_cast<size_t>(out.channels) * out.height * out.width, 0.0);

    const size_t rows = transport.rows();
    const size_t cols = transport.cols();
    const std::vector<double>& w = transport.weights();

    std::vector<double> scene_f(cols);
    for (int c = 0; c < out.channels; ++c) {
        const int src = scene.channels == 1 ? 0 : c;
        const uint8_t* plane = scene.data.data() + scene.plane() * src;
        for (size_t d = 0; d < cols; ++d) scene_f[d] = static_cast<double>(plane[d]);
        double* dst = out.radiance.data() + static_cast<size_t>(c) * rows;
        for (size_t s = 0; s < rows; ++s) {
            const double* row = &w[s * cols];
            double acc = 0.0;
            for (size_t d = 0; d < cols; ++d) acc += row[d] * scene_f[d];
            dst[s] = acc;
        }
    }
    return out;
}

SensorImage quantize_expose(const RawSensorImage& raw, ExposureMode mode, double gain) {
    if (raw.radiance.empty()) throw DomainError("quantize_expose: empty frame");
    SensorImage out;
    out.t_mm = raw.t_mm;
    out.pixels = ImageU8(raw.channels, raw.height, raw.width);

    double scale = gain;
    if (mode == ExposureMode::PerImageMax) {
        double m = 0.0;
        for (double v : raw.radiance) m = std::max(m, v);
        if (m <= 0.0) {
            out.exposure_scale = 0.0;
            out.degenerate_exposure = true;
            return out;
        }
        scale = 255.0 / m;
    } else if (!(gain > 0.0)) {
        throw DomainError("quantize_expose: fixed gain must be positive");
    }
    out.exposure_scale = scale;
    for (size_t i = 0; i < raw.radiance.size(); ++i)
        out.pixels.data[i] = to_u8_clamped(raw.radiance[i] * scale);
    return out;
}

SensorImage add_sensor_noise(const SensorImage& img, double sigma, uint64_t seed) {
    if (sigma < 0.0) throw DomainError("noise sigma must be >= 0");
    if (sigma == 0.0) return img;
    SensorImage out = img;
    Rng rng(seed);
    for (size_t i = 0; i < out.pixels.data.size(); ++i) {
        double v = static_cast<double>(img.pixels.data[i]) + sigma * rng.normal();
        out.pixels.data[i] = to_u8_clamped(v);
    }
    return out;
}

namespace {
constexpr char kTransportMagic[4] = {'O', 'F', 'T', 'M'};
constexpr uint16_t kTransportVersion = 1;
}  // namespace

void TransportMatrix::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + path);
    bin::write_magic(os, kTransportMagic);
    bin::write_raw<uint16_t>(os, kTransportVersion);
    bin::write_raw<uint32_t>(os, static_cast<uint32_t>(display_.width_px));
    bin::write_raw<uint32_t>(os, static_cast<uint32_t>(display_.height_px));
    bin::write_raw<double>(os, display_.extent_mm);
    bin::write_raw<uint32_t>(os, static_cast<uint32_t>(display_.channels));
    bin::write_raw<uint32_t>(os, static_cast<uint32_t>(sensor_.width_px));
    bin::write_raw<uint32_t>(os, static_cast<uint32_t>(sensor_.height_px));
    bin::write_raw<double>(os, sensor_.pitch_mm);
    bin::write_raw<uint32_t>(os, static_cast<uint32_t>(sensor_.channels));
    bin::write_raw<double>(os, gap_.t_mm);
    bin::write_raw<double>(os, gap_.dx_mm);
    bin::write_raw<double>(os, gap_.dy_mm);
    bin::write_raw<uint64_t>(os, fingerprint_);
    bin::write_raw<uint64_t>(os, static_cast<uint64_t>(rows()));
    bin::write_raw<uint64_t>(os, static_cast<uint64_t>(cols()));
    bin::write_vec(os, weights_);
    if (!os) throw FormatError("short write: " + path);
}

TransportMatrix TransportMatrix::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path);
    bin::expect_magic(is, kTransportMagic, "transport cache");
    const auto version = bin::read_raw<uint16_t>(is, "version");
    if (version != kTransportVersion)
        throw FormatError("transport cache version " + std::to_string(version) +
                          " not supported");
    TransportMatrix tm;
    tm.display_.width_px = static_cast<int>(bin::read_raw<uint32_t>(is, "display width"));
    tm.display_.height_px = static_cast<int>(bin::read_raw<uint32_t>(is, "display height"));
    tm.display_.extent_mm = bin::read_raw<double>(is, "display extent");
    tm.display_.channels = static_cast<int>(bin::read_raw<uint32_t>(is, "display channels"));
    tm.sensor_.width_px = static_cast<int>(bin::read_raw<uint32_t>(is, "sensor width"));
    tm.sensor_.height_px = static_cast<int>(bin::read_raw<uint32_t>(is, "sensor height"));
    tm.sensor_.pitch_mm = bin::read_raw<double>(is, "sensor pitch");
    tm.sensor_.channels = static_cast<int>(bin::read_raw<uint32_t>(is, "sensor channels"));
    tm.gap_.t_mm = bin::read_raw<double>(is, "gap t");
    tm.gap_.dx_mm = bin::read_raw<double>(is, "gap dx");
    tm.gap_.dy_mm = bin::read_raw<double>(is, "gap dy");
    tm.fingerprint_ = bin::read_raw<uint64_t>(is, "fingerprint");
    const auto rows = bin::read_raw<uint64_t>(is, "rows");
    const auto cols = bin::read_raw<uint64_t>(is, "cols");
    if (rows != tm.rows() || cols != tm.cols())
        throw FormatError("transport cache dimensions disagree with geometry");
    if (tm.fingerprint_ != geometry_fingerprint(tm.display_, tm.sensor_, tm.gap_))
        throw FormatError("transport cache fingerprint disagrees with geometry");
    bin::read_vec(is, tm.weights_, rows * cols, "weights");
    return tm;
}

}  // namespace barecam::optics
