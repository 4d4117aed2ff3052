#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "barecam/errors.hpp"

namespace barecam::pipe {

// Flat key=value experiment configuration. Section prefixes (gap.t_mm) are
// plain key text; '#' starts a comment; later assignments win.
class ConfigMap {
public:
    static ConfigMap from_file(const std::string& path);
    static ConfigMap from_text(const std::string& text);

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    std::string get_str(const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }
    std::string to_text() const;

private:
    std::map<std::string, std::string> kv_;
};

enum class ColorMode { Color, GrayDisplay, GraySensor };

const char* color_mode_name(ColorMode m);
ColorMode parse_color_mode(const std::string& s);

struct TrainPhaseConfig {
    int epochs = 10;
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    int batch_size = 64;
    int64_t max_iterations = 0;
};

// Fully resolved experiment settings; every randomized stage derives its seed
// from the one master seed here.
struct ExperimentConfig {
    // geometry
    int display_width = 20, display_height = 20;
    double display_extent_mm = 6.0;
    int sensor_width = 320, sensor_height = 240;
    double sensor_pitch_mm = 0.0022;
    int sensor_downsample = 16;
    double t_mm = 1.0, dx_mm = 0.0, dy_mm = 0.0;
    // simulation
    ColorMode mode = ColorMode::Color;
    std::string exposure = "per-image";  // or "fixed:<gain>"
    double noise_sigma = 0.0;
    uint64_t matrix_budget_bytes = 512ull << 20;
    // data
    std::vector<std::string> cifar_paths;
    int limit_per_class = 0;  // 0 = all
    std::string out_dir = "out";
    std::string cache_dir;  // resolved: config > BARECAM_CACHE_DIR > out_dir/cache
    // splits & seeds
    int split_train = 5000, split_val = 500, split_test = 1000;
    uint64_t seed = 1;
    // training phases
    TrainPhaseConfig base{10, 1e-3, 1e-4, 64, 0};
    TrainPhaseConfig finetune{5, 1e-3, 1e-4, 64, 0};
    bool finetune_freeze_body = false;
    int oversample_rate = 5;
    int detect_parallel = 2;
    // binary protocol
    int binary_class_a = 3, binary_class_b = 5;
    int binary_train = 1600, binary_val = 300, binary_test = 500;
    TrainPhaseConfig binary{10, 1e-3, 0.0, 64, 0};
    // entropy
    int entropy_bins = 256;
    int entropy_limit = 0;  // 0 = all
    // write the first N scene/sensor pairs as PPM for inspection
    int export_ppm = 0;

    static ExperimentConfig from_map(const ConfigMap& map);
    ConfigMap to_map() const;
    void validate() const;
    std::string resolved_cache_dir() const;
};

}  // namespace barecam::pipe
