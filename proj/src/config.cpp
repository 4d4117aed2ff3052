#include "barecam/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "barecam/textio.hpp"

namespace barecam::pipe {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Every key the experiment config understands; anything else is a typo.
const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "display.width_px", "display.height_px", "display.extent_mm",
        "sensor.width_px", "sensor.height_px", "sensor.pitch_mm", "sensor.downsample",
        "gap.t_mm", "gap.dx_mm", "gap.dy_mm",
        "mode", "exposure", "noise_sigma", "matrix_budget_mb",
        "data.cifar", "data.limit_per_class", "out_dir", "cache_dir",
        "split.train", "split.val", "split.test", "seed",
        "base.epochs", "base.lr", "base.weight_decay", "base.batch", "base.max_iterations",
        "finetune.epochs", "finetune.lr", "finetune.weight_decay", "finetune.batch",
        "finetune.max_iterations", "finetune.freeze_body",
        "oversample_rate", "detect.parallel",
        "binary.class_a", "binary.class_b", "binary.train", "binary.val", "binary.test",
        "binary.epochs", "binary.lr", "binary.weight_decay", "binary.batch",
        "binary.max_iterations",
        "entropy.bins", "entropy.limit", "export_ppm",
    };
    return keys;
}

}  // namespace

ConfigMap ConfigMap::from_text(const std::string& text) {
    ConfigMap cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw UsageError("config line " + std::to_string(lineno) + ": empty key");
        if (!known_keys().count(key))
            throw UsageError("config line " + std::to_string(lineno) + ": unknown key '" +
                             key + "'");
        cfg.kv_[key] = value;
    }
    return cfg;
}

ConfigMap ConfigMap::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open config file: " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return from_text(buf.str());
}

std::string ConfigMap::get_str(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

int64_t ConfigMap::get_int(const std::string& key, int64_t fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    int64_t v = 0;
    const auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (res.ec != std::errc() || res.ptr != it->second.data() + it->second.size())
        throw UsageError("config key '" + key + "': '" + it->second + "' is not an integer");
    return v;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': '" + it->second + "' is not a number");
    }
}

std::string ConfigMap::to_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : kv_) os << k << '=' << v << '\n';
    return os.str();
}

const char* color_mode_name(ColorMode m) {
    switch (m) {
        case ColorMode::Color: return "color";
        case ColorMode::GrayDisplay: return "gray-display";
        case ColorMode::GraySensor: return "gray-sensor";
    }
    return "?";
}

ColorMode parse_color_mode(const std::string& s) {
    if (s == "color") return ColorMode::Color;
    if (s == "gray-display") return ColorMode::GrayDisplay;
    if (s == "gray-sensor") return ColorMode::GraySensor;
    throw UsageError("mode must be color, gray-display, or gray-sensor (got '" + s + "')");
}

ExperimentConfig ExperimentConfig::from_map(const ConfigMap& m) {
    ExperimentConfig c;
    c.display_width = static_cast<int>(m.get_int("display.width_px", c.display_width));
    c.display_height = static_cast<int>(m.get_int("display.height_px", c.display_height));
    c.display_extent_mm = m.get_double("display.extent_mm", c.display_extent_mm);
    c.sensor_width = static_cast<int>(m.get_int("sensor.width_px", c.sensor_width));
    c.sensor_height = static_cast<int>(m.get_int("sensor.height_px", c.sensor_height));
    c.sensor_pitch_mm = m.get_double("sensor.pitch_mm", c.sensor_pitch_mm);
    c.sensor_downsample = static_cast<int>(m.get_int("sensor.downsample", c.sensor_downsample));
    c.t_mm = m.get_double("gap.t_mm", c.t_mm);
    c.dx_mm = m.get_double("gap.dx_mm", c.dx_mm);
    c.dy_mm = m.get_double("gap.dy_mm", c.dy_mm);
    c.mode = parse_color_mode(m.get_str("mode", "color"));
    c.exposure = m.get_str("exposure", c.exposure);
    c.noise_sigma = m.get_double("noise_sigma", c.noise_sigma);
    c.matrix_budget_bytes =
        static_cast<uint64_t>(m.get_int("matrix_budget_mb", 512)) << 20;
    {
        const std::string paths = m.get_str("data.cifar", "");
        std::istringstream ps(paths);
        std::string item;
        while (std::getline(ps, item, ',')) {
            if (!item.empty()) c.cifar_paths.push_back(item);
        }
    }
    c.limit_per_class = static_cast<int>(m.get_int("data.limit_per_class", 0));
    c.out_dir = m.get_str("out_dir", c.out_dir);
    c.cache_dir = m.get_str("cache_dir", "");
    c.split_train = static_cast<int>(m.get_int("split.train", c.split_train));
    c.split_val = static_cast<int>(m.get_int("split.val", c.split_val));
    c.split_test = static_cast<int>(m.get_int("split.test", c.split_test));
    c.seed = static_cast<uint64_t>(m.get_int("seed", 1));

    auto phase = [&m](const std::string& prefix, TrainPhaseConfig d) {
        TrainPhaseConfig p;
        p.epochs = static_cast<int>(m.get_int(prefix + ".epochs", d.epochs));
        p.learning_rate = m.get_double(prefix + ".lr", d.learning_rate);
        p.weight_decay = m.get_double(prefix + ".weight_decay", d.weight_decay);
        p.batch_size = static_cast<int>(m.get_int(prefix + ".batch", d.batch_size));
        p.max_iterations = m.get_int(prefix + ".max_iterations", d.max_iterations);
        return p;
    };
    c.base = phase("base", c.base);
    c.finetune = phase("finetune", c.finetune);
    c.binary = phase("binary", c.binary);
    c.finetune_freeze_body = m.get_int("finetune.freeze_body", 0) != 0;
    c.oversample_rate = static_cast<int>(m.get_int("oversample_rate", c.oversample_rate));
    c.detect_parallel = static_cast<int>(m.get_int("detect.parallel", c.detect_parallel));
    c.binary_class_a = static_cast<int>(m.get_int("binary.class_a", c.binary_class_a));
    c.binary_class_b = static_cast<int>(m.get_int("binary.class_b", c.binary_class_b));
    c.binary_train = static_cast<int>(m.get_int("binary.train", c.binary_train));
    c.binary_val = static_cast<int>(m.get_int("binary.val", c.binary_val));
    c.binary_test = static_cast<int>(m.get_int("binary.test", c.binary_test));
    c.entropy_bins = static_cast<int>(m.get_int("entropy.bins", c.entropy_bins));
    c.entropy_limit = static_cast<int>(m.get_int("entropy.limit", c.entropy_limit));
    c.export_ppm = static_cast<int>(m.get_int("export_ppm", c.export_ppm));
    c.validate();
    return c;
}

ConfigMap ExperimentConfig::to_map() const {
    ConfigMap m;
    m.set("display.width_px", std::to_string(display_width));
    m.set("display.height_px", std::to_string(display_height));
    m.set("display.extent_mm", format_double(display_extent_mm));
    m.set("sensor.width_px", std::to_string(sensor_width));
    m.set("sensor.height_px", std::to_string(sensor_height));
    m.set("sensor.pitch_mm", format_double(sensor_pitch_mm));
    m.set("sensor.downsample", std::to_string(sensor_downsample));
    m.set("gap.t_mm", format_double(t_mm));
    m.set("gap.dx_mm", format_double(dx_mm));
    m.set("gap.dy_mm", format_double(dy_mm));
    m.set("mode", color_mode_name(mode));
    m.set("exposure", exposure);
    m.set("noise_sigma", format_double(noise_sigma));
    m.set("matrix_budget_mb", std::to_string(matrix_budget_bytes >> 20));
    {
        std::string joined;
        for (const auto& p : cifar_paths) {
            if (!joined.empty()) joined += ",";
            joined += p;
        }
        m.set("data.cifar", joined);
    }
    m.set("data.limit_per_class", std::to_string(limit_per_class));
    m.set("out_dir", out_dir);
    if (!cache_dir.empty()) m.set("cache_dir", cache_dir);
    m.set("split.train", std::to_string(split_train));
    m.set("split.val", std::to_string(split_val));
    m.set("split.test", std::to_string(split_test));
    m.set("seed", std::to_string(seed));
    auto phase = [&m](const std::string& prefix, const TrainPhaseConfig& p) {
        m.set(prefix + ".epochs", std::to_string(p.epochs));
        m.set(prefix + ".lr", format_double(p.learning_rate));
        m.set(prefix + ".weight_decay", format_double(p.weight_decay));
        m.set(prefix + ".batch", std::to_string(p.batch_size));
        m.set(prefix + ".max_iterations", std::to_string(p.max_iterations));
    };
    phase("base", base);
    phase("finetune", finetune);
    phase("binary", binary);
    m.set("finetune.freeze_body", finetune_freeze_body ? "1" : "0");
    m.set("oversample_rate", std::to_string(oversample_rate));
    m.set("detect.parallel", std::to_string(detect_parallel));
    m.set("binary.class_a", std::to_string(binary_class_a));
    m.set("binary.class_b", std::to_string(binary_class_b));
    m.set("binary.train", std::to_string(binary_train));
    m.set("binary.val", std::to_string(binary_val));
    m.set("binary.test", std::to_string(binary_test));
    m.set("entropy.bins", std::to_string(entropy_bins));
    m.set("entropy.limit", std::to_string(entropy_limit));
    m.set("export_ppm", std::to_string(export_ppm));
    return m;
}

void ExperimentConfig::validate() const {
    if (cifar_paths.empty()) throw UsageError("data.cifar must name at least one file");
    if (sensor_downsample < 1) throw UsageError("sensor.downsample must be >= 1");
    if (oversample_rate < 1) throw UsageError("oversample_rate must be >= 1");
    if (detect_parallel < 1) throw UsageError("detect.parallel must be >= 1");
    if (exposure != "per-image" && exposure.rfind("fixed:", 0) != 0)
        throw UsageError("exposure must be per-image or fixed:<gain>");
    if (entropy_bins < 2 || entropy_bins > 256)
        throw UsageError("entropy.bins must be in [2, 256]");
}

std::string ExperimentConfig::resolved_cache_dir() const {
    if (!cache_dir.empty()) return cache_dir;
    if (const char* env = std::getenv("BARECAM_CACHE_DIR"); env && *env) return env;
    return out_dir + "/cache";
}

}  // namespace barecam::pipe
