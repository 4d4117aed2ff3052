#include "barecam/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "barecam/binio.hpp"
#include "barecam/network.hpp"
#include "barecam/optics.hpp"
#include "barecam/rng.hpp"
#include "barecam/textio.hpp"

namespace barecam::pipe {

namespace fs = std::filesystem;

namespace {

constexpr char kDatasetMagic[4] = {'O', 'F', 'D', 'S'};
constexpr uint16_t kDatasetVersion = 1;

// Static block partition over [0, n); deterministic regardless of scheduling
// since every index is computed the same way.
void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const int chunk = (n + workers - 1) / workers;
    for (int t = 0; t < workers; ++t) {
        const int lo = t * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (int i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

struct StageTimer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

nn::BatchSet batch_from_images(const std::vector<LabeledImage>& images,
                               const std::vector<int>& indices,
                               const std::vector<int>* labels_override = nullptr) {
    if (indices.empty()) return {};
    const ImageU8& first = images[indices[0]].image;
    nn::BatchSet set;
    set.h = first.height;
    set.w = first.width;
    set.c = first.channels;
    set.inputs.resize(indices.size() * set.row());
    set.labels.resize(indices.size());
    const size_t plane = first.plane();
    for (size_t i = 0; i < indices.size(); ++i) {
        const ImageU8& img = images[indices[i]].image;
        float* dst = set.inputs.data() + i * set.row();
        // CHW bytes to NHWC floats in [0, 1]
        for (int y = 0; y < set.h; ++y)
            for (int x = 0; x < set.w; ++x)
                for (int c = 0; c < set.c; ++c)
                    dst[(static_cast<size_t>(y) * set.w + x) * set.c + c] =
                        static_cast<float>(img.data[plane * c + static_cast<size_t>(y) * set.w + x]) /
                        255.0f;
        set.labels[i] = labels_override ? (*labels_override)[i] : images[indices[i]].label;
    }
    return set;
}

nn::BatchSet batch_from_entries(const std::vector<LabeledImage>& images,
                                const std::vector<data::SplitEntry>& entries) {
    std::vector<int> idx(entries.size());
    std::vector<int> labels(entries.size());
    for (size_t i = 0; i < entries.size(); ++i) {
        idx[i] = entries[i].source_index;
        labels[i] = entries[i].label;
    }
    return batch_from_images(images, idx, &labels);
}

int count_classes(const std::vector<LabeledImage>& images) {
    int n = 0;
    for (const auto& li : images) n = std::max(n, li.label + 1);
    return n;
}

}  // namespace

void write_dataset(const std::string& path, const std::vector<LabeledImage>& images) {
    if (images.empty()) throw DomainError("write_dataset: empty image list");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + path);
    const ImageU8& first = images[0].image;
    bin::write_magic(os, kDatasetMagic);
    bin::write_raw<uint16_t>(os, kDatasetVersion);
    bin::write_raw<uint32_t>(os, static_cast<uint32_t>(images.size()));
    bin::write_raw<uint32_t>(os, static_cast<uint32_t>(first.channels));
    bin::write_raw<uint32_t>(os, static_cast<uint32_t>(first.height));
    bin::write_raw<uint32_t>(os, static_cast<uint32_t>(first.width));
    for (const auto& li : images) {
        if (li.image.channels != first.channels || li.image.height != first.height ||
            li.image.width != first.width)
            throw ShapeError("write_dataset: images disagree in shape");
        bin::write_raw<uint8_t>(os, static_cast<uint8_t>(li.label));
        bin::write_vec(os, li.image.data);
    }
    if (!os) throw FormatError("short write: " + path);
}

std::vector<LabeledImage> read_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path);
    bin::expect_magic(is, kDatasetMagic, "dataset");
    const auto version = bin::read_raw<uint16_t>(is, "version");
    if (version != kDatasetVersion)
        throw FormatError("dataset version " + std::to_string(version) + " not supported");
    const auto count = bin::read_raw<uint32_t>(is, "count");
    const auto channels = bin::read_raw<uint32_t>(is, "channels");
    const auto h = bin::read_raw<uint32_t>(is, "height");
    const auto w = bin::read_raw<uint32_t>(is, "width");
    std::vector<LabeledImage> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        LabeledImage li;
        li.label = bin::read_raw<uint8_t>(is, "label");
        li.image = ImageU8(static_cast<int>(channels), static_cast<int>(h),
                           static_cast<int>(w));
        bin::read_vec(is, li.image.data, li.image.size(), "pixels");
        out.push_back(std::move(li));
    }
    return out;
}

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    fs::create_directories(cfg_.out_dir);
    fs::create_directories(cfg_.out_dir + "/checkpoints");
    fs::create_directories(cfg_.out_dir + "/reports");
    fs::create_directories(cfg_.out_dir + "/manifests");
    // Config snapshot is part of the manifest and identical for every stage.
    const ConfigMap snapshot = cfg_.to_map();
    std::ofstream os(cfg_.out_dir + "/manifests/config.tsv");
    for (const auto& [k, v] : snapshot.entries()) os << k << '\t' << v << '\n';
}

std::vector<LabeledImage> Experiment::load_scenes_or_fail(const char* stage) const {
    if (!fs::exists(scenes_path()))
        throw StateError(std::string(stage) + ": scenes dataset missing; run simulate first");
    return read_dataset(scenes_path());
}

std::vector<LabeledImage> Experiment::load_sensors_or_fail(const char* stage) const {
    if (!fs::exists(sensors_path()))
        throw StateError(std::string(stage) + ": sensor dataset missing; run simulate first");
    return read_dataset(sensors_path());
}

void Experiment::write_stage_manifest(
    const std::string& stage, const std::vector<std::pair<std::string, std::string>>& rows) {
    std::ofstream os(cfg_.out_dir + "/manifests/" + stage + ".tsv");
    for (const auto& [k, v] : rows) os << stage << '.' << k << '\t' << v << '\n';
    os.close();
    rebuild_manifest();
}

void Experiment::rebuild_manifest() {
    static const std::vector<std::string> order = {"config",       "simulate", "entropy",
                                                   "train-base",   "detect-suite",
                                                   "binary"};
    std::ofstream os(manifest_path());
    for (const auto& stage : order) {
        const std::string path = cfg_.out_dir + "/manifests/" + stage + ".tsv";
        if (!fs::exists(path)) continue;
        std::ifstream is(path);
        os << is.rdbuf();
    }
}

void Experiment::record_timing(const std::string& stage, double seconds) {
    std::ofstream os(cfg_.out_dir + "/timings.tsv", std::ios::app);
    os << stage << '\t' << format_double(seconds) << '\n';
}

SimulateResult Experiment::simulate() {
    StageTimer timer;
    using namespace barecam::optics;

    // Corpus: concatenated CIFAR batches, optionally capped per class.
    std::vector<LabeledImage> corpus;
    for (const auto& path : cfg_.cifar_paths) {
        auto part = data::load_cifar_binary(path);
        corpus.insert(corpus.end(), std::make_move_iterator(part.begin()),
                      std::make_move_iterator(part.end()));
    }
    if (cfg_.limit_per_class > 0) {
        std::map<int, int> seen;
        std::vector<LabeledImage> kept;
        for (auto& li : corpus)
            if (seen[li.label]++ < cfg_.limit_per_class) kept.push_back(std::move(li));
        corpus = std::move(kept);
    }
    if (corpus.empty()) throw DomainError("simulate: corpus is empty");

    // Ground-truth scenes at display resolution; gray-display converts the
    // scene before rendering.
    std::vector<LabeledImage> scenes(corpus.size());
    parallel_for(static_cast<int>(corpus.size()), cfg_.detect_parallel, [&](int i) {
        ImageU8 scene = data::resize_bilinear(corpus[i].image, cfg_.display_height,
                                              cfg_.display_width);
        if (cfg_.mode == ColorMode::GrayDisplay) scene = data::to_grayscale_luma(scene);
        scenes[i] = {std::move(scene), corpus[i].label};
    });

    DisplayGeometry display{cfg_.display_width, cfg_.display_height, cfg_.display_extent_mm,
                            scenes[0].image.channels};
    SensorGeometry sensor =
        SensorGeometry{cfg_.sensor_width, cfg_.sensor_height, cfg_.sensor_pitch_mm, 3}
            .downsampled(cfg_.sensor_downsample);
    GapConfig gap{cfg_.t_mm, cfg_.dx_mm, cfg_.dy_mm};

    SimulateResult res;
    res.fingerprint = geometry_fingerprint(display, sensor, gap);

    const std::string cache_dir = resolved_cache_dir_checked();
    char fp_hex[32];
    std::snprintf(fp_hex, sizeof fp_hex, "%016llx",
                  static_cast<unsigned long long>(res.fingerprint));
    const std::string cache_file = cache_dir + "/" + fp_hex + ".oftm";

    TransportMatrix transport;
    if (fs::exists(cache_file)) {
        try {
            transport = TransportMatrix::load(cache_file);
            res.cache_hit = true;
        } catch (const FormatError& e) {
            std::cerr << "warning: transport cache " << cache_file
                      << " unusable (" << e.what() << "); rebuilding\n";
            res.cache_rebuilt = true;
        }
    }
    if (!res.cache_hit) {
        transport = build_transport_matrix(display, sensor, gap, cfg_.matrix_budget_bytes);
        transport.save(cache_file);
    }

    ExposureMode expo = ExposureMode::PerImageMax;
    double gain = 1.0;
    if (cfg_.exposure.rfind("fixed:", 0) == 0) {
        expo = ExposureMode::FixedGain;
        gain = std::stod(cfg_.exposure.substr(6));
    }

    std::vector<LabeledImage> sensors(scenes.size());
    std::vector<uint8_t> degenerate(scenes.size(), 0);
    parallel_for(static_cast<int>(scenes.size()), cfg_.detect_parallel, [&](int i) {
        RawSensorImage raw = render_sensor_image(scenes[i].image, transport);
        SensorImage img = quantize_expose(raw, expo, gain);
        if (cfg_.noise_sigma > 0.0)
            img = add_sensor_noise(img, cfg_.noise_sigma,
                                   derive_seed(cfg_.seed, "noise", static_cast<uint64_t>(i)));
        degenerate[i] = img.degenerate_exposure ? 1 : 0;
        ImageU8 pixels = std::move(img.pixels);
        if (cfg_.mode == ColorMode::GraySensor) pixels = data::to_grayscale_luma(pixels);
        sensors[i] = {std::move(pixels), scenes[i].label};
    });
    res.degenerate_exposures =
        static_cast<int>(std::count(degenerate.begin(), degenerate.end(), 1));
    res.count = static_cast<int>(sensors.size());

    write_dataset(scenes_path(), scenes);
    write_dataset(sensors_path(), sensors);

    if (cfg_.export_ppm > 0) {
        fs::create_directories(cfg_.out_dir + "/ppm");
        const int n = std::min<int>(cfg_.export_ppm, res.count);
        for (int i = 0; i < n; ++i) {
            write_ppm(sensors[i].image, cfg_.out_dir + "/ppm/sensor_" + std::to_string(i) + ".ppm");
            write_ppm(scenes[i].image, cfg_.out_dir + "/ppm/scene_" + std::to_string(i) + ".ppm");
        }
    }

    write_stage_manifest(
        "simulate",
        {{"count", std::to_string(res.count)},
         {"fingerprint", fp_hex},
         {"seed.noise_base", std::to_string(derive_seed(cfg_.seed, "noise", 0))},
         {"mode", color_mode_name(cfg_.mode)},
         {"t_mm", format_double(cfg_.t_mm)},
         {"sensor_px", std::to_string(sensor.width_px) + "x" + std::to_string(sensor.height_px)},
         {"degenerate_exposures", std::to_string(res.degenerate_exposures)},
         {"scenes", scenes_path()},
         {"sensors", sensors_path()}});
    record_timing("simulate", timer.seconds());
    return res;
}

std::string Experiment::resolved_cache_dir_checked() {
    const std::string dir = cfg_.resolved_cache_dir();
    fs::create_directories(dir);
    return dir;
}

info::EntropyReport Experiment::run_entropy() {
    StageTimer timer;
    auto scenes = load_scenes_or_fail("entropy");
    auto sensors = load_sensors_or_fail("entropy");
    if (scenes.size() != sensors.size())
        throw ShapeError("entropy: scenes and sensors are misaligned");
    size_t n = scenes.size();
    if (cfg_.entropy_limit > 0) n = std::min(n, static_cast<size_t>(cfg_.entropy_limit));
    std::vector<ImageU8> gt, sn;
    gt.reserve(n);
    sn.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        gt.push_back(scenes[i].image);
        sn.push_back(sensors[i].image);
    }
    auto report = info::information_loss(gt, sn, cfg_.entropy_bins);
    std::ofstream os(entropy_report_path());
    os << report.to_text();
    os.close();

    write_stage_manifest(
        "entropy",
        {{"images", std::to_string(n)},
         {"bins", std::to_string(cfg_.entropy_bins)},
         {"mean_relative_loss", format_double(report.mean_relative_loss)},
         {"excluded_zero_entropy", std::to_string(report.excluded_zero_entropy)},
         {"report", entropy_report_path()}});
    record_timing("entropy", timer.seconds());
    return report;
}

nn::TrainLog Experiment::run_base_pretrain() {
    StageTimer timer;
    auto sensors = load_sensors_or_fail("train-base");
    const int classes = count_classes(sensors);
    const auto idx = data::make_stratified_split(
        sensors, {cfg_.split_train, cfg_.split_val, cfg_.split_test},
        derive_seed(cfg_.seed, "split"));

    auto train_set = batch_from_images(sensors, idx.train);
    auto val_set = batch_from_images(sensors, idx.val);

    nn::Network<float> net(train_set.h, train_set.w, train_set.c,
                           nn::small_convnet10_specs(classes));
    net.init_params(derive_seed(cfg_.seed, "base-init"));

    nn::TrainConfig tc;
    tc.epochs = cfg_.base.epochs;
    tc.learning_rate = cfg_.base.learning_rate;
    tc.weight_decay = cfg_.base.weight_decay;
    tc.batch_size = cfg_.base.batch_size;
    tc.max_iterations = cfg_.base.max_iterations;
    tc.seed = derive_seed(cfg_.seed, "base-train");
    tc.loss = nn::LossKind::SoftmaxCrossEntropy;

    auto log = nn::train(net, train_set, val_set, tc);
    nn::save_checkpoint(net, base_checkpoint_path());
    {
        std::ofstream os(cfg_.out_dir + "/reports/base_trainlog.tsv");
        os << log.to_text();
    }

    std::vector<std::pair<std::string, std::string>> rows = {
        {"classes", std::to_string(classes)},
        {"train", std::to_string(train_set.count())},
        {"val", std::to_string(val_set.count())},
        {"iterations", std::to_string(log.iterations)},
        {"checkpoint", base_checkpoint_path()},
        {"seed.split", std::to_string(derive_seed(cfg_.seed, "split"))},
        {"seed.init", std::to_string(derive_seed(cfg_.seed, "base-init"))},
        {"seed.train", std::to_string(derive_seed(cfg_.seed, "base-train"))},
    };
    if (!log.epochs.empty()) {
        rows.push_back({"final_train_loss", format_double(log.epochs.back().train_loss)});
        rows.push_back({"final_val_accuracy", format_double(log.epochs.back().val_metric)});
    }
    write_stage_manifest("train-base", rows);
    record_timing("train-base", timer.seconds());
    return log;
}

double Experiment::run_detection_class(int positive_class) {
    auto sensors = load_sensors_or_fail("detect-suite");
    if (!fs::exists(base_checkpoint_path()))
        throw StateError("detect-suite: base checkpoint missing; run train-base first");
    const auto base = nn::load_checkpoint(base_checkpoint_path());

    auto split = data::make_detection_split(
        sensors, positive_class, {cfg_.split_train, cfg_.split_val, cfg_.split_test},
        derive_seed(cfg_.seed, "split"));
    auto over = data::oversample_minority(
        split, cfg_.oversample_rate, derive_seed(cfg_.seed, "oversample", positive_class));
    fs::create_directories(cfg_.out_dir + "/splits");
    {
        std::ofstream os(cfg_.out_dir + "/splits/detect_" + std::to_string(positive_class) +
                         ".tsv");
        os << data::split_manifest(over);
    }
    auto train_set = batch_from_entries(sensors, over.train);
    auto val_set = batch_from_entries(sensors, split.val);
    auto test_set = batch_from_entries(sensors, split.test);

    auto net = base.transfer_head(1, derive_seed(cfg_.seed, "head", positive_class));
    if (cfg_.finetune_freeze_body) net.set_frozen_prefix(net.head_boundary());
    nn::TrainConfig tc;
    tc.epochs = cfg_.finetune.epochs;
    tc.learning_rate = cfg_.finetune.learning_rate;
    tc.weight_decay = cfg_.finetune.weight_decay;
    tc.batch_size = cfg_.finetune.batch_size;
    tc.max_iterations = cfg_.finetune.max_iterations;
    tc.seed = derive_seed(cfg_.seed, "finetune", positive_class);
    tc.loss = nn::LossKind::SigmoidBinaryCrossEntropy;
    nn::train(net, train_set, val_set, tc);
    nn::save_checkpoint(net, detect_checkpoint_path(positive_class));

    const auto scores = nn::predict_scores(net, test_set);
    eval::ScoredSet ss;
    ss.scores.reserve(scores.size());
    for (const auto& s : scores) ss.scores.push_back(s[0]);
    ss.labels = test_set.labels;
    return eval::roc_auc(ss);
}

eval::ExperimentReport Experiment::run_detection_suite() {
    StageTimer timer;
    auto sensors = load_sensors_or_fail("detect-suite");
    if (!fs::exists(base_checkpoint_path()))
        throw StateError("detect-suite: base checkpoint missing; run train-base first");
    fs::create_directories(cfg_.out_dir + "/splits");
    const int classes = count_classes(sensors);

    std::vector<double> auc(classes, 0.0);
    std::vector<std::string> failures(classes);
    parallel_for(classes, cfg_.detect_parallel, [&](int c) {
        try {
            auc[c] = run_detection_class(c);
        } catch (const std::exception& e) {
            failures[c] = e.what();
        }
    });
    for (int c = 0; c < classes; ++c)
        if (!failures[c].empty())
            throw StateError("detect-suite: class " + std::to_string(c) + " failed: " +
                             failures[c]);

    std::map<int, double> per_class;
    for (int c = 0; c < classes; ++c) per_class[c] = auc[c];
    auto report = eval::aggregate_report(
        per_class, {{"t_mm", format_double(cfg_.t_mm)},
                    {"mode", color_mode_name(cfg_.mode)},
                    {"seed", std::to_string(cfg_.seed)},
                    {"oversample", std::to_string(cfg_.oversample_rate)}});
    {
        std::ofstream os(detect_report_path());
        os << report.to_text();
    }

    std::vector<std::pair<std::string, std::string>> rows = {
        {"classes", std::to_string(classes)},
        {"oversample_rate", std::to_string(cfg_.oversample_rate)},
        {"mean_auc", format_double(report.mean_auc)},
        {"report", detect_report_path()},
    };
    for (int c = 0; c < classes; ++c)
        rows.push_back({"auc_class_" + std::to_string(c), format_double(auc[c])});
    rows.push_back({"seed.split", std::to_string(derive_seed(cfg_.seed, "split"))});
    for (int c = 0; c < classes; ++c) {
        rows.push_back({"seed.head_" + std::to_string(c),
                        std::to_string(derive_seed(cfg_.seed, "head", c))});
        rows.push_back({"seed.finetune_" + std::to_string(c),
                        std::to_string(derive_seed(cfg_.seed, "finetune", c))});
        rows.push_back({"seed.oversample_" + std::to_string(c),
                        std::to_string(derive_seed(cfg_.seed, "oversample", c))});
    }
    write_stage_manifest("detect-suite", rows);
    record_timing("detect-suite", timer.seconds());
    return report;
}

eval::ExperimentReport Experiment::run_binary_experiment() {
    StageTimer timer;
    auto sensors = load_sensors_or_fail("binary");
    auto split = data::make_binary_split(
        sensors, cfg_.binary_class_a, cfg_.binary_class_b,
        {cfg_.binary_train, cfg_.binary_val, cfg_.binary_test},
        derive_seed(cfg_.seed, "binary-split"));

    // A "balanced" run must actually be balanced.
    int pos = 0;
    for (const auto& e : split.train) pos += e.label;
    const double frac = static_cast<double>(pos) / split.train.size();
    if (frac < 0.45 || frac > 0.55)
        throw UsageError("binary: training split is " + format_double(frac * 100.0) +
                         "% positive, beyond the 55/45 balance bound");

    fs::create_directories(cfg_.out_dir + "/splits");
    {
        std::ofstream os(cfg_.out_dir + "/splits/binary.tsv");
        os << data::split_manifest(split);
    }
    auto train_set = batch_from_entries(sensors, split.train);
    auto val_set = batch_from_entries(sensors, split.val);
    auto test_set = batch_from_entries(sensors, split.test);

    nn::Network<float> net(train_set.h, train_set.w, train_set.c, nn::small_resnet_specs(2));
    net.init_params(derive_seed(cfg_.seed, "binary-init"));
    nn::TrainConfig tc;
    tc.epochs = cfg_.binary.epochs;
    tc.learning_rate = cfg_.binary.learning_rate;
    tc.weight_decay = cfg_.binary.weight_decay;
    tc.batch_size = cfg_.binary.batch_size;
    tc.max_iterations = cfg_.binary.max_iterations;
    tc.seed = derive_seed(cfg_.seed, "binary-train");
    tc.loss = nn::LossKind::SoftmaxCrossEntropy;
    nn::train(net, train_set, val_set, tc);
    nn::save_checkpoint(net, binary_checkpoint_path());

    const auto scores = nn::predict_scores(net, test_set);
    std::vector<std::array<double, 2>> probs(scores.size());
    eval::ScoredSet ss;
    for (size_t i = 0; i < scores.size(); ++i) {
        probs[i] = {static_cast<double>(scores[i][0]), static_cast<double>(scores[i][1])};
        ss.scores.push_back(scores[i][1]);
    }
    ss.labels = test_set.labels;
    const double acc = eval::accuracy_argmax(probs, test_set.labels);
    const double auc = eval::roc_auc(ss);

    auto report = eval::aggregate_report(
        {{cfg_.binary_class_b, auc}},
        {{"t_mm", format_double(cfg_.t_mm)},
         {"mode", color_mode_name(cfg_.mode)},
         {"seed", std::to_string(cfg_.seed)},
         {"class_a", std::to_string(cfg_.binary_class_a)},
         {"class_b", std::to_string(cfg_.binary_class_b)}});
    report.has_accuracy = true;
    report.accuracy = acc;
    {
        std::ofstream os(binary_report_path());
        os << report.to_text();
    }

    write_stage_manifest("binary",
                         {{"classes", std::to_string(cfg_.binary_class_a) + "," +
                                          std::to_string(cfg_.binary_class_b)},
                          {"seed.split", std::to_string(derive_seed(cfg_.seed, "binary-split"))},
                          {"seed.init", std::to_string(derive_seed(cfg_.seed, "binary-init"))},
                          {"seed.train", std::to_string(derive_seed(cfg_.seed, "binary-train"))},
                          {"train", std::to_string(train_set.count())},
                          {"test", std::to_string(test_set.count())},
                          {"accuracy", format_double(acc)},
                          {"auc", format_double(auc)},
                          {"checkpoint", binary_checkpoint_path()},
                          {"report", binary_report_path()}});
    record_timing("binary", timer.seconds());
    return report;
}

namespace {

const char* kUsage =
    "usage: barecam <command> [--config FILE] [--set key=value ...]\n"
    "commands:\n"
    "  simulate      render the corpus through the transport model\n"
    "  entropy       Shannon information-loss analysis\n"
    "  train-base    pretrain the 10-class base model\n"
    "  detect-suite  per-class detection fine-tuning and AUC report\n"
    "  binary        balanced two-class protocol\n"
    "  report <dir>  print a summary of a run's manifest\n";

int run_report(const std::string& target, std::ostream& out) {
    std::string path = target;
    if (fs::is_directory(path)) path += "/manifest.tsv";
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open manifest: " + path);
    out << "run manifest: " << path << "\n";
    std::string line, last_stage;
    while (std::getline(is, line)) {
        const auto tab = line.find('\t');
        if (tab == std::string::npos) continue;
        std::string key = line.substr(0, tab);
        const std::string value = line.substr(tab + 1);
        const auto dot = key.find('.');
        const std::string stage = dot == std::string::npos ? key : key.substr(0, dot);
        if (stage != last_stage) {
            out << "[" << stage << "]\n";
            last_stage = stage;
        }
        out << "  " << (dot == std::string::npos ? key : key.substr(dot + 1)) << " = "
            << value << "\n";
    }
    return 0;
}

}  // namespace

int cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        if (args.empty()) {
            err << kUsage;
            return 1;
        }
        const std::string cmd = args[0];
        const bool known = cmd == "simulate" || cmd == "entropy" || cmd == "train-base" ||
                           cmd == "detect-suite" || cmd == "binary" || cmd == "report";
        if (!known) {
            err << "unknown command '" << cmd << "'\n" << kUsage;
            return 1;
        }

        ConfigMap map;
        std::string report_target;
        for (size_t i = 1; i < args.size(); ++i) {
            const std::string& a = args[i];
            if (a == "--config") {
                if (i + 1 >= args.size()) throw UsageError("--config needs a path");
                const ConfigMap file = ConfigMap::from_file(args[++i]);
                for (const auto& [k, v] : file.entries())
                    if (!map.has(k)) map.set(k, v);
            } else if (a == "--set") {
                if (i + 1 >= args.size()) throw UsageError("--set needs key=value");
                const std::string& kv = args[++i];
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw UsageError("--set needs key=value");
                ConfigMap one = ConfigMap::from_text(kv.substr(0, eq) + "=" + kv.substr(eq + 1));
                for (const auto& [k, v] : one.entries()) map.set(k, v);
            } else if (cmd == "report" && a[0] != '-') {
                report_target = a;
            } else {
                err << "unknown flag '" << a << "'\n" << kUsage;
                return 1;
            }
        }

        if (cmd == "report") {
            if (report_target.empty()) throw UsageError("report needs a run directory");
            return run_report(report_target, out);
        }

        Experiment exp(ExperimentConfig::from_map(map));
        if (cmd == "simulate") {
            const auto res = exp.simulate();
            out << "simulated " << res.count << " images (fingerprint "
                << std::hex << res.fingerprint << std::dec
                << (res.cache_hit ? ", cache hit" : ", matrix built") << ")\n";
        } else if (cmd == "entropy") {
            const auto rep = exp.run_entropy();
            out << "mean relative information loss: "
                << format_double(rep.mean_relative_loss) << " over "
                << rep.per_image_entropy_gt.size() << " images\n";
        } else if (cmd == "train-base") {
            const auto log = exp.run_base_pretrain();
            out << "base model trained, " << log.iterations << " iterations";
            if (!log.epochs.empty())
                out << ", final val accuracy " << format_double(log.epochs.back().val_metric);
            out << "\n";
        } else if (cmd == "detect-suite") {
            const auto rep = exp.run_detection_suite();
            out << "detection mean AUC " << format_double(rep.mean_auc) << " over "
                << rep.per_class_auc.size() << " classes\n";
        } else if (cmd == "binary") {
            const auto rep = exp.run_binary_experiment();
            out << "binary accuracy " << format_double(rep.accuracy) << ", AUC "
                << format_double(rep.per_class_auc.begin()->second) << "\n";
        }
        return 0;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n" << kUsage;
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace barecam::pipe
