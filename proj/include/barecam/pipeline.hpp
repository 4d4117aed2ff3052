#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "barecam/config.hpp"
#include "barecam/datasets.hpp"
#include "barecam/evalmetrics.hpp"
#include "barecam/infoloss.hpp"
#include "barecam/train.hpp"

namespace barecam::pipe {

// Packed labeled-image dataset ("OFDS"): header, then per record one label
// byte and the CHW samples. Bit-exact round trip.
void write_dataset(const std::string& path, const std::vector<LabeledImage>& images);
std::vector<LabeledImage> read_dataset(const std::string& path);

struct SimulateResult {
    int count = 0;
    uint64_t fingerprint = 0;
    int degenerate_exposures = 0;
    bool cache_hit = false;
    bool cache_rebuilt = false;  // stale/corrupt cache replaced, with a warning
};

// One experiment condition (geometry + color mode + seeds) rooted at
// config.out_dir. Stages run in order; each persists its outputs and a
// deterministic manifest section (wall-clock goes to a separate timings file).
class Experiment {
public:
    explicit Experiment(ExperimentConfig cfg);
    const ExperimentConfig& config() const { return cfg_; }

    std::string scenes_path() const { return cfg_.out_dir + "/scenes.bin"; }
    std::string sensors_path() const { return cfg_.out_dir + "/sensors.bin"; }
    std::string base_checkpoint_path() const { return cfg_.out_dir + "/checkpoints/base.ofnn"; }
    std::string detect_checkpoint_path(int cls) const {
        return cfg_.out_dir + "/checkpoints/detect_" + std::to_string(cls) + ".ofnn";
    }
    std::string binary_checkpoint_path() const { return cfg_.out_dir + "/checkpoints/binary.ofnn"; }
    std::string detect_report_path() const { return cfg_.out_dir + "/reports/detect.tsv"; }
    std::string binary_report_path() const { return cfg_.out_dir + "/reports/binary.tsv"; }
    std::string entropy_report_path() const { return cfg_.out_dir + "/reports/entropy.tsv"; }
    std::string manifest_path() const { return cfg_.out_dir + "/manifest.tsv"; }

    // Renders every corpus image through the (cached) transport matrix,
    // quantizes, applies the color mode, and writes scenes + sensors.
    SimulateResult simulate();

    // Shannon information loss between ground-truth scenes and sensor frames.
    info::EntropyReport run_entropy();

    // 10-class pretraining on the simulated sensor images.
    nn::TrainLog run_base_pretrain();

    // One binary detector per class: relabel, oversample, transfer the base
    // head, fine-tune, evaluate test AUC.
    eval::ExperimentReport run_detection_suite();

    // A single class's detector, exactly as the suite runs it; the suite is
    // the independent composition of these.
    double run_detection_class(int positive_class);

    // Balanced two-class protocol on the small residual network.
    eval::ExperimentReport run_binary_experiment();

private:
    std::vector<LabeledImage> load_scenes_or_fail(const char* stage) const;
    std::vector<LabeledImage> load_sensors_or_fail(const char* stage) const;
    std::string resolved_cache_dir_checked();
    void write_stage_manifest(const std::string& stage,
                              const std::vector<std::pair<std::string, std::string>>& rows);
    void rebuild_manifest();
    void record_timing(const std::string& stage, double seconds);

    ExperimentConfig cfg_;
};

// Subcommands: simulate, entropy, train-base, detect-suite, binary, report.
// Exit codes: 0 success, 1 usage error, 2 data/format error.
int cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace barecam::pipe
