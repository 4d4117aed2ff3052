#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

namespace barecam::eval {

struct ScoredSet {
    std::vector<double> scores;
    std::vector<int> labels;  // 0 or 1
};

// Mann-Whitney AUC with ties counted 0.5, computed by sorting. Equals
// brute-force pair counting exactly.
double roc_auc(const ScoredSet& s);

// Fraction of examples where (score >= threshold) matches the label.
double accuracy(const ScoredSet& s, double threshold = 0.5);

// Argmax form for two-unit softmax outputs.
double accuracy_argmax(const std::vector<std::array<double, 2>>& scores,
                       const std::vector<int>& labels);

struct ExperimentReport {
    std::map<int, double> per_class_auc;
    double mean_auc = 0.0;
    bool has_accuracy = false;
    double accuracy = 0.0;
    // Condition tags (t_mm, color mode, seed, ...), serialized with every record.
    std::map<std::string, std::string> tags;

    std::string to_text() const;
};

ExperimentReport aggregate_report(const std::map<int, double>& per_class,
                                  std::map<std::string, std::string> tags = {});

}  // namespace barecam::eval
