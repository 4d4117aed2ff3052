#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "barecam/network.hpp"

namespace barecam::nn {

enum class LossKind { SoftmaxCrossEntropy, SigmoidBinaryCrossEntropy };

struct TrainConfig {
    int epochs = 10;
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    int batch_size = 64;
    uint64_t seed = 0;
    LossKind loss = LossKind::SoftmaxCrossEntropy;
    // 0 means no cap; otherwise training stops after this many gradient steps
    // even mid-epoch.
    int64_t max_iterations = 0;
};

// Training abort on non-finite loss, naming the epoch and batch.
struct DivergenceError : std::runtime_error {
    int epoch;
    int batch;
    DivergenceError(int e, int b)
        : std::runtime_error("training diverged: non-finite loss at epoch " +
                             std::to_string(e) + ", batch " + std::to_string(b)),
          epoch(e), batch(b) {}
};

// Examples as flat NHWC float rows in [0, 1].
struct BatchSet {
    int h = 0, w = 0, c = 0;
    std::vector<float> inputs;  // count * h*w*c
    std::vector<int> labels;

    size_t count() const { return labels.size(); }
    size_t row() const { return static_cast<size_t>(h) * w * c; }
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_metric = 0.0;  // accuracy
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    int64_t iterations = 0;

    std::string to_text() const;
};

// Mean loss over the batch plus the gradient wrt logits.
double softmax_ce_loss(const Tensor<float>& logits, const std::vector<int>& labels,
                       Tensor<float>& dlogits);
double sigmoid_bce_loss(const Tensor<float>& logits, const std::vector<int>& labels,
                        Tensor<float>& dlogits);

// Seeded-deterministic minibatch training; logs per-epoch train loss and
// validation accuracy. Pass an empty val set to skip validation.
TrainLog train(Network<float>& net, const BatchSet& train_set, const BatchSet& val_set,
               const TrainConfig& config);

// Forward scores for every example: sigmoid nets yield one probability per
// example, softmax nets `classes` probabilities.
std::vector<std::vector<float>> predict_scores(Network<float>& net, const BatchSet& set,
                                               int batch_size = 256);

double accuracy_of(Network<float>& net, const BatchSet& set, int batch_size = 256);

}  // namespace barecam::nn
