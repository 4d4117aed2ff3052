#pragma once

// Independent reference implementations used by both the unit tests and the
// acceptance suite. These must stay decoupled from the library code paths
// they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "barecam/evalmetrics.hpp"
#include "barecam/network.hpp"
#include "barecam/rng.hpp"

namespace barecam::oracle {

// O(P*N) pair counting with ties worth one half.
inline double brute_force_auc(const eval::ScoredSet& s) {
    double num = 0.0;
    long pairs = 0;
    for (size_t i = 0; i < s.scores.size(); ++i) {
        if (s.labels[i] != 1) continue;
        for (size_t j = 0; j < s.scores.size(); ++j) {
            if (s.labels[j] != 0) continue;
            ++pairs;
            if (s.scores[i] > s.scores[j])
                num += 1.0;
            else if (s.scores[i] == s.scores[j])
                num += 0.5;
        }
    }
    return num / static_cast<double>(pairs);
}

inline eval::ScoredSet random_scored_set(Rng& rng, size_t max_n = 200) {
    eval::ScoredSet s;
    const size_t n = 2 + rng.below(max_n - 1);
    s.scores.resize(n);
    s.labels.resize(n);
    // Quantized scores so ties actually occur.
    for (size_t i = 0; i < n; ++i) s.scores[i] = static_cast<double>(rng.below(20)) / 10.0;
    bool has_pos = false, has_neg = false;
    for (size_t i = 0; i < n; ++i) {
        s.labels[i] = static_cast<int>(rng.below(2));
        has_pos |= s.labels[i] == 1;
        has_neg |= s.labels[i] == 0;
    }
    if (!has_pos) s.labels[0] = 1;
    if (!has_neg) s.labels[n - 1] = 0;
    return s;
}

// Inputs kept away from relu/max kinks so central differences stay clean.
inline nn::Tensor<double> random_fd_input(Rng& rng, int n, int h, int w, int c) {
    nn::Tensor<double> t({n, h, w, c});
    for (auto& v : t.data) {
        const double mag = rng.uniform(0.1, 1.1);
        v = rng.next_u64() & 1 ? mag : -mag;
    }
    return t;
}

inline void randomize_params(nn::Network<double>& net, Rng& rng) {
    for (int li = 0; li < net.layer_count(); ++li)
        for (auto& t : net.params(li))
            for (auto& v : t.data) v = rng.uniform(-0.6, 0.6);
}

// Loss = sum_i weight_i * output_i; central finite differences (h = 1e-5)
// over every parameter and input element against the analytic backward pass.
// Returns the worst relative error.
inline double max_grad_rel_error(nn::Network<double>& net, const nn::Tensor<double>& input,
                                 Rng& rng) {
    net.set_compute_input_grad(true);
    const nn::Tensor<double>& out = net.forward(input);
    nn::Tensor<double> lw;
    lw.shape = out.shape;
    lw.data.resize(out.data.size());
    for (auto& v : lw.data) v = rng.uniform(-1.0, 1.0);

    net.zero_grads();
    net.backward(lw);

    auto loss_at = [&](const nn::Tensor<double>& x) {
        const nn::Tensor<double>& y = net.forward(x);
        double acc = 0.0;
        for (size_t i = 0; i < y.data.size(); ++i) acc += lw.data[i] * y.data[i];
        return acc;
    };

    const double h = 1e-5;
    double worst = 0.0;
    auto update_worst = [&worst](double analytic, double numeric) {
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    };

    std::vector<std::vector<nn::Tensor<double>>> grads;
    for (int li = 0; li < net.layer_count(); ++li) grads.push_back(net.grads(li));
    const nn::Tensor<double> dinput = net.input_grad();

    for (int li = 0; li < net.layer_count(); ++li)
        for (size_t pi = 0; pi < net.params(li).size(); ++pi) {
            auto& t = net.params(li)[pi];
            for (size_t i = 0; i < t.data.size(); ++i) {
                const double keep = t.data[i];
                t.data[i] = keep + h;
                const double lp = loss_at(input);
                t.data[i] = keep - h;
                const double lm = loss_at(input);
                t.data[i] = keep;
                update_worst(grads[li][pi].data[i], (lp - lm) / (2.0 * h));
            }
        }

    nn::Tensor<double> x = input;
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double keep = x.data[i];
        x.data[i] = keep + h;
        const double lp = loss_at(x);
        x.data[i] = keep - h;
        const double lm = loss_at(x);
        x.data[i] = keep;
        update_worst(dinput.data[i], (lp - lm) / (2.0 * h));
    }
    return worst;
}

// Random single-layer (or minimal) configuration for one layer kind.
inline double layer_fd_trial(nn::LayerKind kind, int trial) {
    Rng rng(hash_tag(nn::layer_kind_name(kind)) + static_cast<uint64_t>(trial));
    const int h = 3 + static_cast<int>(rng.below(4));
    const int w = 3 + static_cast<int>(rng.below(4));
    const int c = 1 + static_cast<int>(rng.below(3));
    using nn::LayerSpec;
    std::vector<LayerSpec> specs;
    switch (kind) {
        case nn::LayerKind::Conv2d:
            specs = {LayerSpec::conv2d(1 + static_cast<int>(rng.below(3)),
                                       1 + static_cast<int>(rng.below(2)),
                                       static_cast<int>(rng.below(2)),
                                       1 + static_cast<int>(rng.below(3)))};
            break;
        case nn::LayerKind::Relu:
            specs = {LayerSpec::relu()};
            break;
        case nn::LayerKind::MaxPool:
            specs = {LayerSpec::maxpool(2, 1 + static_cast<int>(rng.below(2)))};
            break;
        case nn::LayerKind::GlobalMaxPool:
            specs = {LayerSpec::global_max_pool()};
            break;
        case nn::LayerKind::Dense:
            specs = {LayerSpec::dense(1 + static_cast<int>(rng.below(5)))};
            break;
        case nn::LayerKind::ResidualBlock:
            specs = {LayerSpec::residual_block(1 + static_cast<int>(rng.below(3)),
                                               1 + static_cast<int>(rng.below(2)))};
            break;
        case nn::LayerKind::Sigmoid:
            specs = {LayerSpec::sigmoid()};
            break;
        case nn::LayerKind::Softmax:
            specs = {LayerSpec::dense(2 + static_cast<int>(rng.below(4))),
                     LayerSpec::softmax()};
            break;
    }
    nn::Network<double> net(h, w, c, specs);
    randomize_params(net, rng);
    auto input = random_fd_input(rng, 1 + static_cast<int>(rng.below(3)), h, w, c);
    return max_grad_rel_error(net, input, rng);
}

}  // namespace barecam::oracle
