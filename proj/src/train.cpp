#include "barecam/train.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "barecam/textio.hpp"

namespace barecam::nn {

double softmax_ce_loss(const Tensor<float>& logits, const std::vector<int>& labels,
                       Tensor<float>& dlogits) {
    const int n = logits.shape[0];
    const int k = static_cast<int>(logits.numel() / n);
    if (static_cast<size_t>(n) != labels.size())
        throw ShapeError("loss: label count does not match batch");
    dlogits.shape = logits.shape;
    dlogits.data.assign(logits.data.size(), 0.0f);
    double loss = 0.0;
    for (int r = 0; r < n; ++r) {
        const float* z = logits.data.data() + static_cast<size_t>(r) * k;
        float* dz = dlogits.data.data() + static_cast<size_t>(r) * k;
        const int y = labels[r];
        if (y < 0 || y >= k) throw DomainError("loss: label out of range");
        float m = z[0];
        for (int i = 1; i < k; ++i) m = std::max(m, z[i]);
        double sum = 0.0;
        for (int i = 0; i < k; ++i) sum += std::exp(static_cast<double>(z[i]) - m);
        loss += std::log(sum) + m - z[y];
        for (int i = 0; i < k; ++i) {
            const double p = std::exp(static_cast<double>(z[i]) - m) / sum;
            dz[i] = static_cast<float>((p - (i == y ? 1.0 : 0.0)) / n);
        }
    }
    return loss / n;
}

double sigmoid_bce_loss(const Tensor<float>& logits, const std::vector<int>& labels,
                        Tensor<float>& dlogits) {
    const int n = logits.shape[0];
    if (logits.numel() != n)
        throw ShapeError("sigmoid loss expects one logit per example");
    if (static_cast<size_t>(n) != labels.size())
        throw ShapeError("loss: label count does not match batch");
    dlogits.shape = logits.shape;
    dlogits.data.assign(logits.data.size(), 0.0f);
    double loss = 0.0;
    for (int r = 0; r < n; ++r) {
        const double z = logits.data[r];
        const double y = labels[r];
        // max(z,0) - z*y + log1p(exp(-|z|)), stable for large |z|
        loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        const double p = 1.0 / (1.0 + std::exp(-z));
        dlogits.data[r] = static_cast<float>((p - y) / n);
    }
    return loss / n;
}

namespace {

void fill_batch(const BatchSet& set, const std::vector<int>& order, size_t first,
                size_t count, int h, int w, int c, Tensor<float>& batch,
                std::vector<int>& labels) {
    batch.shape = {static_cast<int>(count), h, w, c};
    const size_t row = set.row();
    batch.data.resize(count * row);
    labels.resize(count);
    for (size_t i = 0; i < count; ++i) {
        const int src = order[first + i];
        std::copy_n(set.inputs.begin() + static_cast<size_t>(src) * row, row,
                    batch.data.begin() + i * row);
        labels[i] = set.labels[src];
    }
}

void check_set(const Network<float>& net, const BatchSet& set, const char* what) {
    if (set.h != net.input_h() || set.w != net.input_w() || set.c != net.input_c())
        throw ShapeError(std::string(what) + " set is " + std::to_string(set.h) + "x" +
                         std::to_string(set.w) + "x" + std::to_string(set.c) +
                         ", network wants " + std::to_string(net.input_h()) + "x" +
                         std::to_string(net.input_w()) + "x" + std::to_string(net.input_c()));
    if (set.inputs.size() != set.count() * set.row())
        throw ShapeError(std::string(what) + " set: input buffer size mismatch");
}

}  // namespace

TrainLog train(Network<float>& net, const BatchSet& train_set, const BatchSet& val_set,
               const TrainConfig& config) {
    if (train_set.count() == 0) throw DomainError("train: empty training set");
    if (config.batch_size < 1) throw DomainError("train: batch size must be >= 1");
    if (!(config.learning_rate > 0.0)) throw DomainError("train: learning rate must be > 0");
    if (config.weight_decay < 0.0) throw DomainError("train: weight decay must be >= 0");
    check_set(net, train_set, "train");
    if (val_set.count() > 0) check_set(net, val_set, "val");

    const LayerKind last = net.specs().back().kind;
    if (config.loss == LossKind::SoftmaxCrossEntropy && last != LayerKind::Softmax)
        throw StateError("softmax cross-entropy needs a softmax output layer");
    if (config.loss == LossKind::SigmoidBinaryCrossEntropy && last != LayerKind::Sigmoid)
        throw StateError("sigmoid BCE needs a sigmoid output layer");

    TrainLog log;
    std::vector<int> order(train_set.count());
    std::iota(order.begin(), order.end(), 0);
    Tensor<float> batch, dlogits;
    std::vector<int> labels;
    int64_t steps = 0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        if (config.max_iterations > 0 && steps >= config.max_iterations) break;
        Rng shuffle_rng(derive_seed(config.seed, "epoch-shuffle", epoch));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        int64_t batches = 0;
        for (size_t first = 0; first < order.size(); first += config.batch_size) {
            if (config.max_iterations > 0 && steps >= config.max_iterations) break;
            const size_t count = std::min<size_t>(config.batch_size, order.size() - first);
            fill_batch(train_set, order, first, count, net.input_h(), net.input_w(),
                       net.input_c(), batch, labels);
            const Tensor<float>& logits = net.forward_logits(batch);
            const double loss = config.loss == LossKind::SoftmaxCrossEntropy
                                    ? softmax_ce_loss(logits, labels, dlogits)
                                    : sigmoid_bce_loss(logits, labels, dlogits);
            if (!std::isfinite(loss))
                throw DivergenceError(epoch, static_cast<int>(batches));
            net.zero_grads();
            net.backward_from_logits(dlogits);
            net.adam_step(config.learning_rate, config.weight_decay);
            loss_sum += loss;
            ++batches;
            ++steps;
        }
        EpochLog el;
        el.epoch = epoch;
        el.train_loss = batches > 0 ? loss_sum / batches : 0.0;
        el.val_metric = val_set.count() > 0 ? accuracy_of(net, val_set) : 0.0;
        log.epochs.push_back(el);
    }
    log.iterations = steps;
    return log;
}

std::vector<std::vector<float>> predict_scores(Network<float>& net, const BatchSet& set,
                                               int batch_size) {
    check_set(net, set, "predict");
    std::vector<std::vector<float>> out;
    out.reserve(set.count());
    std::vector<int> order(set.count());
    std::iota(order.begin(), order.end(), 0);
    Tensor<float> batch;
    std::vector<int> labels;
    for (size_t first = 0; first < set.count(); first += batch_size) {
        const size_t count = std::min<size_t>(batch_size, set.count() - first);
        fill_batch(set, order, first, count, net.input_h(), net.input_w(), net.input_c(),
                   batch, labels);
        const Tensor<float>& scores = net.forward(batch);
        const size_t k = scores.data.size() / count;
        for (size_t i = 0; i < count; ++i)
            out.emplace_back(scores.data.begin() + i * k, scores.data.begin() + (i + 1) * k);
    }
    return out;
}

double accuracy_of(Network<float>& net, const BatchSet& set, int batch_size) {
    if (set.count() == 0) throw DomainError("accuracy_of: empty set");
    const auto scores = predict_scores(net, set, batch_size);
    size_t hits = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        int pred;
        if (scores[i].size() == 1) {
            pred = scores[i][0] >= 0.5f ? 1 : 0;
        } else {
            pred = 0;
            for (size_t j = 1; j < scores[i].size(); ++j)
                if (scores[i][j] > scores[i][pred]) pred = static_cast<int>(j);
        }
        if (pred == set.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(scores.size());
}

std::string TrainLog::to_text() const {
    std::ostringstream os;
    for (const auto& e : epochs)
        os << e.epoch << '\t' << format_double(e.train_loss) << '\t'
           << format_double(e.val_metric) << '\n';
    os << "# iterations=" << iterations << '\n';
    return os.str();
}

}  // namespace barecam::nn
