#include <cmath>
#include <filesystem>
#include <fstream>

#include "barecam/network.hpp"
#include "barecam/train.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace barecam;
using namespace barecam::nn;
using oracle::max_grad_rel_error;
using oracle::random_fd_input;
using oracle::randomize_params;

namespace {

void run_layer_fd_suite(LayerKind kind, int trials = 20) {
    for (int trial = 0; trial < trials; ++trial) {
        const double err = oracle::layer_fd_trial(kind, trial);
        INFO("kind=", layer_kind_name(kind), " trial=", trial, " err=", err);
        CHECK(err < 1e-3);
    }
}

}  // namespace

TEST_CASE("finite differences validate every layer kind") {
    run_layer_fd_suite(LayerKind::Conv2d);
    run_layer_fd_suite(LayerKind::Relu);
    run_layer_fd_suite(LayerKind::MaxPool);
    run_layer_fd_suite(LayerKind::GlobalMaxPool);
    run_layer_fd_suite(LayerKind::Dense);
    run_layer_fd_suite(LayerKind::ResidualBlock);
    run_layer_fd_suite(LayerKind::Sigmoid);
    run_layer_fd_suite(LayerKind::Softmax);
}

TEST_CASE("finite differences validate a whole conv net") {
    for (int trial = 0; trial < 3; ++trial) {
        Rng rng(900 + trial);
        Network<double> net(6, 6, 2,
                            {LayerSpec::conv2d(3, 1, 1, 3), LayerSpec::relu(),
                             LayerSpec::maxpool(2, 2), LayerSpec::conv2d(3, 1, 1, 4),
                             LayerSpec::relu(), LayerSpec::global_max_pool(),
                             LayerSpec::dense(5), LayerSpec::relu(), LayerSpec::dense(3),
                             LayerSpec::softmax()});
        randomize_params(net, rng);
        auto input = random_fd_input(rng, 2, 6, 6, 2);
        CHECK(max_grad_rel_error(net, input, rng) < 1e-3);
    }
}

TEST_CASE("softmax plus cross-entropy gradient collapses to p - y") {
    Rng rng(31);
    const int k = 7;
    Network<double> net(1, 1, k, {LayerSpec::softmax()});
    Tensor<double> z({3, 1, 1, k});
    for (auto& v : z.data) v = rng.uniform(-2.0, 2.0);
    const Tensor<double>& p = net.forward(z);

    // One-hot targets, loss = -sum y log p, dL/dp = -y/p.
    std::vector<int> y = {2, 0, 5};
    Tensor<double> dp;
    dp.shape = p.shape;
    dp.data.assign(p.data.size(), 0.0);
    for (int r = 0; r < 3; ++r) dp.data[r * k + y[r]] = -1.0 / p.data[r * k + y[r]];
    net.backward(dp);
    const auto& dz = net.input_grad();
    for (int r = 0; r < 3; ++r)
        for (int i = 0; i < k; ++i) {
            const double want = p.data[r * k + i] - (i == y[r] ? 1.0 : 0.0);
            CHECK(dz.data[r * k + i] == doctest::Approx(want).epsilon(1e-9));
        }
}

TEST_CASE("trivial forward facts") {
    // Zero-initialized dense net gives a uniform softmax.
    Network<float> net(1, 1, 4, {LayerSpec::dense(6), LayerSpec::softmax()});
    Tensor<float> x({2, 1, 1, 4});
    x.data = {1.f, -2.f, 3.f, 4.f, 0.f, 0.f, 1.f, -1.f};
    const auto& p = net.forward(x);
    for (float v : p.data) CHECK(v == doctest::Approx(1.0 / 6.0).epsilon(1e-6));
    double row = 0.0;
    for (int i = 0; i < 6; ++i) row += p.data[i];
    CHECK(row == doctest::Approx(1.0).epsilon(1e-6));

    Network<float> r(1, 1, 3, {LayerSpec::relu()});
    Tensor<float> v({1, 1, 1, 3});
    v.data = {-1.f, 0.f, 2.f};
    CHECK(r.forward(v).data == std::vector<float>{0.f, 0.f, 2.f});

    Network<float> g(3, 3, 1, {LayerSpec::global_max_pool()});
    Tensor<float> plane({1, 3, 3, 1});
    plane.data.assign(9, 0.f);
    plane.data[4] = 5.f;
    CHECK(g.forward(plane).data == std::vector<float>{5.f});
}

TEST_CASE("dense gradient in the linear case is outer(1, x)") {
    Network<float> net(1, 1, 3, {LayerSpec::dense(2)});
    net.init_params(4);
    Tensor<float> x({1, 1, 1, 3});
    x.data = {0.5f, -1.25f, 2.0f};
    net.forward(x);
    Tensor<float> ones({1, 1, 1, 2});
    ones.data = {1.f, 1.f};
    net.zero_grads();
    net.backward(ones);
    const auto& dW = net.grads(0)[0];  // [3][2]
    for (int i = 0; i < 3; ++i)
        for (int o = 0; o < 2; ++o) CHECK(dW.data[i * 2 + o] == x.data[i]);
    const auto& db = net.grads(0)[1];
    CHECK(db.data == std::vector<float>{1.f, 1.f});
}

TEST_CASE("state errors: backward before forward, missing grads") {
    Network<float> net(1, 1, 3, {LayerSpec::dense(2)});
    net.init_params(1);
    Tensor<float> d({1, 1, 1, 2});
    CHECK_THROWS_AS(net.backward(d), StateError);
    CHECK_THROWS_AS(net.adam_step(1e-3, 0.0), StateError);
}

TEST_CASE("shape errors name the offending layer") {
    try {
        Network<float> bad(4, 4, 1, {LayerSpec::maxpool(5, 1)});
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("layer 0 (maxpool)") != std::string::npos);
    }
    Network<float> net(2, 2, 1, {LayerSpec::dense(2)});
    Tensor<float> wrong({1, 3, 3, 1});
    CHECK_THROWS_AS(net.forward(wrong), ShapeError);
}

TEST_CASE("adam first step, reference trace, and zero-gradient fixpoint") {
    // y = W x + b with x = 1 and unit output gradient gives constant grad 1
    // on both parameters.
    const double lr = 1e-3;
    Network<float> net(1, 1, 1, {LayerSpec::dense(1)});
    net.params(0)[0].data = {0.5f};
    net.params(0)[1].data = {0.25f};
    Tensor<float> x({1, 1, 1, 1});
    x.data = {1.f};
    Tensor<float> one({1, 1, 1, 1});
    one.data = {1.f};

    // Independent scalar Adam recurrence.
    double m = 0, v = 0, ref = 0.5;
    for (int t = 1; t <= 3; ++t) {
        m = 0.9 * m + 0.1 * 1.0;
        v = 0.999 * v + 0.001 * 1.0;
        const double mhat = m / (1.0 - std::pow(0.9, t));
        const double vhat = v / (1.0 - std::pow(0.999, t));
        ref -= lr * mhat / (std::sqrt(vhat) + 1e-8);
    }

    for (int t = 0; t < 3; ++t) {
        net.forward(x);
        net.zero_grads();
        net.backward(one);
        const float before = net.params(0)[0].data[0];
        net.adam_step(lr, 0.0);
        const float delta = net.params(0)[0].data[0] - before;
        CHECK(std::abs(delta) <= lr * 1.0001);  // first-step bound holds every step here
    }
    CHECK(net.params(0)[0].data[0] == doctest::Approx(ref).epsilon(1e-6));

    // Zero output gradient moves nothing.
    Network<float> still(1, 1, 1, {LayerSpec::dense(1)});
    still.params(0)[0].data = {0.7f};
    still.params(0)[1].data = {0.0f};
    Tensor<float> zero({1, 1, 1, 1});
    zero.data = {0.f};
    still.forward(x);
    still.zero_grads();
    still.backward(zero);
    still.adam_step(lr, 0.0);
    CHECK(still.params(0)[0].data[0] == 0.7f);
}

TEST_CASE("decoupled weight decay shrinks parameters before the update") {
    Network<float> net(1, 1, 1, {LayerSpec::dense(1)});
    net.params(0)[0].data = {1.0f};
    net.params(0)[1].data = {0.0f};
    Tensor<float> x({1, 1, 1, 1});
    x.data = {0.f};  // zero input -> zero weight gradient, bias grad comes from dout
    Tensor<float> zero({1, 1, 1, 1});
    zero.data = {0.f};
    net.forward(x);
    net.zero_grads();
    net.backward(zero);
    net.adam_step(0.1, 0.5);
    CHECK(net.params(0)[0].data[0] == doctest::Approx(1.0 * (1.0 - 0.1 * 0.5)));
}

TEST_CASE("residual block with zero weights is the identity map") {
    Network<float> net(5, 4, 3, {LayerSpec::residual_block(3, 1)});
    for (auto& t : net.params(0)) t.zero();
    Rng rng(8);
    Tensor<float> x({2, 5, 4, 3});
    for (auto& v : x.data) v = static_cast<float>(rng.uniform(-3.0, 3.0));
    CHECK(net.forward(x).data == x.data);
}

TEST_CASE("residual input gradient carries the identity term") {
    Rng rng(99);
    Network<double> res(4, 4, 2, {LayerSpec::residual_block(2, 1)});
    randomize_params(res, rng);
    Network<double> main_only(4, 4, 2,
                              {LayerSpec::relu(), LayerSpec::conv2d(3, 1, 1, 2),
                               LayerSpec::relu(), LayerSpec::conv2d(3, 1, 1, 2)});
    main_only.params(1) = {res.params(0)[0], res.params(0)[1]};
    main_only.params(3) = {res.params(0)[2], res.params(0)[3]};

    auto input = random_fd_input(rng, 1, 4, 4, 2);
    Tensor<double> dout;
    dout.shape = {1, 4, 4, 2};
    dout.data.assign(input.data.size(), 0.0);
    for (auto& v : dout.data) v = rng.uniform(-1.0, 1.0);

    res.forward(input);
    res.zero_grads();
    res.backward(dout);
    main_only.forward(input);
    main_only.zero_grads();
    main_only.backward(dout);

    for (size_t i = 0; i < input.data.size(); ++i)
        CHECK(res.input_grad().data[i] ==
              doctest::Approx(main_only.input_grad().data[i] + dout.data[i]).epsilon(1e-12));
}

TEST_CASE("a frozen prefix keeps body parameters fixed during updates") {
    Network<float> net(8, 8, 3, small_convnet10_specs());
    net.init_params(6);
    net.set_frozen_prefix(net.head_boundary());
    const auto body_before = net.params(0)[0].data;
    const auto head_before = net.params(net.head_boundary() + 1)[0].data;

    Rng rng(61);
    Tensor<float> x({4, 8, 8, 3});
    for (auto& v : x.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
    Tensor<float> d({4, 1, 1, 10});
    for (auto& v : d.data) v = static_cast<float>(rng.uniform(-0.2, 0.2));
    net.forward(x);
    net.zero_grads();
    net.backward(d);
    net.adam_step(1e-2, 1e-3);

    CHECK(net.params(0)[0].data == body_before);
    CHECK(net.params(net.head_boundary() + 1)[0].data != head_before);
}

TEST_CASE("he-uniform init: zero biases, bounds, and variance") {
    Network<float> net(1, 1, 100, {LayerSpec::dense(1000)});
    net.init_params(2024);
    const auto& W = net.params(0)[0];
    const auto& b = net.params(0)[1];
    for (float v : b.data) CHECK(v == 0.0f);
    const double bound = std::sqrt(6.0 / 100.0);
    double sum = 0.0, sq = 0.0;
    for (float v : W.data) {
        CHECK(std::abs(v) <= bound);
        sum += v;
        sq += static_cast<double>(v) * v;
    }
    const double mean = sum / W.numel();
    const double var = sq / W.numel() - mean * mean;
    CHECK(var == doctest::Approx(2.0 / 100.0).epsilon(0.05));

    Network<float> again(1, 1, 100, {LayerSpec::dense(1000)});
    again.init_params(2024);
    CHECK(again.params(0)[0].data == W.data);
}

TEST_CASE("transfer keeps the body bit-identical and reseeds the head") {
    Network<float> base(8, 8, 3, small_convnet10_specs());
    base.init_params(5);
    const int hb = base.head_boundary();
    REQUIRE(hb == 7);

    auto det = base.transfer_head(1, 77);
    CHECK(det.specs().back().kind == LayerKind::Sigmoid);
    CHECK(det.layer_count() == base.layer_count());
    for (int li = 0; li < hb; ++li) {
        REQUIRE(det.params(li).size() == base.params(li).size());
        for (size_t pi = 0; pi < det.params(li).size(); ++pi)
            CHECK(det.params(li)[pi].data == base.params(li)[pi].data);
    }
    // Head weights differ from the base head.
    CHECK(det.params(hb + 1)[0].data != base.params(hb + 1)[0].data);

    auto det2 = base.transfer_head(1, 77);
    for (int li = hb; li < det.layer_count(); ++li)
        for (size_t pi = 0; pi < det.params(li).size(); ++pi)
            CHECK(det2.params(li)[pi].data == det.params(li)[pi].data);

    auto two = base.transfer_head(2, 77);
    CHECK(two.specs().back().kind == LayerKind::Softmax);
    CHECK(two.output_shape().c == 2);

    CHECK_THROWS_AS(base.transfer_head(0, 1), DomainError);

    // Pre-head activations agree on any input: run the shared body alone.
    std::vector<LayerSpec> body_specs(base.specs().begin(), base.specs().begin() + hb);
    Network<float> body_a(8, 8, 3, body_specs), body_b(8, 8, 3, body_specs);
    for (int li = 0; li < hb; ++li) {
        body_a.params(li) = base.params(li);
        body_b.params(li) = det.params(li);
    }
    Rng rng(3);
    Tensor<float> probe({2, 8, 8, 3});
    for (auto& v : probe.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
    CHECK(body_a.forward(probe).data == body_b.forward(probe).data);
}

TEST_CASE("checkpoints round-trip bit exactly") {
    Network<float> net(8, 8, 3, small_convnet10_specs());
    net.init_params(11);
    // Give the optimizer some state.
    Tensor<float> x({2, 8, 8, 3});
    Rng rng(12);
    for (auto& v : x.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
    Tensor<float> d({2, 1, 1, 10});
    for (auto& v : d.data) v = static_cast<float>(rng.uniform(-0.1, 0.1));
    net.forward(x);
    net.zero_grads();
    net.backward(d);
    net.adam_step(1e-3, 1e-4);

    namespace fs = std::filesystem;
    const auto p1 = fs::temp_directory_path() / "barecam_ckpt1.ofnn";
    const auto p2 = fs::temp_directory_path() / "barecam_ckpt2.ofnn";
    save_checkpoint(net, p1.string());
    auto loaded = load_checkpoint(p1.string());
    save_checkpoint(loaded, p2.string());

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    CHECK(loaded.adam_step_count() == 1);
    CHECK(loaded.init_seed() == 11);

    CHECK(loaded.forward(x).data == net.forward(x).data);

    std::ofstream trunc(p1, std::ios::binary);
    trunc.write(b1.data(), static_cast<std::streamsize>(b1.size() / 3));
    trunc.close();
    CHECK_THROWS_AS(load_checkpoint(p1.string()), FormatError);
    fs::remove(p1);
    fs::remove(p2);
}

namespace {

BatchSet blob_set(int n_per_class, uint64_t seed) {
    BatchSet set;
    set.h = 1;
    set.w = 1;
    set.c = 2;
    Rng rng(seed);
    for (int i = 0; i < 2 * n_per_class; ++i) {
        const int label = i % 2;
        const double cx = label == 0 ? 0.25 : 0.75;
        const double cy = label == 0 ? 0.75 : 0.25;
        set.inputs.push_back(static_cast<float>(cx + rng.uniform(-0.15, 0.15)));
        set.inputs.push_back(static_cast<float>(cy + rng.uniform(-0.15, 0.15)));
        set.labels.push_back(label);
    }
    return set;
}

std::vector<LayerSpec> blob_net_specs() {
    return {LayerSpec::dense(16), LayerSpec::relu(), LayerSpec::dense(2),
            LayerSpec::softmax()};
}

}  // namespace

TEST_CASE("training separates two blobs and is seed-deterministic") {
    auto set = blob_set(100, 3);
    Network<float> net(1, 1, 2, blob_net_specs());
    net.init_params(17);
    TrainConfig cfg;
    cfg.epochs = 12;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 16;
    cfg.seed = 5;
    auto log = train(net, set, set, cfg);
    REQUIRE(log.epochs.size() == 12);
    for (int e = 1; e < 5; ++e)
        CHECK(log.epochs[e].train_loss < log.epochs[e - 1].train_loss);
    CHECK(accuracy_of(net, set) == 1.0);

    Network<float> net2(1, 1, 2, blob_net_specs());
    net2.init_params(17);
    auto log2 = train(net2, set, set, cfg);
    for (int li = 0; li < net.layer_count(); ++li)
        for (size_t pi = 0; pi < net.params(li).size(); ++pi)
            CHECK(net2.params(li)[pi].data == net.params(li)[pi].data);
    CHECK(log2.to_text() == log.to_text());
}

TEST_CASE("zero epochs leaves the network untouched") {
    auto set = blob_set(10, 4);
    Network<float> net(1, 1, 2, blob_net_specs());
    net.init_params(9);
    const auto before = net.params(0)[0].data;
    TrainConfig cfg;
    cfg.epochs = 0;
    auto log = train(net, set, {}, cfg);
    CHECK(log.epochs.empty());
    CHECK(log.iterations == 0);
    CHECK(net.params(0)[0].data == before);
}

TEST_CASE("iteration caps stop mid-epoch") {
    auto set = blob_set(100, 6);  // 200 examples, batch 16 -> 13 batches/epoch
    Network<float> net(1, 1, 2, blob_net_specs());
    net.init_params(2);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.batch_size = 16;
    cfg.max_iterations = 30;
    auto log = train(net, set, {}, cfg);
    CHECK(log.iterations == 30);
    CHECK(log.epochs.size() <= 4);
}

TEST_CASE("divergence aborts with epoch and batch in the message") {
    auto set = blob_set(40, 7);
    Network<float> net(1, 1, 2, blob_net_specs());
    net.init_params(1);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.learning_rate = 1e30;  // parameters overflow after the first step
    cfg.batch_size = 8;
    try {
        train(net, set, {}, cfg);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
        CHECK(std::string(e.what()).find("batch") != std::string::npos);
    }
}

TEST_CASE("loss kind must match the output layer") {
    auto set = blob_set(10, 8);
    Network<float> net(1, 1, 2, blob_net_specs());
    net.init_params(3);
    TrainConfig cfg;
    cfg.loss = LossKind::SigmoidBinaryCrossEntropy;
    CHECK_THROWS_AS(train(net, set, {}, cfg), StateError);
}

TEST_CASE("small resnet composes, trains a step, and has a sane head") {
    Network<float> net(20, 15, 3, small_resnet_specs());
    net.init_params(21);
    CHECK(net.output_shape().c == 2);
    CHECK(net.head_boundary() == 5);
    CHECK(net.param_count() > 0);

    BatchSet set;
    set.h = 20;
    set.w = 15;
    set.c = 3;
    Rng rng(100);
    for (int i = 0; i < 32; ++i) {
        for (int j = 0; j < 20 * 15 * 3; ++j)
            set.inputs.push_back(static_cast<float>(rng.uniform(0.0, 1.0)));
        set.labels.push_back(i % 2);
    }
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    auto log = train(net, set, set, cfg);
    CHECK(log.iterations == 4);
    CHECK(std::isfinite(log.epochs[0].train_loss));
}
