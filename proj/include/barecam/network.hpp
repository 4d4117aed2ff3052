#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "barecam/layers.hpp"
#include "barecam/rng.hpp"
#include "barecam/tensor.hpp"

namespace barecam::nn {

enum class LayerKind : uint16_t {
    Conv2d = 1,
    Relu = 2,
    MaxPool = 3,
    GlobalMaxPool = 4,
    Dense = 5,
    ResidualBlock = 6,
    Sigmoid = 7,
    Softmax = 8,
};

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
    LayerKind kind{};
    int kernel = 0;
    int stride = 1;
    int pad = 0;
    int out_channels = 0;  // conv / residual
    int units = 0;         // dense

    static LayerSpec conv2d(int kernel, int stride, int pad, int out_channels) {
        return {LayerKind::Conv2d, kernel, stride, pad, out_channels, 0};
    }
    static LayerSpec relu() { return {LayerKind::Relu}; }
    static LayerSpec maxpool(int kernel, int stride) {
        return {LayerKind::MaxPool, kernel, stride, 0, 0, 0};
    }
    static LayerSpec global_max_pool() { return {LayerKind::GlobalMaxPool}; }
    static LayerSpec dense(int units) { return {LayerKind::Dense, 0, 1, 0, 0, units}; }
    static LayerSpec residual_block(int channels, int stride = 1) {
        return {LayerKind::ResidualBlock, 3, stride, 1, channels, 0};
    }
    static LayerSpec sigmoid() { return {LayerKind::Sigmoid}; }
    static LayerSpec softmax() { return {LayerKind::Softmax}; }

    bool operator==(const LayerSpec&) const = default;
};

// Activation shape between layers; dense layers flatten h*w*c implicitly.
struct ActShape {
    int h = 1, w = 1, c = 1;
    int64_t numel() const { return static_cast<int64_t>(h) * w * c; }
    bool operator==(const ActShape&) const = default;
};

// Adam with decoupled weight decay. Defaults follow the common betas; the
// learning rate arrives per call.
struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Ordered layer stack with parameters, gradients and optimizer state. A
// network instance is exclusively owned while training; inference on a const
// instance is safe from multiple threads only via separate copies (forward
// caches activations internally).
template <typename T>
class Network {
public:
    Network() = default;
    Network(int in_h, int in_w, int in_c, std::vector<LayerSpec> specs);

    const std::vector<LayerSpec>& specs() const { return specs_; }
    int input_h() const { return in_h_; }
    int input_w() const { return in_w_; }
    int input_c() const { return in_c_; }
    const ActShape& output_shape() const { return shapes_.back(); }
    const std::vector<ActShape>& shapes() const { return shapes_; }

    // Index of the global pooling layer that starts the replaceable head.
    int head_boundary() const { return head_boundary_; }

    int64_t param_count() const;
    std::vector<Tensor<T>>& params(int layer) { return params_[layer]; }
    const std::vector<Tensor<T>>& params(int layer) const { return params_[layer]; }
    const std::vector<Tensor<T>>& grads(int layer) const { return grads_[layer]; }
    int layer_count() const { return static_cast<int>(specs_.size()); }
    uint64_t init_seed() const { return init_seed_; }
    int64_t adam_step_count() const { return adam_t_; }

    // He-uniform fan-in weights, zero biases, deterministic per seed.
    void init_params(uint64_t seed);

    // Batch layout is [n, h, w, c] row major (flat layers see [n, features]).
    const Tensor<T>& forward(const Tensor<T>& batch);
    // Stops before a trailing softmax/sigmoid so losses can fuse with it.
    const Tensor<T>& forward_logits(const Tensor<T>& batch);

    // Gradient wrt the full forward output.
    void backward(const Tensor<T>& dout);
    // Gradient injected at the logits (skips the trailing activation).
    void backward_from_logits(const Tensor<T>& dlogits);
    // Gradient wrt the input batch from the last backward pass. Skipped for a
    // leading conv layer unless requested beforehand (training never needs it).
    void set_compute_input_grad(bool on) { compute_input_grad_ = on; }
    const Tensor<T>& input_grad() const {
        if (!input_grad_valid_)
            throw StateError("input gradient was not computed; call "
                             "set_compute_input_grad(true) before backward");
        return dinput_;
    }

    bool grads_ready() const { return grads_ready_; }
    void zero_grads();
    void adam_step(double lr, double weight_decay, const AdamParams& ap = {});

    // Freezes the first n layers: adam_step leaves their parameters and
    // optimizer state untouched. Used to fine-tune a transferred head only.
    void set_frozen_prefix(int n_layers) { frozen_prefix_ = n_layers; }
    int frozen_prefix() const { return frozen_prefix_; }

    // Copies everything before the head verbatim and rebuilds the final three
    // layers (global pooling, hidden dense, output dense) with a fresh seeded
    // initialization. new_out = 1 gets a sigmoid output, >= 2 a softmax.
    Network transfer_head(int new_out, uint64_t seed) const;

    // Raw access for checkpoint IO.
    std::vector<std::vector<Tensor<T>>>& all_params() { return params_; }
    const std::vector<std::vector<Tensor<T>>>& all_params() const { return params_; }
    std::vector<std::vector<Tensor<T>>>& adam_m() { return adam_m_; }
    const std::vector<std::vector<Tensor<T>>>& adam_m() const { return adam_m_; }
    std::vector<std::vector<Tensor<T>>>& adam_v() { return adam_v_; }
    const std::vector<std::vector<Tensor<T>>>& adam_v() const { return adam_v_; }
    void set_adam_step_count(int64_t t) { adam_t_ = t; }
    void set_init_seed(uint64_t s) { init_seed_ = s; }

private:
    void build();
    const Tensor<T>& run_forward(const Tensor<T>& batch, int last_layer_exclusive);
    void run_backward(const Tensor<T>& dout, int from_layer_exclusive);
    void forward_layer(int li, int n, const Tensor<T>& in, Tensor<T>& out);
    void backward_layer(int li, int n, const Tensor<T>& in, const Tensor<T>& out,
                        const Tensor<T>& dout, Tensor<T>& din);

    int in_h_ = 0, in_w_ = 0, in_c_ = 0;
    std::vector<LayerSpec> specs_;
    std::vector<ActShape> shapes_;  // shapes_[i] feeds layer i; back() is the output
    int head_boundary_ = -1;
    uint64_t init_seed_ = 0;

    std::vector<std::vector<Tensor<T>>> params_, grads_;
    std::vector<std::vector<Tensor<T>>> adam_m_, adam_v_;
    int64_t adam_t_ = 0;

    std::vector<Tensor<T>> acts_;      // acts_[0] input, acts_[i+1] output of layer i
    std::vector<Tensor<T>> res_mid_;   // residual blocks: conv1 output (pre-relu)
    Tensor<T> dinput_;
    int forward_depth_ = -1;           // layers run in the last forward pass
    int frozen_prefix_ = 0;
    bool grads_ready_ = false;
    bool compute_input_grad_ = false;
    bool input_grad_valid_ = false;
};

using Net = Network<float>;

// Reference architectures. Input is the (possibly downsampled) sensor frame.
std::vector<LayerSpec> small_convnet10_specs(int num_classes = 10, int hidden = 128);
std::vector<LayerSpec> small_resnet_specs(int num_classes = 2, int hidden = 128);

// Checkpoint file: magic "OFNN", version, layer-spec table, float32 parameter
// blob, optimizer-state blob, seed record. Round-trips bit exactly.
void save_checkpoint(const Network<float>& net, const std::string& path);
Network<float> load_checkpoint(const std::string& path);

}  // namespace barecam::nn

#include "barecam/network_impl.hpp"
