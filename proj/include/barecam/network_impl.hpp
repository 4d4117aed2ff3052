// Template definitions for network.hpp; include that header instead.
#pragma once

#include <cmath>

namespace barecam::nn {

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::Relu: return "relu";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::GlobalMaxPool: return "global_max_pool";
        case LayerKind::Dense: return "dense";
        case LayerKind::ResidualBlock: return "residual_block";
        case LayerKind::Sigmoid: return "sigmoid";
        case LayerKind::Softmax: return "softmax";
    }
    return "unknown";
}

namespace detail {
inline std::string layer_tag(int li, LayerKind k) {
    return "layer " + std::to_string(li) + " (" + layer_kind_name(k) + ")";
}
inline bool residual_has_projection(int in_c, const LayerSpec& s) {
    return in_c != s.out_channels || s.stride != 1;
}
}  // namespace detail

template <typename T>
Network<T>::Network(int in_h, int in_w, int in_c, std::vector<LayerSpec> specs)
    : in_h_(in_h), in_w_(in_w), in_c_(in_c), specs_(std::move(specs)) {
    if (in_h < 1 || in_w < 1 || in_c < 1) throw ShapeError("network input dims must be >= 1");
    if (specs_.empty()) throw ShapeError("network needs at least one layer");
    build();
}

template <typename T>
void Network<T>::build() {
    shapes_.clear();
    shapes_.push_back({in_h_, in_w_, in_c_});
    params_.assign(specs_.size(), {});
    head_boundary_ = -1;

    for (size_t li = 0; li < specs_.size(); ++li) {
        const LayerSpec& s = specs_[li];
        const ActShape in = shapes_.back();
        ActShape out = in;
        auto fail = [&](const std::string& why) {
            throw ShapeError(detail::layer_tag(static_cast<int>(li), s.kind) + ": " + why);
        };
        switch (s.kind) {
            case LayerKind::Conv2d: {
                if (s.kernel < 1 || s.stride < 1 || s.pad < 0 || s.out_channels < 1)
                    fail("bad conv parameters");
                out.h = (in.h + 2 * s.pad - s.kernel) / s.stride + 1;
                out.w = (in.w + 2 * s.pad - s.kernel) / s.stride + 1;
                out.c = s.out_channels;
                if (in.h + 2 * s.pad < s.kernel || in.w + 2 * s.pad < s.kernel)
                    fail("kernel larger than padded input");
                params_[li].push_back(Tensor<T>({s.kernel, s.kernel, in.c, out.c}));
                params_[li].push_back(Tensor<T>({out.c}));
                break;
            }
            case LayerKind::Relu:
                break;
            case LayerKind::MaxPool: {
                if (s.kernel < 1 || s.stride < 1) fail("bad pool parameters");
                if (in.h < s.kernel || in.w < s.kernel) fail("window larger than input");
                out.h = (in.h - s.kernel) / s.stride + 1;
                out.w = (in.w - s.kernel) / s.stride + 1;
                break;
            }
            case LayerKind::GlobalMaxPool: {
                out = {1, 1, in.c};
                head_boundary_ = static_cast<int>(li);
                break;
            }
            case LayerKind::Dense: {
                if (s.units < 1) fail("units must be >= 1");
                const int fin = static_cast<int>(in.numel());
                out = {1, 1, s.units};
                params_[li].push_back(Tensor<T>({fin, s.units}));
                params_[li].push_back(Tensor<T>({s.units}));
                break;
            }
            case LayerKind::ResidualBlock: {
                if (s.stride < 1 || s.out_channels < 1) fail("bad residual parameters");
                if (in.h < 1 || in.w < 1) fail("needs spatial input");
                out.h = (in.h - 1) / s.stride + 1;
                out.w = (in.w - 1) / s.stride + 1;
                out.c = s.out_channels;
                params_[li].push_back(Tensor<T>({3, 3, in.c, out.c}));
                params_[li].push_back(Tensor<T>({out.c}));
                params_[li].push_back(Tensor<T>({3, 3, out.c, out.c}));
                params_[li].push_back(Tensor<T>({out.c}));
                if (detail::residual_has_projection(in.c, s)) {
                    params_[li].push_back(Tensor<T>({1, 1, in.c, out.c}));
                    params_[li].push_back(Tensor<T>({out.c}));
                }
                break;
            }
            case LayerKind::Sigmoid:
                break;
            case LayerKind::Softmax:
                if (in.h != 1 || in.w != 1) fail("softmax expects a flat input");
                if (in.c < 2) fail("softmax needs >= 2 classes");
                break;
            default:
                fail("unknown layer kind");
        }
        if (out.h < 1 || out.w < 1 || out.c < 1) fail("output shape collapsed to zero");
        shapes_.push_back(out);
    }

    grads_ = params_;
    adam_m_ = params_;
    adam_v_ = params_;
    for (auto& lp : grads_) for (auto& t : lp) t.zero();
    for (auto& lp : adam_m_) for (auto& t : lp) t.zero();
    for (auto& lp : adam_v_) for (auto& t : lp) t.zero();
    acts_.resize(specs_.size() + 1);
    res_mid_.resize(specs_.size());
}

template <typename T>
int64_t Network<T>::param_count() const {
    int64_t n = 0;
    for (const auto& lp : params_)
        for (const auto& t : lp) n += t.numel();
    return n;
}

template <typename T>
void Network<T>::init_params(uint64_t seed) {
    init_seed_ = seed;
    uint64_t ordinal = 0;
    for (auto& lp : params_) {
        for (size_t pi = 0; pi < lp.size(); ++pi) {
            Tensor<T>& t = lp[pi];
            if (pi % 2 == 1) {
                t.zero();  // bias
                ++ordinal;
                continue;
            }
            // fan_in is everything but the trailing output dimension.
            int64_t fan_in = 1;
            for (size_t d = 0; d + 1 < t.shape.size(); ++d) fan_in *= t.shape[d];
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
            Rng rng(derive_seed(seed, "init", ordinal));
            for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
            ++ordinal;
        }
    }
    for (auto& lp : adam_m_) for (auto& t : lp) t.zero();
    for (auto& lp : adam_v_) for (auto& t : lp) t.zero();
    adam_t_ = 0;
}

template <typename T>
void Network<T>::forward_layer(int li, int n, const Tensor<T>& in, Tensor<T>& out) {
    const LayerSpec& s = specs_[li];
    const ActShape& is = shapes_[li];
    const ActShape& os = shapes_[li + 1];
    const size_t in_px = static_cast<size_t>(is.numel());
    const size_t out_px = static_cast<size_t>(os.numel());
    out.shape = {n, os.h, os.w, os.c};
    out.data.resize(static_cast<size_t>(n) * out_px);

    switch (s.kind) {
        case LayerKind::Conv2d: {
            const auto& W = params_[li][0];
            const auto& b = params_[li][1];
            for (int r = 0; r < n; ++r)
                ops::conv2d_fwd(in.data.data() + r * in_px, is.h, is.w, is.c, W.data.data(),
                                b.data.data(), s.kernel, s.stride, s.pad, os.c,
                                out.data.data() + r * out_px, os.h, os.w);
            break;
        }
        case LayerKind::Relu:
            ops::relu_fwd(in.data.data(), in.data.size(), out.data.data());
            break;
        case LayerKind::MaxPool:
            for (int r = 0; r < n; ++r)
                ops::maxpool_fwd(in.data.data() + r * in_px, is.h, is.w, is.c, s.kernel,
                                 s.stride, out.data.data() + r * out_px, os.h, os.w);
            break;
        case LayerKind::GlobalMaxPool:
            for (int r = 0; r < n; ++r)
                ops::global_maxpool_fwd(in.data.data() + r * in_px, is.h, is.w, is.c,
                                        out.data.data() + r * out_px);
            break;
        case LayerKind::Dense: {
            const auto& W = params_[li][0];
            const auto& b = params_[li][1];
            ops::dense_fwd(in.data.data(), n, static_cast<int>(in_px), W.data.data(),
                           b.data.data(), os.c, out.data.data());
            break;
        }
        case LayerKind::ResidualBlock: {
            const bool proj = detail::residual_has_projection(is.c, s);
            const auto& W1 = params_[li][0];
            const auto& b1 = params_[li][1];
            const auto& W2 = params_[li][2];
            const auto& b2 = params_[li][3];
            Tensor<T>& mid = res_mid_[li];
            mid.shape = {n, os.h, os.w, os.c};
            mid.data.resize(static_cast<size_t>(n) * out_px);
            std::vector<T> pre(in_px), post(out_px), skip(proj ? out_px : 0);
            for (int r = 0; r < n; ++r) {
                const T* x = in.data.data() + r * in_px;
                T* c1 = mid.data.data() + r * out_px;
                T* y = out.data.data() + r * out_px;
                ops::relu_fwd(x, in_px, pre.data());
                ops::conv2d_fwd(pre.data(), is.h, is.w, is.c, W1.data.data(), b1.data.data(),
                                3, s.stride, 1, os.c, c1, os.h, os.w);
                ops::relu_fwd(c1, out_px, post.data());
                ops::conv2d_fwd(post.data(), os.h, os.w, os.c, W2.data.data(), b2.data.data(),
                                3, 1, 1, os.c, y, os.h, os.w);
                if (proj) {
                    ops::conv2d_fwd(x, is.h, is.w, is.c, params_[li][4].data.data(),
                                    params_[li][5].data.data(), 1, s.stride, 0, os.c,
                                    skip.data(), os.h, os.w);
                    for (size_t i = 0; i < out_px; ++i) y[i] += skip[i];
                } else {
                    for (size_t i = 0; i < out_px; ++i) y[i] += x[i];
                }
            }
            break;
        }
        case LayerKind::Sigmoid:
            ops::sigmoid_fwd(in.data.data(), in.data.size(), out.data.data());
            break;
        case LayerKind::Softmax:
            ops::softmax_fwd(in.data.data(), n, os.c, out.data.data());
            break;
    }
}

template <typename T>
const Tensor<T>& Network<T>::run_forward(const Tensor<T>& batch, int last) {
    if (batch.shape.size() != 4 || batch.shape[1] != in_h_ || batch.shape[2] != in_w_ ||
        batch.shape[3] != in_c_)
        throw ShapeError("batch shape does not match network input " + std::to_string(in_h_) +
                         "x" + std::to_string(in_w_) + "x" + std::to_string(in_c_));
    const int n = batch.shape[0];
    acts_[0] = batch;
    for (int li = 0; li < last; ++li) forward_layer(li, n, acts_[li], acts_[li + 1]);
    forward_depth_ = last;
    grads_ready_ = false;
    return acts_[last];
}

template <typename T>
const Tensor<T>& Network<T>::forward(const Tensor<T>& batch) {
    return run_forward(batch, layer_count());
}

template <typename T>
const Tensor<T>& Network<T>::forward_logits(const Tensor<T>& batch) {
    int last = layer_count();
    const LayerKind k = specs_.back().kind;
    if (k == LayerKind::Softmax || k == LayerKind::Sigmoid) --last;
    return run_forward(batch, last);
}

template <typename T>
void Network<T>::backward_layer(int li, int n, const Tensor<T>& in, const Tensor<T>& out,
                                const Tensor<T>& dout, Tensor<T>& din) {
    const LayerSpec& s = specs_[li];
    const ActShape& is = shapes_[li];
    const ActShape& os = shapes_[li + 1];
    const size_t in_px = static_cast<size_t>(is.numel());
    const size_t out_px = static_cast<size_t>(os.numel());
    din.shape = in.shape;
    din.data.assign(in.data.size(), T(0));

    switch (s.kind) {
        case LayerKind::Conv2d: {
            const auto& W = params_[li][0];
            auto& dW = grads_[li][0];
            auto& db = grads_[li][1];
            const bool need_din = li > 0 || compute_input_grad_;
            std::vector<T> wt;
            if (need_din) {
                wt.resize(W.data.size());
                ops::transpose_conv_weights(W.data.data(), s.kernel, is.c, os.c, wt.data());
            }
            for (int r = 0; r < n; ++r) {
                if (need_din)
                    ops::conv2d_bwd_input(din.data.data() + r * in_px, is.h, is.w, is.c,
                                          wt.data(), s.kernel, s.stride, s.pad, os.c,
                                          dout.data.data() + r * out_px, os.h, os.w);
                ops::conv2d_bwd_params(in.data.data() + r * in_px, is.h, is.w, is.c,
                                       dW.data.data(), db.data.data(), s.kernel, s.stride,
                                       s.pad, os.c, dout.data.data() + r * out_px, os.h, os.w);
            }
            break;
        }
        case LayerKind::Relu:
            ops::relu_bwd(din.data.data(), in.data.data(), in.data.size(), dout.data.data());
            break;
        case LayerKind::MaxPool:
            for (int r = 0; r < n; ++r)
                ops::maxpool_bwd(din.data.data() + r * in_px, in.data.data() + r * in_px, is.h,
                                 is.w, is.c, s.kernel, s.stride, out.data.data() + r * out_px,
                                 dout.data.data() + r * out_px, os.h, os.w);
            break;
        case LayerKind::GlobalMaxPool:
            for (int r = 0; r < n; ++r)
                ops::global_maxpool_bwd(din.data.data() + r * in_px, in.data.data() + r * in_px,
                                        is.h, is.w, is.c, out.data.data() + r * out_px,
                                        dout.data.data() + r * out_px);
            break;
        case LayerKind::Dense: {
            const auto& W = params_[li][0];
            auto& dW = grads_[li][0];
            auto& db = grads_[li][1];
            ops::dense_bwd(din.data.data(), in.data.data(), n, static_cast<int>(in_px),
                           W.data.data(), dW.data.data(), db.data.data(), os.c,
                           dout.data.data());
            break;
        }
        case LayerKind::ResidualBlock: {
            const bool proj = detail::residual_has_projection(is.c, s);
            const auto& W1 = params_[li][0];
            const auto& W2 = params_[li][2];
            auto& dW1 = grads_[li][0];
            auto& db1 = grads_[li][1];
            auto& dW2 = grads_[li][2];
            auto& db2 = grads_[li][3];
            const Tensor<T>& mid = res_mid_[li];
            std::vector<T> pre(in_px), post(out_px), dpost(out_px), dmid(out_px), dpre(in_px);
            std::vector<T> w1t(W1.data.size()), w2t(W2.data.size());
            ops::transpose_conv_weights(W1.data.data(), 3, is.c, os.c, w1t.data());
            ops::transpose_conv_weights(W2.data.data(), 3, os.c, os.c, w2t.data());
            std::vector<T> wpt;
            if (proj) {
                wpt.resize(params_[li][4].data.size());
                ops::transpose_conv_weights(params_[li][4].data.data(), 1, is.c, os.c,
                                            wpt.data());
            }
            for (int r = 0; r < n; ++r) {
                const T* x = in.data.data() + r * in_px;
                const T* c1 = mid.data.data() + r * out_px;
                const T* dy = dout.data.data() + r * out_px;
                T* dx = din.data.data() + r * in_px;

                ops::relu_fwd(x, in_px, pre.data());
                ops::relu_fwd(c1, out_px, post.data());

                // main branch: dy -> conv2 -> relu -> conv1 -> relu
                std::fill(dpost.begin(), dpost.end(), T(0));
                ops::conv2d_bwd_input(dpost.data(), os.h, os.w, os.c, w2t.data(), 3, 1, 1,
                                      os.c, dy, os.h, os.w);
                ops::conv2d_bwd_params(post.data(), os.h, os.w, os.c, dW2.data.data(),
                                       db2.data.data(), 3, 1, 1, os.c, dy, os.h, os.w);
                std::fill(dmid.begin(), dmid.end(), T(0));
                ops::relu_bwd(dmid.data(), c1, out_px, dpost.data());
                std::fill(dpre.begin(), dpre.end(), T(0));
                ops::conv2d_bwd_input(dpre.data(), is.h, is.w, is.c, w1t.data(), 3,
                                      s.stride, 1, os.c, dmid.data(), os.h, os.w);
                ops::conv2d_bwd_params(pre.data(), is.h, is.w, is.c, dW1.data.data(),
                                       db1.data.data(), 3, s.stride, 1, os.c, dmid.data(),
                                       os.h, os.w);
                ops::relu_bwd(dx, x, in_px, dpre.data());

                // skip branch
                if (proj) {
                    ops::conv2d_bwd_input(dx, is.h, is.w, is.c, wpt.data(), 1,
                                          s.stride, 0, os.c, dy, os.h, os.w);
                    ops::conv2d_bwd_params(x, is.h, is.w, is.c, grads_[li][4].data.data(),
                                           grads_[li][5].data.data(), 1, s.stride, 0, os.c, dy,
                                           os.h, os.w);
                } else {
                    for (size_t i = 0; i < in_px; ++i) dx[i] += dy[i];
                }
            }
            break;
        }
        case LayerKind::Sigmoid:
            ops::sigmoid_bwd(din.data.data(), out.data.data(), out.data.size(),
                             dout.data.data());
            break;
        case LayerKind::Softmax:
            ops::softmax_bwd(din.data.data(), out.data.data(), n, os.c, dout.data.data());
            break;
    }
}

template <typename T>
void Network<T>::run_backward(const Tensor<T>& dout, int from) {
    if (forward_depth_ != from)
        throw StateError("backward called without a matching forward pass");
    if (dout.data.size() != acts_[from].data.size())
        throw ShapeError("output gradient shape does not match forward output");
    const int n = acts_[0].shape[0];
    Tensor<T> d = dout;
    Tensor<T> din;
    for (int li = from - 1; li >= 0; --li) {
        backward_layer(li, n, acts_[li], acts_[li + 1], d, din);
        std::swap(d, din);
    }
    dinput_ = std::move(d);
    input_grad_valid_ = compute_input_grad_ || specs_[0].kind != LayerKind::Conv2d;
    grads_ready_ = true;
}

template <typename T>
void Network<T>::backward(const Tensor<T>& dout) {
    run_backward(dout, layer_count());
}

template <typename T>
void Network<T>::backward_from_logits(const Tensor<T>& dlogits) {
    int last = layer_count();
    const LayerKind k = specs_.back().kind;
    if (k == LayerKind::Softmax || k == LayerKind::Sigmoid) --last;
    run_backward(dlogits, last);
}

template <typename T>
void Network<T>::zero_grads() {
    for (auto& lp : grads_)
        for (auto& t : lp) t.zero();
    grads_ready_ = false;
}

template <typename T>
void Network<T>::adam_step(double lr, double weight_decay, const AdamParams& ap) {
    if (!grads_ready_) throw StateError("adam_step called before backward populated gradients");
    ++adam_t_;
    const double bc1 = 1.0 - std::pow(ap.beta1, static_cast<double>(adam_t_));
    const double bc2 = 1.0 - std::pow(ap.beta2, static_cast<double>(adam_t_));
    for (size_t li = static_cast<size_t>(std::max(0, frozen_prefix_)); li < params_.size();
         ++li) {
        for (size_t pi = 0; pi < params_[li].size(); ++pi) {
            auto& p = params_[li][pi].data;
            const auto& g = grads_[li][pi].data;
            auto& m = adam_m_[li][pi].data;
            auto& v = adam_v_[li][pi].data;
            for (size_t i = 0; i < p.size(); ++i) {
                if (weight_decay > 0.0)
                    p[i] = static_cast<T>(p[i] * (1.0 - lr * weight_decay));
                const double gi = static_cast<double>(g[i]);
                const double mi = ap.beta1 * m[i] + (1.0 - ap.beta1) * gi;
                const double vi = ap.beta2 * v[i] + (1.0 - ap.beta2) * gi * gi;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                const double mhat = mi / bc1;
                const double vhat = vi / bc2;
                p[i] = static_cast<T>(p[i] - lr * mhat / (std::sqrt(vhat) + ap.epsilon));
            }
        }
    }
}

template <typename T>
Network<T> Network<T>::transfer_head(int new_out, uint64_t seed) const {
    if (new_out < 1) throw DomainError("transfer_head: output width must be >= 1");
    if (head_boundary_ < 0)
        throw StateError("transfer_head: network has no global pooling head");
    const int hb = head_boundary_;
    if (hb + 1 >= layer_count() || specs_[hb + 1].kind != LayerKind::Dense)
        throw StateError("transfer_head: head does not follow the pool/dense/dense pattern");
    const int hidden = specs_[hb + 1].units;

    std::vector<LayerSpec> specs(specs_.begin(), specs_.begin() + hb);
    specs.push_back(LayerSpec::global_max_pool());
    specs.push_back(LayerSpec::dense(hidden));
    specs.push_back(LayerSpec::relu());
    specs.push_back(LayerSpec::dense(new_out));
    specs.push_back(new_out == 1 ? LayerSpec::sigmoid() : LayerSpec::softmax());

    Network<T> out(in_h_, in_w_, in_c_, std::move(specs));
    for (int li = 0; li < hb; ++li) out.params_[li] = params_[li];
    // Re-derive head initialization with ordinals local to the head so the
    // result only depends on (head shape, seed).
    uint64_t ordinal = 0;
    for (int li = hb; li < out.layer_count(); ++li) {
        for (size_t pi = 0; pi < out.params_[li].size(); ++pi) {
            Tensor<T>& t = out.params_[li][pi];
            if (pi % 2 == 1) {
                t.zero();
            } else {
                int64_t fan_in = 1;
                for (size_t d = 0; d + 1 < t.shape.size(); ++d) fan_in *= t.shape[d];
                const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
                Rng rng(derive_seed(seed, "head-init", ordinal));
                for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
            }
            ++ordinal;
        }
    }
    out.init_seed_ = seed;
    return out;
}

inline std::vector<LayerSpec> small_convnet10_specs(int num_classes, int hidden) {
    return {
        LayerSpec::conv2d(3, 1, 1, 32), LayerSpec::relu(),
        LayerSpec::conv2d(3, 1, 1, 32), LayerSpec::relu(),
        LayerSpec::maxpool(2, 2),
        LayerSpec::conv2d(3, 1, 1, 64), LayerSpec::relu(),
        LayerSpec::global_max_pool(),
        LayerSpec::dense(hidden), LayerSpec::relu(),
        LayerSpec::dense(num_classes), LayerSpec::softmax(),
    };
}

inline std::vector<LayerSpec> small_resnet_specs(int num_classes, int hidden) {
    return {
        LayerSpec::conv2d(3, 1, 1, 16),
        LayerSpec::residual_block(16, 1),
        LayerSpec::residual_block(32, 2),
        LayerSpec::residual_block(64, 2),
        LayerSpec::relu(),
        LayerSpec::global_max_pool(),
        LayerSpec::dense(hidden), LayerSpec::relu(),
        LayerSpec::dense(num_classes), LayerSpec::softmax(),
    };
}

}  // namespace barecam::nn
