#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <type_traits>

// Single-image NHWC kernels shared by the float training path and the
// float64 gradient-check path. Weight layout for conv is [ky][kx][ic][oc] so
// the inner loops run over contiguous output channels.

namespace barecam::nn::ops {

// Channel counts stay small in this project; a stack accumulator keeps the
// hot loops in registers.
inline constexpr int kMaxChannels = 512;

namespace detail {

// NC > 0 pins the inner-loop channel count at compile time so the accumulator
// unrolls into vector registers; NC = 0 falls back to the runtime count.
template <int NC>
constexpr int chan(int dynamic) { return NC > 0 ? NC : dynamic; }

// Four accumulator arrays per output pixel keep four FMA chains in flight
// instead of serializing on one.
template <int OCT, typename T>
void conv2d_fwd_impl(const T* __restrict in, int h, int w, int ic,
                     const T* __restrict wgt, const T* __restrict bias, int k, int stride,
                     int pad, int oc_dyn, T* __restrict out, int oh, int ow) {
    const int oc = chan<OCT>(oc_dyn);
    constexpr int kBuf = OCT > 0 ? OCT : kMaxChannels;
    T a0[kBuf], a1[kBuf], a2[kBuf], a3[kBuf];
    for (int oy = 0; oy < oh; ++oy) {
        const int ky0 = std::max(0, pad - oy * stride);
        const int ky1 = std::min(k, h + pad - oy * stride);
        for (int ox = 0; ox < ow; ++ox) {
            const int kx0 = std::max(0, pad - ox * stride);
            const int kx1 = std::min(k, w + pad - ox * stride);
#pragma omp simd
            for (int c = 0; c < oc; ++c) {
                a0[c] = bias[c];
                a1[c] = T(0);
                a2[c] = T(0);
                a3[c] = T(0);
            }
            for (int ky = ky0; ky < ky1; ++ky) {
                const int iy = oy * stride + ky - pad;
                const T* irow = in + static_cast<size_t>(iy) * w * ic;
                const T* wrow = wgt + (static_cast<size_t>(ky) * k) * ic * oc;
                for (int kx = kx0; kx < kx1; ++kx) {
                    const int ix = ox * stride + kx - pad;
                    const T* ipx = irow + static_cast<size_t>(ix) * ic;
                    const T* wr = wrow + static_cast<size_t>(kx) * ic * oc;
                    int cc = 0;
                    for (; cc + 4 <= ic; cc += 4) {
                        const T x0 = ipx[cc], x1 = ipx[cc + 1], x2 = ipx[cc + 2],
                                x3 = ipx[cc + 3];
                        const T* w0 = wr + static_cast<size_t>(cc) * oc;
#pragma omp simd
                        for (int c = 0; c < oc; ++c) a0[c] += x0 * w0[c];
#pragma omp simd
                        for (int c = 0; c < oc; ++c) a1[c] += x1 * w0[oc + c];
#pragma omp simd
                        for (int c = 0; c < oc; ++c) a2[c] += x2 * w0[2 * oc + c];
#pragma omp simd
                        for (int c = 0; c < oc; ++c) a3[c] += x3 * w0[3 * oc + c];
                    }
                    for (; cc < ic; ++cc) {
                        const T x = ipx[cc];
                        const T* wv = wr + static_cast<size_t>(cc) * oc;
#pragma omp simd
                        for (int c = 0; c < oc; ++c) a0[c] += x * wv[c];
                    }
                }
            }
            T* opx = out + (static_cast<size_t>(oy) * ow + ox) * oc;
#pragma omp simd
            for (int c = 0; c < oc; ++c) opx[c] = a0[c] + a1[c] + a2[c] + a3[c];
        }
    }
}

}  // namespace detail

template <typename T>
void conv2d_fwd(const T* in, int h, int w, int ic, const T* wgt, const T* bias,
                int k, int stride, int pad, int oc, T* out, int oh, int ow) {
    if constexpr (std::is_same_v<T, float>) {
        switch (oc) {
            case 16: return detail::conv2d_fwd_impl<16>(in, h, w, ic, wgt, bias, k, stride, pad, oc, out, oh, ow);
            case 32: return detail::conv2d_fwd_impl<32>(in, h, w, ic, wgt, bias, k, stride, pad, oc, out, oh, ow);
            case 64: return detail::conv2d_fwd_impl<64>(in, h, w, ic, wgt, bias, k, stride, pad, oc, out, oh, ow);
            default: break;
        }
    }
    detail::conv2d_fwd_impl<0>(in, h, w, ic, wgt, bias, k, stride, pad, oc, out, oh, ow);
}

// [ky][kx][ic][oc] -> [ky][kx][oc][ic], so the backward-input inner loop runs
// elementwise over contiguous input channels.
template <typename T>
void transpose_conv_weights(const T* __restrict wgt, int k, int ic, int oc,
                            T* __restrict wgt_t) {
    for (int kk = 0; kk < k * k; ++kk) {
        const T* src = wgt + static_cast<size_t>(kk) * ic * oc;
        T* dst = wgt_t + static_cast<size_t>(kk) * ic * oc;
        for (int cc = 0; cc < ic; ++cc)
            for (int c = 0; c < oc; ++c)
                dst[static_cast<size_t>(c) * ic + cc] = src[static_cast<size_t>(cc) * oc + c];
    }
}

namespace detail {

template <int ICT, typename T>
void conv2d_bwd_input_impl(T* __restrict din, int h, int w, int ic_dyn,
                           const T* __restrict wgt_t, int k, int stride, int pad, int oc,
                           const T* __restrict dout, int oh, int ow) {
    const int ic = chan<ICT>(ic_dyn);
    constexpr int kBuf = ICT > 0 ? ICT : kMaxChannels;
    T a0[kBuf], a1[kBuf], a2[kBuf], a3[kBuf];
    for (int oy = 0; oy < oh; ++oy) {
        const int ky0 = std::max(0, pad - oy * stride);
        const int ky1 = std::min(k, h + pad - oy * stride);
        for (int ox = 0; ox < ow; ++ox) {
            const int kx0 = std::max(0, pad - ox * stride);
            const int kx1 = std::min(k, w + pad - ox * stride);
            const T* dpx = dout + (static_cast<size_t>(oy) * ow + ox) * oc;
            for (int ky = ky0; ky < ky1; ++ky) {
                const int iy = oy * stride + ky - pad;
                for (int kx = kx0; kx < kx1; ++kx) {
                    const int ix = ox * stride + kx - pad;
                    T* ipx = din + (static_cast<size_t>(iy) * w + ix) * ic;
                    const T* wr = wgt_t + (static_cast<size_t>(ky) * k + kx) * ic * oc;
#pragma omp simd
                    for (int cc = 0; cc < ic; ++cc) {
                        a0[cc] = T(0);
                        a1[cc] = T(0);
                        a2[cc] = T(0);
                        a3[cc] = T(0);
                    }
                    int c = 0;
                    for (; c + 4 <= oc; c += 4) {
                        const T g0 = dpx[c], g1 = dpx[c + 1], g2 = dpx[c + 2],
                                g3 = dpx[c + 3];
                        const T* w0 = wr + static_cast<size_t>(c) * ic;
#pragma omp simd
                        for (int cc = 0; cc < ic; ++cc) a0[cc] += g0 * w0[cc];
#pragma omp simd
                        for (int cc = 0; cc < ic; ++cc) a1[cc] += g1 * w0[ic + cc];
#pragma omp simd
                        for (int cc = 0; cc < ic; ++cc) a2[cc] += g2 * w0[2 * ic + cc];
#pragma omp simd
                        for (int cc = 0; cc < ic; ++cc) a3[cc] += g3 * w0[3 * ic + cc];
                    }
                    for (; c < oc; ++c) {
                        const T g = dpx[c];
                        const T* wv = wr + static_cast<size_t>(c) * ic;
#pragma omp simd
                        for (int cc = 0; cc < ic; ++cc) a0[cc] += g * wv[cc];
                    }
#pragma omp simd
                    for (int cc = 0; cc < ic; ++cc)
                        ipx[cc] += a0[cc] + a1[cc] + a2[cc] + a3[cc];
                }
            }
        }
    }
}

}  // namespace detail

// din must be zeroed by the caller (or carry a partial sum to accumulate
// into). wgt_t is the transposed layout from transpose_conv_weights.
template <typename T>
void conv2d_bwd_input(T* din, int h, int w, int ic, const T* wgt_t, int k, int stride,
                      int pad, int oc, const T* dout, int oh, int ow) {
    if constexpr (std::is_same_v<T, float>) {
        switch (ic) {
            case 16: return detail::conv2d_bwd_input_impl<16>(din, h, w, ic, wgt_t, k, stride, pad, oc, dout, oh, ow);
            case 32: return detail::conv2d_bwd_input_impl<32>(din, h, w, ic, wgt_t, k, stride, pad, oc, dout, oh, ow);
            case 64: return detail::conv2d_bwd_input_impl<64>(din, h, w, ic, wgt_t, k, stride, pad, oc, dout, oh, ow);
            default: break;
        }
    }
    detail::conv2d_bwd_input_impl<0>(din, h, w, ic, wgt_t, k, stride, pad, oc, dout, oh, ow);
}

namespace detail {

template <int OCT, typename T>
void conv2d_bwd_params_impl(const T* __restrict in, int h, int w, int ic,
                            T* __restrict dwgt, T* __restrict dbias, int k, int stride,
                            int pad, int oc_dyn, const T* __restrict dout, int oh, int ow) {
    const int oc = chan<OCT>(oc_dyn);
    constexpr int kBuf = OCT > 0 ? OCT : kMaxChannels;
    T a0[kBuf], a1[kBuf], a2[kBuf], a3[kBuf];

#pragma omp simd
    for (int c = 0; c < oc; ++c) a0[c] = T(0);
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
            const T* dpx = dout + (static_cast<size_t>(oy) * ow + ox) * oc;
#pragma omp simd
            for (int c = 0; c < oc; ++c) a0[c] += dpx[c];
        }
#pragma omp simd
    for (int c = 0; c < oc; ++c) dbias[c] += a0[c];

    // (ky, kx, cc) outside the pixel sweep so each weight-row sum stays in
    // registers.
    for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
            const int oy0 = std::max(0, (pad - ky + stride - 1) / stride);
            const int oy1 = std::min(oh, (h - 1 + pad - ky) / stride + 1);
            const int ox0 = std::max(0, (pad - kx + stride - 1) / stride);
            const int ox1 = std::min(ow, (w - 1 + pad - kx) / stride + 1);
            T* dwr = dwgt + (static_cast<size_t>(ky) * k + kx) * ic * oc;
            for (int cc = 0; cc < ic; ++cc) {
#pragma omp simd
                for (int c = 0; c < oc; ++c) {
                    a0[c] = T(0);
                    a1[c] = T(0);
                    a2[c] = T(0);
                    a3[c] = T(0);
                }
                for (int oy = oy0; oy < oy1; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    const T* dorow = dout + static_cast<size_t>(oy) * ow * oc;
                    const T* irow = in + (static_cast<size_t>(iy) * w + kx - pad) * ic + cc;
                    int ox = ox0;
                    for (; ox + 4 <= ox1; ox += 4) {
                        const T x0 = irow[static_cast<size_t>(ox) * stride * ic];
                        const T x1 = irow[static_cast<size_t>(ox + 1) * stride * ic];
                        const T x2 = irow[static_cast<size_t>(ox + 2) * stride * ic];
                        const T x3 = irow[static_cast<size_t>(ox + 3) * stride * ic];
                        const T* d0 = dorow + static_cast<size_t>(ox) * oc;
#pragma omp simd
                        for (int c = 0; c < oc; ++c) a0[c] += x0 * d0[c];
#pragma omp simd
                        for (int c = 0; c < oc; ++c) a1[c] += x1 * d0[oc + c];
#pragma omp simd
                        for (int c = 0; c < oc; ++c) a2[c] += x2 * d0[2 * oc + c];
#pragma omp simd
                        for (int c = 0; c < oc; ++c) a3[c] += x3 * d0[3 * oc + c];
                    }
                    for (; ox < ox1; ++ox) {
                        const T x = irow[static_cast<size_t>(ox) * stride * ic];
                        const T* dpx = dorow + static_cast<size_t>(ox) * oc;
#pragma omp simd
                        for (int c = 0; c < oc; ++c) a0[c] += x * dpx[c];
                    }
                }
                T* dwv = dwr + static_cast<size_t>(cc) * oc;
#pragma omp simd
                for (int c = 0; c < oc; ++c) dwv[c] += a0[c] + a1[c] + a2[c] + a3[c];
            }
        }
    }
}

}  // namespace detail

// Accumulates into dwgt / dbias so batch gradients sum across calls.
template <typename T>
void conv2d_bwd_params(const T* in, int h, int w, int ic, T* dwgt, T* dbias, int k,
                       int stride, int pad, int oc, const T* dout, int oh, int ow) {
    if constexpr (std::is_same_v<T, float>) {
        switch (oc) {
            case 16: return detail::conv2d_bwd_params_impl<16>(in, h, w, ic, dwgt, dbias, k, stride, pad, oc, dout, oh, ow);
            case 32: return detail::conv2d_bwd_params_impl<32>(in, h, w, ic, dwgt, dbias, k, stride, pad, oc, dout, oh, ow);
            case 64: return detail::conv2d_bwd_params_impl<64>(in, h, w, ic, dwgt, dbias, k, stride, pad, oc, dout, oh, ow);
            default: break;
        }
    }
    detail::conv2d_bwd_params_impl<0>(in, h, w, ic, dwgt, dbias, k, stride, pad, oc, dout, oh, ow);
}

template <typename T>
void maxpool_fwd(const T* in, int /*h*/, int w, int c, int k, int stride, T* out, int oh,
                 int ow) {
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            T* opx = out + (static_cast<size_t>(oy) * ow + ox) * c;
            for (int cc = 0; cc < c; ++cc) opx[cc] = -std::numeric_limits<T>::infinity();
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const T* ipx =
                        in + (static_cast<size_t>(oy * stride + ky) * w + ox * stride + kx) * c;
                    for (int cc = 0; cc < c; ++cc) opx[cc] = std::max(opx[cc], ipx[cc]);
                }
            }
        }
    }
}

// Routes each output gradient to the first window position attaining the max,
// a fixed tie rule so reruns are bit identical.
template <typename T>
void maxpool_bwd(T* din, const T* in, int /*h*/, int w, int c, int k, int stride,
                 const T* out, const T* dout, int oh, int ow) {
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const size_t o = (static_cast<size_t>(oy) * ow + ox) * c;
            for (int cc = 0; cc < c; ++cc) {
                const T target = out[o + cc];
                bool routed = false;
                for (int ky = 0; ky < k && !routed; ++ky) {
                    for (int kx = 0; kx < k && !routed; ++kx) {
                        const size_t i =
                            (static_cast<size_t>(oy * stride + ky) * w + ox * stride + kx) * c + cc;
                        if (in[i] == target) {
                            din[i] += dout[o + cc];
                            routed = true;
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void global_maxpool_fwd(const T* in, int h, int w, int c, T* out) {
    for (int cc = 0; cc < c; ++cc) out[cc] = -std::numeric_limits<T>::infinity();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const T* ipx = in + (static_cast<size_t>(y) * w + x) * c;
            for (int cc = 0; cc < c; ++cc) out[cc] = std::max(out[cc], ipx[cc]);
        }
}

template <typename T>
void global_maxpool_bwd(T* din, const T* in, int h, int w, int c, const T* out,
                        const T* dout) {
    for (int cc = 0; cc < c; ++cc) {
        const T target = out[cc];
        for (int y = 0; y < h; ++y) {
            bool routed = false;
            for (int x = 0; x < w; ++x) {
                const size_t i = (static_cast<size_t>(y) * w + x) * c + cc;
                if (in[i] == target) {
                    din[i] += dout[cc];
                    routed = true;
                    break;
                }
            }
            if (routed) break;
        }
    }
}

template <typename T>
void dense_fwd(const T* __restrict in, int n, int fin, const T* __restrict wgt, const T* __restrict bias, int fout,
               T* __restrict out) {
    for (int r = 0; r < n; ++r) {
        const T* x = in + static_cast<size_t>(r) * fin;
        T* y = out + static_cast<size_t>(r) * fout;
        for (int o = 0; o < fout; ++o) y[o] = bias[o];
        for (int i = 0; i < fin; ++i) {
            const T a = x[i];
            const T* wr = wgt + static_cast<size_t>(i) * fout;
            for (int o = 0; o < fout; ++o) y[o] += a * wr[o];
        }
    }
}

template <typename T>
void dense_bwd(T* __restrict din, const T* __restrict in, int n, int fin, const T* __restrict wgt, T* __restrict dwgt, T* __restrict dbias,
               int fout, const T* __restrict dout) {
    for (int r = 0; r < n; ++r) {
        const T* x = in + static_cast<size_t>(r) * fin;
        const T* dy = dout + static_cast<size_t>(r) * fout;
        T* dx = din + static_cast<size_t>(r) * fin;
        for (int o = 0; o < fout; ++o) dbias[o] += dy[o];
        for (int i = 0; i < fin; ++i) {
            const T* wr = wgt + static_cast<size_t>(i) * fout;
            T* dwr = dwgt + static_cast<size_t>(i) * fout;
            const T a = x[i];
            T acc = T(0);
            for (int o = 0; o < fout; ++o) {
                acc += dy[o] * wr[o];
                dwr[o] += a * dy[o];
            }
            dx[i] += acc;
        }
    }
}

template <typename T>
void relu_fwd(const T* in, size_t n, T* out) {
    for (size_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <typename T>
void relu_bwd(T* din, const T* in, size_t n, const T* dout) {
    for (size_t i = 0; i < n; ++i) din[i] += in[i] > T(0) ? dout[i] : T(0);
}

template <typename T>
void softmax_fwd(const T* in, int n, int k, T* out) {
    for (int r = 0; r < n; ++r) {
        const T* z = in + static_cast<size_t>(r) * k;
        T* p = out + static_cast<size_t>(r) * k;
        T m = z[0];
        for (int i = 1; i < k; ++i) m = std::max(m, z[i]);
        T sum = T(0);
        for (int i = 0; i < k; ++i) {
            p[i] = std::exp(z[i] - m);
            sum += p[i];
        }
        for (int i = 0; i < k; ++i) p[i] /= sum;
    }
}

template <typename T>
void softmax_bwd(T* din, const T* out, int n, int k, const T* dout) {
    for (int r = 0; r < n; ++r) {
        const T* p = out + static_cast<size_t>(r) * k;
        const T* dy = dout + static_cast<size_t>(r) * k;
        T dot = T(0);
        for (int i = 0; i < k; ++i) dot += dy[i] * p[i];
        T* dz = din + static_cast<size_t>(r) * k;
        for (int i = 0; i < k; ++i) dz[i] += p[i] * (dy[i] - dot);
    }
}

template <typename T>
void sigmoid_fwd(const T* in, size_t n, T* out) {
    for (size_t i = 0; i < n; ++i) out[i] = T(1) / (T(1) + std::exp(-in[i]));
}

template <typename T>
void sigmoid_bwd(T* din, const T* out, size_t n, const T* dout) {
    for (size_t i = 0; i < n; ++i) din[i] += dout[i] * out[i] * (T(1) - out[i]);
}

}  // namespace barecam::nn::ops
