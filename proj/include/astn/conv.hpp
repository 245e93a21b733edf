#ifndef ASTN_CONV_HPP
#define ASTN_CONV_HPP

#include <cstring>
#include <stdexcept>
#include <vector>

#include "astn/tensor.hpp"

namespace astn {

namespace detail {

// C[m,n] += A[m,k] * B[k,n], row-major. Saxpy form; the inner loop
// streams B rows and vectorizes under -O3.
inline void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = b + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] += A^T[m,k] * B[k,n] where A is stored [k,m].
inline void gemm_at_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int kk = 0; kk < k; ++kk) {
        const double* arow = a + static_cast<std::size_t>(kk) * m;
        const double* brow = b + static_cast<std::size_t>(kk) * n;
        for (int i = 0; i < m; ++i) {
            double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] += A[m,k] * B^T[k,n] where B is stored [n,k].
inline void gemm_bt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<std::size_t>(j) * k;
            double s = 0.0;
            for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
            crow[j] += s;
        }
    }
}

struct ConvDims {
    int c_in, h, w, c_out, k, stride, pad, ho, wo;
};

inline ConvDims conv_dims(const Shape& x, const Shape& w, int stride, int pad) {
    if (x.size() != 3 || w.size() != 4)
        throw std::invalid_argument("conv2d: expected x [C,H,W] and w [Co,Ci,k,k], got " +
                                    shape_str(x) + " and " + shape_str(w));
    ConvDims d{x[0], x[1], x[2], w[0], w[2], stride, pad, 0, 0};
    if (w[2] != w[3] || d.k % 2 == 0) throw std::invalid_argument("conv2d: kernel must be square with odd extent");
    if (w[1] != d.c_in)
        throw std::invalid_argument("conv2d: input channels " + std::to_string(d.c_in) +
                                    " do not match kernel " + std::to_string(w[1]));
    int num_h = d.h + 2 * pad - d.k;
    int num_w = d.w + 2 * pad - d.k;
    if (num_h < 0 || num_w < 0 || num_h % stride != 0 || num_w % stride != 0)
        throw std::invalid_argument("conv2d: non-integral output extent for input " + shape_str(x) +
                                    ", kernel " + std::to_string(d.k) + ", stride " +
                                    std::to_string(stride) + ", pad " + std::to_string(pad));
    d.ho = num_h / stride + 1;
    d.wo = num_w / stride + 1;
    return d;
}

// col: [Ci*k*k, Ho*Wo], zero padding.
inline void im2col(const double* x, const ConvDims& d, double* col) {
    int hw = d.ho * d.wo;
    for (int c = 0; c < d.c_in; ++c) {
        for (int ky = 0; ky < d.k; ++ky) {
            for (int kx = 0; kx < d.k; ++kx) {
                double* dst = col + (static_cast<std::size_t>(c) * d.k * d.k + ky * d.k + kx) * hw;
                for (int oy = 0; oy < d.ho; ++oy) {
                    int iy = oy * d.stride - d.pad + ky;
                    if (iy < 0 || iy >= d.h) {
                        std::memset(dst + static_cast<std::size_t>(oy) * d.wo, 0,
                                    sizeof(double) * d.wo);
                        continue;
                    }
                    const double* src = x + (static_cast<std::size_t>(c) * d.h + iy) * d.w;
                    for (int ox = 0; ox < d.wo; ++ox) {
                        int ix = ox * d.stride - d.pad + kx;
                        dst[static_cast<std::size_t>(oy) * d.wo + ox] =
                            (ix >= 0 && ix < d.w) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

// Scatter-add of a col matrix back onto the input grid.
inline void col2im_acc(const double* col, const ConvDims& d, double* x) {
    int hw = d.ho * d.wo;
    for (int c = 0; c < d.c_in; ++c) {
        for (int ky = 0; ky < d.k; ++ky) {
            for (int kx = 0; kx < d.k; ++kx) {
                const double* src = col + (static_cast<std::size_t>(c) * d.k * d.k + ky * d.k + kx) * hw;
                for (int oy = 0; oy < d.ho; ++oy) {
                    int iy = oy * d.stride - d.pad + ky;
                    if (iy < 0 || iy >= d.h) continue;
                    double* dst = x + (static_cast<std::size_t>(c) * d.h + iy) * d.w;
                    for (int ox = 0; ox < d.wo; ++ox) {
                        int ix = ox * d.stride - d.pad + kx;
                        if (ix >= 0 && ix < d.w) dst[ix] += src[static_cast<std::size_t>(oy) * d.wo + ox];
                    }
                }
            }
        }
    }
}

} // namespace detail

/// 2-D cross-correlation with zero padding.
/// x: [Ci,H,W], w: [Co,Ci,k,k], b: [Co] -> [Co,Ho,Wo].
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride = 1,
                     int pad = 0) {
    auto d = detail::conv_dims(x.shape(), w.shape(), stride, pad);
    if (b.shape() != Shape{d.c_out})
        throw std::invalid_argument("conv2d: bias shape " + shape_str(b.shape()) +
                                    " does not match output channels " + std::to_string(d.c_out));
    int hw = d.ho * d.wo;
    int kdim = d.c_in * d.k * d.k;
    auto node = detail::make_node({d.c_out, d.ho, d.wo}, static_cast<std::size_t>(d.c_out) * hw,
                                  {x.node(), w.node(), b.node()});
    std::vector<double> col(static_cast<std::size_t>(kdim) * hw);
    detail::im2col(x.data().data(), d, col.data());
    for (int co = 0; co < d.c_out; ++co) {
        double bias = b.data()[static_cast<std::size_t>(co)];
        double* out = node->data.data() + static_cast<std::size_t>(co) * hw;
        for (int i = 0; i < hw; ++i) out[i] = bias;
    }
    detail::gemm_acc(w.data().data(), col.data(), node->data.data(), d.c_out, kdim, hw);
    if (node->requires_grad) {
        auto xn = x.node();
        auto wn = w.node();
        auto bn = b.node();
        // im2col is recomputed in the backward pass rather than captured;
        // keeping the col buffer alive per node costs too much memory.
        node->backprop = [xn, wn, bn, d, kdim, hw](TensorNode& self) {
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int co = 0; co < d.c_out; ++co) {
                    double s = 0.0;
                    const double* g = self.grad.data() + static_cast<std::size_t>(co) * hw;
                    for (int i = 0; i < hw; ++i) s += g[i];
                    bn->grad[static_cast<std::size_t>(co)] += s;
                }
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                std::vector<double> col(static_cast<std::size_t>(kdim) * hw);
                detail::im2col(xn->data.data(), d, col.data());
                detail::gemm_bt_acc(self.grad.data(), col.data(), wn->grad.data(), d.c_out, hw,
                                    kdim);
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                std::vector<double> dcol(static_cast<std::size_t>(kdim) * hw, 0.0);
                detail::gemm_at_acc(wn->data.data(), self.grad.data(), dcol.data(), kdim, d.c_out,
                                    hw);
                detail::col2im_acc(dcol.data(), d, xn->grad.data());
            }
        };
    }
    return Tensor(node);
}

/// 2x2 average pooling on [C,H,W]; spatial extents must be even.
inline Tensor pool_down(const Tensor& x) {
    if (x.shape().size() != 3)
        throw std::invalid_argument("pool_down: expected [C,H,W], got " + shape_str(x.shape()));
    int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    if (h % 2 || w % 2)
        throw std::invalid_argument("pool_down: odd spatial extent " + shape_str(x.shape()));
    int ho = h / 2, wo = w / 2;
    auto node =
        detail::make_node({c, ho, wo}, static_cast<std::size_t>(c) * ho * wo, {x.node()});
    for (int ch = 0; ch < c; ++ch) {
        const double* in = x.data().data() + static_cast<std::size_t>(ch) * h * w;
        double* out = node->data.data() + static_cast<std::size_t>(ch) * ho * wo;
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                const double* p = in + (2 * oy) * w + 2 * ox;
                out[static_cast<std::size_t>(oy) * wo + ox] =
                    0.25 * (p[0] + p[1] + p[w] + p[w + 1]);
            }
    }
    if (node->requires_grad) {
        auto xn = x.node();
        node->backprop = [xn, c, h, w, ho, wo](TensorNode& self) {
            xn->ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                double* gin = xn->grad.data() + static_cast<std::size_t>(ch) * h * w;
                const double* gout = self.grad.data() + static_cast<std::size_t>(ch) * ho * wo;
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) {
                        double g = 0.25 * gout[static_cast<std::size_t>(oy) * wo + ox];
                        double* p = gin + (2 * oy) * w + 2 * ox;
                        p[0] += g;
                        p[1] += g;
                        p[w] += g;
                        p[w + 1] += g;
                    }
            }
        };
    }
    return Tensor(node);
}

namespace detail {

// Half-pixel-center source coordinate with edge clamping, as a pair of
// (index, weight) contributions. Constant inputs stay constant.
struct LinTap {
    int i0, i1;
    double w0, w1;
};

inline LinTap upsample_tap(int out_idx, int in_extent) {
    double src = (out_idx + 0.5) / 2.0 - 0.5;
    if (src < 0.0) src = 0.0;
    double maxv = static_cast<double>(in_extent - 1);
    if (src > maxv) src = maxv;
    LinTap t;
    t.i0 = static_cast<int>(src);
    if (t.i0 > in_extent - 2) t.i0 = in_extent >= 2 ? in_extent - 2 : 0;
    t.i1 = in_extent >= 2 ? t.i0 + 1 : t.i0;
    double f = src - t.i0;
    t.w0 = 1.0 - f;
    t.w1 = f;
    return t;
}

} // namespace detail

/// Bilinear 2x upsampling on [C,H,W] -> [C,2H,2W].
inline Tensor upsample2x(const Tensor& x) {
    if (x.shape().size() != 3)
        throw std::invalid_argument("upsample2x: expected [C,H,W], got " + shape_str(x.shape()));
    int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    int ho = 2 * h, wo = 2 * w;
    std::vector<detail::LinTap> ty(ho), tx(wo);
    for (int i = 0; i < ho; ++i) ty[i] = detail::upsample_tap(i, h);
    for (int j = 0; j < wo; ++j) tx[j] = detail::upsample_tap(j, w);
    auto node = detail::make_node({c, ho, wo}, static_cast<std::size_t>(c) * ho * wo, {x.node()});
    for (int ch = 0; ch < c; ++ch) {
        const double* in = x.data().data() + static_cast<std::size_t>(ch) * h * w;
        double* out = node->data.data() + static_cast<std::size_t>(ch) * ho * wo;
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                const auto& a = ty[oy];
                const auto& b = tx[ox];
                out[static_cast<std::size_t>(oy) * wo + ox] =
                    a.w0 * (b.w0 * in[a.i0 * w + b.i0] + b.w1 * in[a.i0 * w + b.i1]) +
                    a.w1 * (b.w0 * in[a.i1 * w + b.i0] + b.w1 * in[a.i1 * w + b.i1]);
            }
    }
    if (node->requires_grad) {
        auto xn = x.node();
        node->backprop = [xn, c, h, w, ho, wo, ty, tx](TensorNode& self) {
            xn->ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                double* gin = xn->grad.data() + static_cast<std::size_t>(ch) * h * w;
                const double* gout = self.grad.data() + static_cast<std::size_t>(ch) * ho * wo;
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) {
                        const auto& a = ty[oy];
                        const auto& b = tx[ox];
                        double g = gout[static_cast<std::size_t>(oy) * wo + ox];
                        gin[a.i0 * w + b.i0] += g * a.w0 * b.w0;
                        gin[a.i0 * w + b.i1] += g * a.w0 * b.w1;
                        gin[a.i1 * w + b.i0] += g * a.w1 * b.w0;
                        gin[a.i1 * w + b.i1] += g * a.w1 * b.w1;
                    }
            }
        };
    }
    return Tensor(node);
}

} // namespace astn

#endif
