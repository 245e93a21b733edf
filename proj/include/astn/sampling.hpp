#ifndef ASTN_SAMPLING_HPP
#define ASTN_SAMPLING_HPP

#include <cmath>
#include <stdexcept>

#include "astn/tensor.hpp"

namespace astn {

/// Absolute sampling grid: coords[0] = row index, coords[1] = col index.
inline Tensor identity_grid(int h, int w) {
    Tensor g = Tensor::zeros({2, h, w});
    auto& d = g.mutable_data();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            d[static_cast<std::size_t>(y) * w + x] = static_cast<double>(y);
            d[static_cast<std::size_t>(h) * w + static_cast<std::size_t>(y) * w + x] =
                static_cast<double>(x);
        }
    return g;
}

/// Bilinear resampling of x at absolute pixel positions. Out-of-bounds
/// reads are 0. Differentiable w.r.t. both the image and the coordinates.
/// Integer coordinates reproduce stored values exactly.
inline Tensor grid_sample(const Tensor& x, const Tensor& coords) {
    if (x.shape().size() != 3 || coords.shape().size() != 3 || coords.shape()[0] != 2)
        throw std::invalid_argument("grid_sample: expected x [C,H,W], coords [2,Ho,Wo], got " +
                                    shape_str(x.shape()) + " and " + shape_str(coords.shape()));
    int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    int ho = coords.shape()[1], wo = coords.shape()[2];
    std::size_t ohw = static_cast<std::size_t>(ho) * wo;
    auto node = detail::make_node({c, ho, wo}, static_cast<std::size_t>(c) * ohw,
                                  {x.node(), coords.node()});

    auto at = [&](const std::vector<double>& img, int ch, int y, int xx) -> double {
        if (y < 0 || y >= h || xx < 0 || xx >= w) return 0.0;
        return img[(static_cast<std::size_t>(ch) * h + y) * w + xx];
    };
    const auto& cd = coords.data();
    for (std::size_t p = 0; p < ohw; ++p) {
        double r = cd[p];
        double s = cd[ohw + p];
        double rf = std::floor(r);
        double sf = std::floor(s);
        int r0 = static_cast<int>(rf);
        int s0 = static_cast<int>(sf);
        double fr = r - rf;
        double fs = s - sf;
        for (int ch = 0; ch < c; ++ch) {
            double v00 = at(x.data(), ch, r0, s0);
            double v01 = at(x.data(), ch, r0, s0 + 1);
            double v10 = at(x.data(), ch, r0 + 1, s0);
            double v11 = at(x.data(), ch, r0 + 1, s0 + 1);
            node->data[ch * ohw + p] =
                (1.0 - fr) * ((1.0 - fs) * v00 + fs * v01) + fr * ((1.0 - fs) * v10 + fs * v11);
        }
    }
    if (node->requires_grad) {
        auto xn = x.node();
        auto cn = coords.node();
        node->backprop = [xn, cn, c, h, w, ohw](TensorNode& self) {
            if (xn->requires_grad) xn->ensure_grad();
            if (cn->requires_grad) cn->ensure_grad();
            auto at = [&](int ch, int y, int xx) -> double {
                if (y < 0 || y >= h || xx < 0 || xx >= w) return 0.0;
                return xn->data[(static_cast<std::size_t>(ch) * h + y) * w + xx];
            };
            auto acc = [&](int ch, int y, int xx, double g) {
                if (y < 0 || y >= h || xx < 0 || xx >= w) return;
                xn->grad[(static_cast<std::size_t>(ch) * h + y) * w + xx] += g;
            };
            for (std::size_t p = 0; p < ohw; ++p) {
                double r = cn->data[p];
                double s = cn->data[ohw + p];
                double rf = std::floor(r);
                double sf = std::floor(s);
                int r0 = static_cast<int>(rf);
                int s0 = static_cast<int>(sf);
                double fr = r - rf;
                double fs = s - sf;
                double gr = 0.0, gs = 0.0;
                for (int ch = 0; ch < c; ++ch) {
                    double g = self.grad[ch * ohw + p];
                    if (g == 0.0) continue;
                    if (xn->requires_grad) {
                        acc(ch, r0, s0, g * (1.0 - fr) * (1.0 - fs));
                        acc(ch, r0, s0 + 1, g * (1.0 - fr) * fs);
                        acc(ch, r0 + 1, s0, g * fr * (1.0 - fs));
                        acc(ch, r0 + 1, s0 + 1, g * fr * fs);
                    }
                    if (cn->requires_grad) {
                        double v00 = at(ch, r0, s0);
                        double v01 = at(ch, r0, s0 + 1);
                        double v10 = at(ch, r0 + 1, s0);
                        double v11 = at(ch, r0 + 1, s0 + 1);
                        gr += g * ((1.0 - fs) * (v10 - v00) + fs * (v11 - v01));
                        gs += g * ((1.0 - fr) * (v01 - v00) + fr * (v11 - v10));
                    }
                }
                if (cn->requires_grad) {
                    cn->grad[p] += gr;
                    cn->grad[ohw + p] += gs;
                }
            }
        };
    }
    return Tensor(node);
}

/// Backward warping of a (soft) label by a displacement field:
/// out(p) = label sampled at p + df(p), zero outside the grid.
inline Tensor warp(const Tensor& label, const Tensor& df) {
    if (label.shape().size() != 3 || df.shape().size() != 3 || df.shape()[0] != 2 ||
        df.shape()[1] != label.shape()[1] || df.shape()[2] != label.shape()[2])
        throw std::invalid_argument("warp: extent mismatch label " + shape_str(label.shape()) +
                                    " vs df " + shape_str(df.shape()));
    Tensor coords = add(identity_grid(df.shape()[1], df.shape()[2]), df);
    return grid_sample(label, coords);
}

/// Diffusion regularizer on a [2,H,W] displacement field: for each
/// component, the mean squared forward difference in y plus the mean
/// squared forward difference in x (differences taken only where the
/// neighbor exists), averaged over the two components.
inline Tensor smoothness_loss(const Tensor& df) {
    if (df.shape().size() != 3 || df.shape()[0] != 2)
        throw std::invalid_argument("smoothness_loss: expected [2,H,W], got " +
                                    shape_str(df.shape()));
    int h = df.shape()[1], w = df.shape()[2];
    std::size_t hw = static_cast<std::size_t>(h) * w;
    double ny = static_cast<double>(h - 1) * w;
    double nx = static_cast<double>(h) * (w - 1);
    auto node = detail::make_node({1}, 1, {df.node()});
    double total = 0.0;
    for (int comp = 0; comp < 2; ++comp) {
        const double* d = df.data().data() + comp * hw;
        double sy = 0.0, sx = 0.0;
        for (int y = 0; y + 1 < h; ++y)
            for (int x = 0; x < w; ++x) {
                double diff = d[static_cast<std::size_t>(y + 1) * w + x] -
                              d[static_cast<std::size_t>(y) * w + x];
                sy += diff * diff;
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x + 1 < w; ++x) {
                double diff = d[static_cast<std::size_t>(y) * w + x + 1] -
                              d[static_cast<std::size_t>(y) * w + x];
                sx += diff * diff;
            }
        total += (ny > 0 ? sy / ny : 0.0) + (nx > 0 ? sx / nx : 0.0);
    }
    node->data[0] = total / 2.0;
    if (node->requires_grad) {
        auto dn = df.node();
        node->backprop = [dn, h, w, hw, ny, nx](TensorNode& self) {
            dn->ensure_grad();
            double g = self.grad[0] / 2.0;
            for (int comp = 0; comp < 2; ++comp) {
                const double* d = dn->data.data() + comp * hw;
                double* gd = dn->grad.data() + comp * hw;
                double cy = ny > 0 ? 2.0 * g / ny : 0.0;
                double cx = nx > 0 ? 2.0 * g / nx : 0.0;
                for (int y = 0; y + 1 < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        std::size_t a = static_cast<std::size_t>(y) * w + x;
                        std::size_t b = static_cast<std::size_t>(y + 1) * w + x;
                        double diff = cy * (d[b] - d[a]);
                        gd[b] += diff;
                        gd[a] -= diff;
                    }
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x + 1 < w; ++x) {
                        std::size_t a = static_cast<std::size_t>(y) * w + x;
                        std::size_t b = a + 1;
                        double diff = cx * (d[b] - d[a]);
                        gd[b] += diff;
                        gd[a] -= diff;
                    }
            }
        };
    }
    return Tensor(node);
}

} // namespace astn

#endif
