#ifndef ASTN_IMAGE_HPP
#define ASTN_IMAGE_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "astn/tensor.hpp"

namespace astn {

/// Plain H x W grid of reals; the non-autodiff counterpart of a [1,H,W]
/// tensor. Images live in [0,1], labels in {0,1}.
struct Image {
    int h = 0, w = 0;
    std::vector<double> px;

    Image() = default;
    Image(int h_, int w_, double fill = 0.0)
        : h(h_), w(w_), px(static_cast<std::size_t>(h_) * w_, fill) {}

    double& at(int y, int x) { return px[static_cast<std::size_t>(y) * w + x]; }
    double at(int y, int x) const { return px[static_cast<std::size_t>(y) * w + x]; }
    std::size_t size() const { return px.size(); }
    bool same_extent(const Image& o) const { return h == o.h && w == o.w; }
};

using Label = Image;

inline Image clip01(Image img) {
    for (double& v : img.px) v = std::clamp(v, 0.0, 1.0);
    return img;
}

inline Label binarize(const Image& img, double threshold = 0.5) {
    Label out(img.h, img.w);
    for (std::size_t i = 0; i < img.px.size(); ++i) out.px[i] = img.px[i] >= threshold ? 1.0 : 0.0;
    return out;
}

inline std::size_t foreground_count(const Label& l) {
    std::size_t n = 0;
    for (double v : l.px)
        if (v != 0.0) ++n;
    return n;
}

inline Tensor to_tensor(const Image& img, bool requires_grad = false) {
    return Tensor::from({1, img.h, img.w}, img.px, requires_grad);
}

inline Image from_tensor(const Tensor& t) {
    const Shape& s = t.shape();
    if (s.size() != 3 || s[0] != 1)
        throw std::invalid_argument("from_tensor: expected [1,H,W], got " + shape_str(s));
    Image img(s[1], s[2]);
    img.px = t.data();
    return img;
}

/// Bilinear resize with the corner-aligned convention: output index i maps
/// to input position i*(in-1)/(out-1) (0 when out==1). Resizing to the same
/// extent is the identity.
inline Image resize_bilinear(const Image& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize_bilinear: non-positive extent");
    if (out_h == img.h && out_w == img.w) return img;
    Image out(out_h, out_w);
    double sy = out_h > 1 ? static_cast<double>(img.h - 1) / (out_h - 1) : 0.0;
    double sx = out_w > 1 ? static_cast<double>(img.w - 1) / (out_w - 1) : 0.0;
    for (int y = 0; y < out_h; ++y) {
        double fy = y * sy;
        int y0 = std::min(static_cast<int>(fy), img.h - 1);
        int y1 = std::min(y0 + 1, img.h - 1);
        double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = x * sx;
            int x0 = std::min(static_cast<int>(fx), img.w - 1);
            int x1 = std::min(x0 + 1, img.w - 1);
            double wx = fx - x0;
            out.at(y, x) = (1.0 - wy) * ((1.0 - wx) * img.at(y0, x0) + wx * img.at(y0, x1)) +
                           wy * ((1.0 - wx) * img.at(y1, x0) + wx * img.at(y1, x1));
        }
    }
    return out;
}

/// Label resize: bilinear on the soft values, then threshold at 0.5.
inline Label resize_label(const Label& l, int out_h, int out_w) {
    return binarize(resize_bilinear(l, out_h, out_w), 0.5);
}

} // namespace astn

#endif
