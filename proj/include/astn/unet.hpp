#ifndef ASTN_UNET_HPP
#define ASTN_UNET_HPP

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "astn/conv.hpp"
#include "astn/image.hpp"
#include "astn/rng.hpp"
#include "astn/tensor.hpp"

namespace astn {

/// Network geometry. Depth-3 conv/pool encoder with a flat latent vector,
/// mirrored decoders with skip concatenation.
struct ArchConfig {
    int size = 64;
    int in_channels = 1;
    std::vector<int> channels = {8, 16, 32};
    int latent = 128;

    int levels() const { return static_cast<int>(channels.size()); }
    int bottom_extent() const { return size >> levels(); }

    bool operator==(const ArchConfig&) const = default;
};

struct EncoderOutput {
    Tensor bottleneck;         // [N]
    std::vector<Tensor> skips; // pre-pool conv outputs, one per level
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

namespace detail {

inline Tensor init_conv(int c_out, int c_in, int k, std::mt19937_64& rng) {
    double s = 1.0 / std::sqrt(static_cast<double>(c_in * k * k));
    std::uniform_real_distribution<double> u(-s, s);
    std::vector<double> w(static_cast<std::size_t>(c_out) * c_in * k * k);
    for (double& v : w) v = u(rng);
    return Tensor::from({c_out, c_in, k, k}, std::move(w), true);
}

inline Tensor init_linear(int out, int in, std::mt19937_64& rng) {
    double s = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-s, s);
    std::vector<double> w(static_cast<std::size_t>(out) * in);
    for (double& v : w) v = u(rng);
    return Tensor::from({out, in}, std::move(w), true);
}

inline Tensor zeros_param(Shape s) { return Tensor::zeros(std::move(s), true); }

} // namespace detail

/// Encoder: per level conv3x3 + leaky relu (kept as skip) + 2x average pool;
/// a final 1x1 conv and global spatial mean produce the latent vector.
struct EncoderParams {
    std::vector<Tensor> conv_w, conv_b;
    Tensor head_w, head_b; // 1x1 conv to latent channels

    static EncoderParams init(const ArchConfig& cfg, std::mt19937_64& rng) {
        EncoderParams p;
        int c_in = cfg.in_channels;
        for (int c_out : cfg.channels) {
            p.conv_w.push_back(detail::init_conv(c_out, c_in, 3, rng));
            p.conv_b.push_back(detail::zeros_param({c_out}));
            c_in = c_out;
        }
        p.head_w = detail::init_conv(cfg.latent, c_in, 1, rng);
        p.head_b = detail::zeros_param({cfg.latent});
        return p;
    }

    NamedTensors named(const std::string& prefix) const {
        NamedTensors n;
        for (std::size_t l = 0; l < conv_w.size(); ++l) {
            n.emplace_back(prefix + ".conv" + std::to_string(l) + ".w", conv_w[l]);
            n.emplace_back(prefix + ".conv" + std::to_string(l) + ".b", conv_b[l]);
        }
        n.emplace_back(prefix + ".head.w", head_w);
        n.emplace_back(prefix + ".head.b", head_b);
        return n;
    }
};

inline EncoderOutput encode(const Tensor& img, const EncoderParams& p, const ArchConfig& cfg) {
    if (img.shape() != Shape{cfg.in_channels, cfg.size, cfg.size})
        throw std::invalid_argument("encode: input extent " + shape_str(img.shape()) +
                                    " does not match configured size " + std::to_string(cfg.size));
    EncoderOutput out;
    Tensor x = img;
    for (std::size_t l = 0; l < p.conv_w.size(); ++l) {
        Tensor h = leaky_relu(conv2d(x, p.conv_w[l], p.conv_b[l], 1, 1));
        out.skips.push_back(h);
        x = pool_down(h);
    }
    Tensor z = conv2d(x, p.head_w, p.head_b, 1, 0); // [N, s, s]
    out.bottleneck = spatial_mean(z);
    return out;
}

/// Decoder shared by the segmentation head and the displacement head:
/// a linear projection re-seeds the bottom feature map, then per level
/// upsample + skip concat + conv3x3 + leaky relu, and a 1x1 output conv.
struct DecoderParams {
    Tensor proj_w, proj_b; // latent -> bottom map
    std::vector<Tensor> conv_w, conv_b;
    Tensor out_w, out_b; // 1x1 conv to out_channels
    int in_dim = 0;
    int out_channels = 1;

    // skip_factor: 1 for the segmentation decoder, 2 for the displacement
    // decoder (target and atlas skips are channel-concatenated).
    // zero_out: zero-init the output conv so the head starts at zero.
    static DecoderParams init(const ArchConfig& cfg, int in_dim, int skip_factor, int out_channels,
                              bool zero_out, std::mt19937_64& rng) {
        DecoderParams p;
        p.in_dim = in_dim;
        p.out_channels = out_channels;
        int bottom = cfg.bottom_extent();
        int c_top = cfg.channels.back();
        p.proj_w = detail::init_linear(c_top * bottom * bottom, in_dim, rng);
        p.proj_b = detail::zeros_param({c_top * bottom * bottom});
        for (int l = cfg.levels() - 1; l >= 0; --l) {
            int c_up = (l == cfg.levels() - 1) ? c_top : cfg.channels[static_cast<std::size_t>(l) + 1 - 1];
            // channels entering level l's conv: upsampled map + skip
            int c_in = c_up + skip_factor * cfg.channels[static_cast<std::size_t>(l)];
            int c_out = l > 0 ? cfg.channels[static_cast<std::size_t>(l) - 1] : cfg.channels[0];
            p.conv_w.push_back(detail::init_conv(c_out, c_in, 3, rng));
            p.conv_b.push_back(detail::zeros_param({c_out}));
        }
        int c_last = cfg.channels[0];
        if (zero_out) {
            p.out_w = detail::zeros_param({out_channels, c_last, 1, 1});
        } else {
            p.out_w = detail::init_conv(out_channels, c_last, 1, rng);
        }
        p.out_b = detail::zeros_param({out_channels});
        return p;
    }

    NamedTensors named(const std::string& prefix) const {
        NamedTensors n;
        n.emplace_back(prefix + ".proj.w", proj_w);
        n.emplace_back(prefix + ".proj.b", proj_b);
        for (std::size_t l = 0; l < conv_w.size(); ++l) {
            n.emplace_back(prefix + ".conv" + std::to_string(l) + ".w", conv_w[l]);
            n.emplace_back(prefix + ".conv" + std::to_string(l) + ".b", conv_b[l]);
        }
        n.emplace_back(prefix + ".out.w", out_w);
        n.emplace_back(prefix + ".out.b", out_b);
        return n;
    }
};

/// Runs the decoder trunk on a latent vector and per-level skip maps
/// (already concatenated for the displacement head). Returns the raw
/// [out_channels,H,W] map before any output nonlinearity.
inline Tensor decode_trunk(const Tensor& latent, const std::vector<Tensor>& skips,
                           const DecoderParams& p, const ArchConfig& cfg) {
    if (latent.shape() != Shape{p.in_dim})
        throw std::invalid_argument("decode: latent shape " + shape_str(latent.shape()) +
                                    " does not match decoder input dim " + std::to_string(p.in_dim));
    if (skips.size() != static_cast<std::size_t>(cfg.levels()))
        throw std::invalid_argument("decode: expected " + std::to_string(cfg.levels()) +
                                    " skip maps, got " + std::to_string(skips.size()));
    int bottom = cfg.bottom_extent();
    Tensor h = leaky_relu(reshape(linear(p.proj_w, latent, p.proj_b),
                            {cfg.channels.back(), bottom, bottom}));
    for (int l = cfg.levels() - 1; l >= 0; --l) {
        std::size_t ci = static_cast<std::size_t>(cfg.levels() - 1 - l);
        h = upsample2x(h);
        h = concat0({h, skips[static_cast<std::size_t>(l)]});
        h = leaky_relu(conv2d(h, p.conv_w[ci], p.conv_b[ci], 1, 1));
    }
    return conv2d(h, p.out_w, p.out_b, 1, 0);
}

struct SegParams {
    EncoderParams enc;
    DecoderParams dec;

    static SegParams init(const ArchConfig& cfg, std::uint64_t seed) {
        auto rng = make_rng(seed, 0x5e67);
        SegParams p;
        p.enc = EncoderParams::init(cfg, rng);
        p.dec = DecoderParams::init(cfg, cfg.latent, 1, 1, false, rng);
        return p;
    }
    NamedTensors named() const {
        NamedTensors n = enc.named("enc");
        auto d = dec.named("dec");
        n.insert(n.end(), d.begin(), d.end());
        return n;
    }
};

/// Seg_initial = sigmoid(decoder(Q, skips)); values in (0,1).
inline Tensor decode_seg(const EncoderOutput& feat, const SegParams& p, const ArchConfig& cfg) {
    return sigmoid(decode_trunk(feat.bottleneck, feat.skips, p.dec, cfg));
}

} // namespace astn

#endif
