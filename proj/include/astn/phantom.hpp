#ifndef ASTN_PHANTOM_HPP
#define ASTN_PHANTOM_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "astn/image.hpp"
#include "astn/pgm.hpp"
#include "astn/rng.hpp"

namespace astn {

/// Appearance knobs for one synthetic "device". Two profiles stand in for
/// ultrasound scanners with different gain, speckle and texture.
struct DomainProfile {
    std::string name = "a";
    double background_mean = 0.40;
    double background_texture_scale = 0.06;
    double nodule_contrast = -0.18; // signed offset in [-0.3, 0.3]
    double speckle_strength = 0.15;
    double blur_radius = 1.0;
    double gain_gamma = 1.0;
    // Acoustic shadowing: dark vertical bands of randomized position and
    // width, a common artifact that differs between probes. Zero in
    // profile "a"; profile "b" carries pronounced shadows.
    int shadow_count = 0;
    double shadow_strength = 0.0;

    static DomainProfile domain_a() { return DomainProfile{}; }
    static DomainProfile domain_b() {
        DomainProfile p;
        p.name = "b";
        p.background_mean = 0.58;
        p.background_texture_scale = 0.10;
        p.nodule_contrast = -0.26;
        p.speckle_strength = 0.26;
        p.blur_radius = 1.6;
        p.gain_gamma = 1.35;
        p.shadow_count = 3;
        p.shadow_strength = 0.40;
        return p;
    }
    static DomainProfile by_name(const std::string& n) {
        if (n == "a") return domain_a();
        if (n == "b") return domain_b();
        throw std::invalid_argument("unknown domain '" + n + "' (expected 'a' or 'b')");
    }
};

namespace detail {

// Low-frequency background texture: coarse noise grid upsampled bilinearly.
inline Image background_texture(int size, double amp, std::mt19937_64& rng) {
    int coarse = std::max(2, size / 8);
    Image g(coarse, coarse);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (double& v : g.px) v = amp * nd(rng);
    return resize_bilinear(g, size, size);
}

inline Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0.0) return img;
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[static_cast<std::size_t>(i + radius)];
    }
    for (double& v : k) v /= sum;
    Image tmp(img.h, img.w), out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i)
                s += k[static_cast<std::size_t>(i + radius)] *
                     img.at(y, std::clamp(x + i, 0, img.w - 1));
            tmp.at(y, x) = s;
        }
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i)
                s += k[static_cast<std::size_t>(i + radius)] *
                     tmp.at(std::clamp(y + i, 0, img.h - 1), x);
            out.at(y, x) = s;
        }
    return out;
}

} // namespace detail

/// One elliptical low-contrast nodule per image, with randomized center,
/// semi-axes (8-35% of size) and rotation, then speckle, blur and gamma
/// gain per profile. Each sample draws from its own RNG stream, so output
/// depends only on (seed, index, profile, size).
inline Sample make_phantom(const DomainProfile& profile, int size, std::uint64_t seed,
                           std::uint64_t index) {
    if (size < 16) throw std::invalid_argument("phantom size must be >= 16, got " + std::to_string(size));
    auto rng = make_rng(seed, split_mix(index * 2 + (profile.name == "b" ? 1 : 0)));
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    // semi-axes in 8-35% of size, drawn bell-shaped (mean of three uniform
    // draws) so sizes cluster around a typical nodule instead of spreading
    // uniformly across the whole range
    auto axis = [&] { return (0.08 + 0.09 * (u01(rng) + u01(rng) + u01(rng))) * size; };
    double a = axis();
    double b = axis();
    double margin = std::max(a, b) + 1.0;
    double lo = margin, hi = size - 1 - margin;
    if (hi < lo) lo = hi = (size - 1) / 2.0;
    double cy = lo + (hi - lo) * u01(rng);
    double cx = lo + (hi - lo) * u01(rng);
    double theta = 3.14159265358979323846 * u01(rng);
    double ct = std::cos(theta), st = std::sin(theta);

    Label label(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double dy = y - cy, dx = x - cx;
            double ry = ct * dy + st * dx;
            double rx = -st * dy + ct * dx;
            if ((ry * ry) / (a * a) + (rx * rx) / (b * b) <= 1.0) label.at(y, x) = 1.0;
        }

    Image img = detail::background_texture(size, profile.background_texture_scale, rng);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            img.at(y, x) += profile.background_mean + profile.nodule_contrast * label.at(y, x);

    // acoustic shadow bands: smooth multiplicative darkening of a few
    // vertical stripes, drawn before blur so their edges soften
    for (int sblock = 0; sblock < profile.shadow_count; ++sblock) {
        double scx = u01(rng) * (size - 1);
        double shw = (0.05 + 0.10 * u01(rng)) * size; // half-width
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                double t = (x - scx) / shw;
                double atten = profile.shadow_strength * std::exp(-0.5 * t * t);
                img.at(y, x) *= 1.0 - atten;
            }
    }

    std::normal_distribution<double> nd(0.0, 1.0);
    for (double& v : img.px) v *= 1.0 + profile.speckle_strength * nd(rng);
    img = detail::gaussian_blur(img, profile.blur_radius);
    img = clip01(img);
    for (double& v : img.px) v = std::pow(v, profile.gain_gamma);

    Sample s;
    s.image = std::move(img);
    s.label = std::move(label);
    s.domain = profile.name;
    return s;
}

inline std::vector<Sample> generate(int count, const DomainProfile& profile, int size,
                                    std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("generate: count must be >= 1");
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        out.push_back(make_phantom(profile, size, seed, static_cast<std::uint64_t>(i)));
    return out;
}

} // namespace astn

#endif
