#ifndef ASTN_FUSION_HPP
#define ASTN_FUSION_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "astn/image.hpp"
#include "astn/metrics.hpp"

namespace astn {

struct FusionWeights {
    double v0 = 0.0;        // weight of Seg_initial
    std::vector<double> v;  // weights of the M warped labels
    bool normalized = false;

    double sum() const {
        double s = v0;
        for (double x : v) s += x;
        return s;
    }
};

/// Weights from per-element DSC against Seg_initial: v0 = 1/(M+1),
/// v_a = D_a / (v0 + sum(D)), then the M+1 weights are renormalized to
/// sum to 1 so the fusion stays a convex combination. If every D_a is 0
/// the mass collapses onto Seg_initial.
inline FusionWeights astn_weights_from_dsc(const std::vector<double>& d) {
    std::size_t m = d.size();
    FusionWeights w;
    w.v0 = 1.0 / static_cast<double>(m + 1);
    double dsum = 0.0;
    for (double x : d) dsum += x;
    double denom = w.v0 + dsum;
    w.v.resize(m);
    for (std::size_t a = 0; a < m; ++a) w.v[a] = d[a] / denom;
    double total = w.sum();
    w.v0 /= total;
    for (double& x : w.v) x /= total;
    w.normalized = true;
    return w;
}

/// D_a = DSC(warped_a, Seg_initial) on masks binarized at 0.5.
inline FusionWeights astn_weights(const Image& seg_init, const std::vector<Image>& warped) {
    if (warped.empty()) throw std::invalid_argument("astn_weights: need at least one warped label");
    Label ref = binarize(seg_init, 0.5);
    std::vector<double> d;
    d.reserve(warped.size());
    for (const auto& wl : warped) d.push_back(metrics::dsc(binarize(wl, 0.5), ref));
    return astn_weights_from_dsc(d);
}

/// Pixelwise weighted sum of {Seg_initial} u warped, binarized at
/// `threshold`. Weights must be normalized.
inline Label fuse(const Image& seg_init, const std::vector<Image>& warped, const FusionWeights& w,
                  double threshold = 0.5) {
    if (!w.normalized || std::fabs(w.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("fuse: weights are not normalized");
    if (w.v.size() != warped.size())
        throw std::invalid_argument("fuse: weight count does not match warped label count");
    Image acc(seg_init.h, seg_init.w);
    for (std::size_t i = 0; i < acc.px.size(); ++i) acc.px[i] = w.v0 * seg_init.px[i];
    for (std::size_t a = 0; a < warped.size(); ++a) {
        if (!warped[a].same_extent(seg_init))
            throw std::invalid_argument("fuse: extent mismatch in warped label");
        for (std::size_t i = 0; i < acc.px.size(); ++i) acc.px[i] += w.v[a] * warped[a].px[i];
    }
    return binarize(acc, threshold);
}

/// Soft (pre-threshold) fusion value, for diagnostics.
inline Image fuse_soft(const Image& seg_init, const std::vector<Image>& warped,
                       const FusionWeights& w) {
    Image acc(seg_init.h, seg_init.w);
    for (std::size_t i = 0; i < acc.px.size(); ++i) acc.px[i] = w.v0 * seg_init.px[i];
    for (std::size_t a = 0; a < warped.size(); ++a)
        for (std::size_t i = 0; i < acc.px.size(); ++i) acc.px[i] += w.v[a] * warped[a].px[i];
    return acc;
}

/// Foreground iff strictly more than half of the raters vote foreground;
/// an exact tie is background.
inline Label majority_vote(const std::vector<Label>& labels) {
    if (labels.empty()) throw std::invalid_argument("majority_vote: no labels");
    Label out(labels[0].h, labels[0].w);
    for (std::size_t i = 0; i < out.px.size(); ++i) {
        std::size_t votes = 0;
        for (const auto& l : labels)
            if (l.px[i] != 0.0) ++votes;
        out.px[i] = (2 * votes > labels.size()) ? 1.0 : 0.0;
    }
    return out;
}

/// Per-rater sensitivity/specificity model estimated by STAPLE.
struct RaterModel {
    std::vector<double> p, q;   // sensitivity, specificity per rater
    std::vector<double> prior;  // per-pixel prior pi
    int iterations = 0;
};

/// STAPLE EM. Init p = q = 0.99 and pi = per-pixel mean vote clamped to
/// [0.05, 0.95]; stops when max_a |dp_a| + |dq_a| < tol or at max_iter.
/// Output label is posterior >= 0.5.
inline std::pair<Label, RaterModel> staple(const std::vector<Label>& labels, double tol = 1e-6,
                                           int max_iter = 50) {
    std::size_t r = labels.size();
    if (r < 2) throw std::invalid_argument("staple: need at least 2 raters, have " + std::to_string(r));
    std::size_t n = labels[0].px.size();
    RaterModel model;
    model.p.assign(r, 0.99);
    model.q.assign(r, 0.99);
    model.prior.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (const auto& l : labels) s += l.px[i] != 0.0 ? 1.0 : 0.0;
        model.prior[i] = std::clamp(s / static_cast<double>(r), 0.05, 0.95);
    }

    std::vector<double> post(n, 0.0);
    const double lo = 1e-6, hi = 1.0 - 1e-6;
    for (int it = 0; it < max_iter; ++it) {
        // E-step
        for (std::size_t i = 0; i < n; ++i) {
            double a = model.prior[i], b = 1.0 - model.prior[i];
            for (std::size_t k = 0; k < r; ++k) {
                bool vote = labels[k].px[i] != 0.0;
                a *= vote ? model.p[k] : 1.0 - model.p[k];
                b *= vote ? 1.0 - model.q[k] : model.q[k];
            }
            post[i] = a / (a + b);
        }
        // M-step
        double wsum = 0.0;
        for (double w : post) wsum += w;
        double delta = 0.0;
        for (std::size_t k = 0; k < r; ++k) {
            double ps = 0.0, qs = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                bool vote = labels[k].px[i] != 0.0;
                if (vote) ps += post[i];
                if (!vote) qs += 1.0 - post[i];
            }
            double np = wsum > 0.0 ? std::clamp(ps / wsum, lo, hi) : model.p[k];
            double denom = static_cast<double>(n) - wsum;
            double nq = denom > 0.0 ? std::clamp(qs / denom, lo, hi) : model.q[k];
            delta = std::max(delta, std::fabs(np - model.p[k]) + std::fabs(nq - model.q[k]));
            model.p[k] = np;
            model.q[k] = nq;
        }
        model.iterations = it + 1;
        if (delta < tol) break;
    }
    // final posterior with converged parameters
    Label out(labels[0].h, labels[0].w);
    for (std::size_t i = 0; i < n; ++i) {
        double a = model.prior[i], b = 1.0 - model.prior[i];
        for (std::size_t k = 0; k < r; ++k) {
            bool vote = labels[k].px[i] != 0.0;
            a *= vote ? model.p[k] : 1.0 - model.p[k];
            b *= vote ? 1.0 - model.q[k] : model.q[k];
        }
        out.px[i] = (a / (a + b) >= 0.5) ? 1.0 : 0.0;
    }
    return {out, model};
}

/// Observed-data log-likelihood under a rater model; used to check EM
/// monotonicity.
inline double staple_log_likelihood(const std::vector<Label>& labels, const RaterModel& model) {
    std::size_t n = labels[0].px.size();
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double a = model.prior[i], b = 1.0 - model.prior[i];
        for (std::size_t k = 0; k < labels.size(); ++k) {
            bool vote = labels[k].px[i] != 0.0;
            a *= vote ? model.p[k] : 1.0 - model.p[k];
            b *= vote ? 1.0 - model.q[k] : model.q[k];
        }
        ll += std::log(a + b);
    }
    return ll;
}

} // namespace astn

#endif
