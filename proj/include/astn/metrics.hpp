#ifndef ASTN_METRICS_HPP
#define ASTN_METRICS_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "astn/image.hpp"

namespace astn::metrics {

/// Sentinel for distances that are undefined (empty mask involved).
inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

inline bool is_defined(double v) { return !std::isnan(v); }

namespace detail {

struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
};

inline Counts overlap_counts(const Label& p, const Label& q) {
    if (!p.same_extent(q))
        throw std::invalid_argument("metrics: extent mismatch " + std::to_string(p.h) + "x" +
                                    std::to_string(p.w) + " vs " + std::to_string(q.h) + "x" +
                                    std::to_string(q.w));
    Counts c;
    for (std::size_t i = 0; i < p.px.size(); ++i) {
        bool a = p.px[i] != 0.0, b = q.px[i] != 0.0;
        if (a && b)
            ++c.tp;
        else if (a)
            ++c.fp;
        else if (b)
            ++c.fn;
    }
    return c;
}

// Foreground pixels with at least one background 4-neighbor; the image
// border counts as background.
inline std::vector<std::pair<int, int>> boundary_pixels(const Label& l) {
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < l.h; ++y)
        for (int x = 0; x < l.w; ++x) {
            if (l.at(y, x) == 0.0) continue;
            bool edge = y == 0 || y == l.h - 1 || x == 0 || x == l.w - 1 ||
                        l.at(y - 1, x) == 0.0 || l.at(y + 1, x) == 0.0 || l.at(y, x - 1) == 0.0 ||
                        l.at(y, x + 1) == 0.0;
            if (edge) out.emplace_back(y, x);
        }
    return out;
}

// Exact all-pairs nearest distances from each point of a to the set b.
inline std::vector<double> nearest_distances(const std::vector<std::pair<int, int>>& a,
                                             const std::vector<std::pair<int, int>>& b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [by, bx] : b) {
            double dy = a[i].first - by, dx = a[i].second - bx;
            double d2 = dy * dy + dx * dx;
            if (d2 < best) best = d2;
        }
        out[i] = std::sqrt(best);
    }
    return out;
}

} // namespace detail

/// 2TP/(2TP+FP+FN); both masks empty -> 1, exactly one empty -> 0.
inline double dsc(const Label& p, const Label& q) {
    auto c = detail::overlap_counts(p, q);
    if (c.tp + c.fp + c.fn == 0) return 1.0;
    return 2.0 * c.tp / static_cast<double>(2 * c.tp + c.fp + c.fn);
}

inline double iou(const Label& p, const Label& q) {
    auto c = detail::overlap_counts(p, q);
    if (c.tp + c.fp + c.fn == 0) return 1.0;
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp + c.fn);
}

/// Symmetric Hausdorff distance over boundary pixels; kUndefined if either
/// mask is empty.
inline double hd(const Label& p, const Label& q) {
    auto bp = detail::boundary_pixels(p);
    auto bq = detail::boundary_pixels(q);
    if (bp.empty() || bq.empty()) return kUndefined;
    double m = 0.0;
    for (double d : detail::nearest_distances(bp, bq)) m = std::max(m, d);
    for (double d : detail::nearest_distances(bq, bp)) m = std::max(m, d);
    return m;
}

/// Average symmetric surface distance; kUndefined if either mask is empty.
inline double assd(const Label& p, const Label& q) {
    auto bp = detail::boundary_pixels(p);
    auto bq = detail::boundary_pixels(q);
    if (bp.empty() || bq.empty()) return kUndefined;
    auto avg = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double d : v) s += d;
        return s / static_cast<double>(v.size());
    };
    return 0.5 * (avg(detail::nearest_distances(bp, bq)) + avg(detail::nearest_distances(bq, bp)));
}

struct SampleMetrics {
    std::string id;
    double dsc = 0.0, iou = 0.0;
    double hd = kUndefined, assd = kUndefined;
};

struct Aggregate {
    double mean = 0.0, std = 0.0;
    std::size_t undefined_count = 0;
};

inline Aggregate aggregate(const std::vector<double>& values) {
    Aggregate a;
    std::vector<double> def;
    for (double v : values)
        if (is_defined(v))
            def.push_back(v);
        else
            ++a.undefined_count;
    if (def.empty()) return a;
    for (double v : def) a.mean += v;
    a.mean /= static_cast<double>(def.size());
    for (double v : def) a.std += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(a.std / static_cast<double>(def.size()));
    return a;
}

inline SampleMetrics evaluate_pair(const Label& pred, const Label& truth, std::string id = "") {
    SampleMetrics m;
    m.id = std::move(id);
    m.dsc = dsc(pred, truth);
    m.iou = iou(pred, truth);
    m.hd = hd(pred, truth);
    m.assd = assd(pred, truth);
    return m;
}

} // namespace astn::metrics

#endif
