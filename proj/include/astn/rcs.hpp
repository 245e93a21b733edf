#ifndef ASTN_RCS_HPP
#define ASTN_RCS_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "astn/image.hpp"
#include "astn/pgm.hpp"

namespace astn {

/// A u x v partition of the image. Remainder rows/columns are absorbed by
/// the last region row/column, so the regions tile the image exactly.
struct GridSpec {
    int u = 0, v = 0;
    int h = 0, w = 0;

    struct Region {
        int y0, y1, x0, x1; // half-open pixel bounds
        double cy, cx;      // geometric center
    };
    std::vector<Region> regions;

    int region_count() const { return u * v; }

    static GridSpec make(int u, int v, int h, int w) {
        if (u < 1 || v < 1 || h < u || w < v)
            throw std::invalid_argument("grid " + std::to_string(u) + "x" + std::to_string(v) +
                                        " does not fit a " + std::to_string(h) + "x" +
                                        std::to_string(w) + " image");
        GridSpec g;
        g.u = u;
        g.v = v;
        g.h = h;
        g.w = w;
        int rh = h / u, rw = w / v;
        for (int i = 0; i < u; ++i)
            for (int j = 0; j < v; ++j) {
                Region r;
                r.y0 = i * rh;
                r.y1 = (i == u - 1) ? h : (i + 1) * rh;
                r.x0 = j * rw;
                r.x1 = (j == v - 1) ? w : (j + 1) * rw;
                r.cy = (r.y0 + r.y1 - 1) / 2.0;
                r.cx = (r.x0 + r.x1 - 1) / 2.0;
                g.regions.push_back(r);
            }
        return g;
    }
};

struct RegionStats {
    double proportion = 0.0;       // P_m: nodule pixels / region pixels
    double centroid_distance = 0.0; // D_m: |nodule centroid - region center|
    std::size_t n_fg = 0, n_bg = 0;
};

/// Per-region nodule proportion and distance from the whole-nodule
/// centroid to each region center.
inline std::vector<RegionStats> region_stats(const Label& label, const GridSpec& grid) {
    if (label.h != grid.h || label.w != grid.w)
        throw std::invalid_argument("region_stats: label extent does not match grid");
    double cy = 0.0, cx = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < label.h; ++y)
        for (int x = 0; x < label.w; ++x)
            if (label.at(y, x) != 0.0) {
                cy += y;
                cx += x;
                ++n;
            }
    if (n == 0) throw std::invalid_argument("empty label");
    cy /= static_cast<double>(n);
    cx /= static_cast<double>(n);

    std::vector<RegionStats> out;
    for (const auto& r : grid.regions) {
        RegionStats s;
        for (int y = r.y0; y < r.y1; ++y)
            for (int x = r.x0; x < r.x1; ++x)
                if (label.at(y, x) != 0.0)
                    ++s.n_fg;
                else
                    ++s.n_bg;
        s.proportion = static_cast<double>(s.n_fg) / static_cast<double>(s.n_fg + s.n_bg);
        s.centroid_distance = std::hypot(cy - r.cy, cx - r.cx);
        out.push_back(s);
    }
    return out;
}

struct ScoreMatrix {
    // s[candidate][region]; excluded candidates carry no row meaning.
    std::vector<std::vector<double>> s;
    std::set<std::size_t> excluded; // indices of candidates with empty labels
};

/// Per-region score s_m = z(P_m) - z(D_m), with z-standardization taken
/// across the candidate pool within each region. A zero-variance quantity
/// contributes z = 0.
inline ScoreMatrix score(const std::vector<Label>& candidates, const GridSpec& grid) {
    std::size_t n = candidates.size();
    std::size_t m = static_cast<std::size_t>(grid.region_count());
    ScoreMatrix sm;
    sm.s.assign(n, std::vector<double>(m, 0.0));
    std::vector<std::vector<RegionStats>> stats(n);
    for (std::size_t i = 0; i < n; ++i) {
        try {
            stats[i] = region_stats(candidates[i], grid);
        } catch (const std::invalid_argument&) {
            sm.excluded.insert(i);
        }
    }
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < n; ++i)
        if (!sm.excluded.count(i)) usable.push_back(i);
    if (usable.size() < 2)
        throw std::invalid_argument("score: need at least 2 usable candidates, have " +
                                    std::to_string(usable.size()));

    auto zscores = [&](auto field) {
        std::vector<std::vector<double>> z(n, std::vector<double>(m, 0.0));
        for (std::size_t r = 0; r < m; ++r) {
            double mean = 0.0;
            for (auto i : usable) mean += field(stats[i][r]);
            mean /= static_cast<double>(usable.size());
            double var = 0.0;
            for (auto i : usable) {
                double d = field(stats[i][r]) - mean;
                var += d * d;
            }
            double sd = std::sqrt(var / static_cast<double>(usable.size()));
            if (sd < 1e-12) continue; // zero variance -> z stays 0
            for (auto i : usable) z[i][r] = (field(stats[i][r]) - mean) / sd;
        }
        return z;
    };
    auto zp = zscores([](const RegionStats& s) { return s.proportion; });
    auto zd = zscores([](const RegionStats& s) { return s.centroid_distance; });
    for (auto i : usable)
        for (std::size_t r = 0; r < m; ++r) sm.s[i][r] = zp[i][r] - zd[i][r];
    return sm;
}

struct AtlasElement {
    Image image;
    Label label;
    std::string source_id;
    int region = 0;
    double score = 0.0;
    std::string image_path, label_path;
};

struct Atlas {
    GridSpec grid;
    std::vector<AtlasElement> elements; // one per region, in region order
};

/// Per-region argmax of the score matrix; ties break toward the lowest
/// candidate id, so the result is independent of candidate order.
inline Atlas assemble(const std::vector<Sample>& candidates, const GridSpec& grid) {
    std::vector<Label> labels;
    for (const auto& c : candidates) labels.push_back(c.label);
    ScoreMatrix sm = score(labels, grid);
    Atlas atlas;
    atlas.grid = grid;
    for (int r = 0; r < grid.region_count(); ++r) {
        int best = -1;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (sm.excluded.count(i)) continue;
            if (best < 0 || sm.s[i][static_cast<std::size_t>(r)] > sm.s[static_cast<std::size_t>(best)][static_cast<std::size_t>(r)] ||
                (sm.s[i][static_cast<std::size_t>(r)] == sm.s[static_cast<std::size_t>(best)][static_cast<std::size_t>(r)] &&
                 candidates[i].id < candidates[static_cast<std::size_t>(best)].id))
                best = static_cast<int>(i);
        }
        if (best < 0)
            throw std::invalid_argument("assemble: no usable candidate for region " +
                                        std::to_string(r));
        const Sample& c = candidates[static_cast<std::size_t>(best)];
        AtlasElement e;
        e.image = c.image;
        e.label = c.label;
        e.source_id = c.id;
        e.region = r;
        e.score = sm.s[static_cast<std::size_t>(best)][static_cast<std::size_t>(r)];
        e.image_path = c.image_path;
        e.label_path = c.label_path;
        atlas.elements.push_back(std::move(e));
    }
    return atlas;
}

/// Uniform random atlas with the same shape, for the RCS ablation.
template <class Rng>
Atlas assemble_random(const std::vector<Sample>& candidates, const GridSpec& grid, Rng& rng) {
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (foreground_count(candidates[i].label) > 0) usable.push_back(i);
    if (usable.empty()) throw std::invalid_argument("assemble_random: no usable candidates");
    Atlas atlas;
    atlas.grid = grid;
    std::uniform_int_distribution<std::size_t> pick(0, usable.size() - 1);
    for (int r = 0; r < grid.region_count(); ++r) {
        const Sample& c = candidates[usable[pick(rng)]];
        AtlasElement e;
        e.image = c.image;
        e.label = c.label;
        e.source_id = c.id;
        e.region = r;
        e.image_path = c.image_path;
        e.label_path = c.label_path;
        atlas.elements.push_back(std::move(e));
    }
    return atlas;
}

inline void write_atlas(const std::string& path, const Atlas& atlas) {
    nlohmann::json j;
    j["grid"] = {{"u", atlas.grid.u}, {"v", atlas.grid.v}};
    j["elements"] = nlohmann::json::array();
    for (const auto& e : atlas.elements)
        j["elements"].push_back({{"region", e.region},
                                 {"source_id", e.source_id},
                                 {"image_path", e.image_path},
                                 {"label_path", e.label_path},
                                 {"score", e.score}});
    std::ofstream f(path, std::ios::binary);
    if (!f) throw PgmError("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

/// Loads atlas.json and the referenced images/labels (paths relative to
/// the atlas file's directory).
inline Atlas read_atlas(const std::string& path, int image_h, int image_w) {
    std::ifstream f(path);
    if (!f) throw PgmError("cannot open: " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    std::filesystem::path base = std::filesystem::path(path).parent_path();
    Atlas atlas;
    atlas.grid = GridSpec::make(j["grid"]["u"].get<int>(), j["grid"]["v"].get<int>(), image_h,
                                image_w);
    for (const auto& rec : j["elements"]) {
        AtlasElement e;
        e.region = rec["region"].get<int>();
        e.source_id = rec["source_id"].get<std::string>();
        e.image_path = rec["image_path"].get<std::string>();
        e.label_path = rec["label_path"].get<std::string>();
        e.score = rec.value("score", 0.0);
        e.image = read_pgm((base / e.image_path).string());
        e.label = binarize(read_pgm((base / e.label_path).string()), 0.5);
        if (e.image.h != image_h || e.image.w != image_w) {
            e.image = resize_bilinear(e.image, image_h, image_w);
            e.label = resize_label(e.label, image_h, image_w);
        }
        atlas.elements.push_back(std::move(e));
    }
    std::sort(atlas.elements.begin(), atlas.elements.end(),
              [](const AtlasElement& a, const AtlasElement& b) { return a.region < b.region; });
    return atlas;
}

} // namespace astn

#endif
