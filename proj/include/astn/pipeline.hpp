#ifndef ASTN_PIPELINE_HPP
#define ASTN_PIPELINE_HPP

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "astn/checkpoint.hpp"
#include "astn/config.hpp"
#include "astn/fusion.hpp"
#include "astn/halfstn.hpp"
#include "astn/metrics.hpp"
#include "astn/optim.hpp"
#include "astn/pgm.hpp"
#include "astn/rcs.hpp"
#include "astn/unet.hpp"

namespace astn {

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    double lr = 0.0;
};

namespace detail {

inline std::vector<Tensor> group_tensors(const NamedTensors& named) {
    std::vector<Tensor> out;
    for (const auto& [name, t] : named) out.push_back(t);
    return out;
}

inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size,
                                                          std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(batch_size))
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(
                                                 std::min(n, i + static_cast<std::size_t>(batch_size))));
    return batches;
}

} // namespace detail

/// Phase 1: segmentation pretraining on L_seg only. Deterministic given
/// the config seed (fixed shuffle sequence).
inline std::vector<EpochLog> train_phase1(const std::vector<Sample>& train, ModelParams& model,
                                          const TrainConfig& cfg) {
    if (train.empty()) throw std::invalid_argument("train_phase1: empty training split");
    ArchConfig arch = cfg.arch();
    RmsProp opt;
    opt.add_group(detail::group_tensors(model.seg.named()), cfg.lr_seg);
    auto rng = make_rng(cfg.seed, 0x9e1);
    std::vector<EpochLog> logs;
    for (int epoch = 0; epoch < cfg.seg_epochs; ++epoch) {
        double lr_scale = std::pow(cfg.lr_decay, epoch / cfg.lr_decay_every);
        double epoch_loss = 0.0;
        std::size_t batches_done = 0;
        for (const auto& batch : detail::make_batches(train.size(), cfg.batch_size, rng)) {
            Tensor loss;
            for (std::size_t idx : batch) {
                Tensor x = to_tensor(train[idx].image);
                Tensor y = to_tensor(train[idx].label);
                Tensor l = mse(decode_seg(encode(x, model.seg.enc, arch), model.seg, arch), y);
                loss = loss.valid() ? add(loss, l) : l;
            }
            loss = scale(loss, 1.0 / static_cast<double>(batch.size()));
            opt.zero_grad();
            backward(loss);
            opt.step(lr_scale);
            epoch_loss += loss.item();
            ++batches_done;
        }
        logs.push_back({epoch, epoch_loss / static_cast<double>(batches_done),
                        cfg.lr_seg * lr_scale});
    }
    return logs;
}

/// Phase 2: joint training of encoder, segmentation decoder and the
/// displacement head on L_total = L_reg + λ2·L_sim. Atlas features are
/// recomputed every step (the encoder moves); with
/// cache_atlas_features they are refreshed once per epoch instead.
inline std::vector<EpochLog> train_phase2(const std::vector<Sample>& train, const Atlas& atlas,
                                          ModelParams& model, const TrainConfig& cfg) {
    if (train.empty()) throw std::invalid_argument("train_phase2: empty training split");
    if (atlas.elements.empty()) throw std::invalid_argument("train_phase2: empty atlas");
    ArchConfig arch = cfg.arch();
    for (const auto& e : atlas.elements)
        if (e.image.h != cfg.size || e.image.w != cfg.size)
            throw std::invalid_argument("train_phase2: atlas extent does not match config size");

    std::vector<Tensor> atlas_imgs, atlas_labels;
    for (const auto& e : atlas.elements) {
        atlas_imgs.push_back(to_tensor(e.image));
        atlas_labels.push_back(to_tensor(e.label));
    }

    RmsProp opt;
    opt.add_group(detail::group_tensors(model.seg.named()), cfg.lr_seg);
    opt.add_group(detail::group_tensors(model.hs.named()), cfg.lr_reg);
    auto rng = make_rng(cfg.seed, 0x9e2);
    std::vector<EpochLog> logs;

    for (int epoch = 0; epoch < cfg.reg_epochs; ++epoch) {
        double lr_scale = std::pow(cfg.lr_decay, epoch / cfg.lr_decay_every);
        double epoch_loss = 0.0;
        std::size_t batches_done = 0;
        std::vector<EncoderOutput> cached_feats;
        if (cfg.cache_atlas_features)
            for (const auto& ai : atlas_imgs) cached_feats.push_back(encode(ai, model.seg.enc, arch));
        for (const auto& batch : detail::make_batches(train.size(), cfg.batch_size, rng)) {
            std::vector<EncoderOutput> atlas_feats;
            if (cfg.cache_atlas_features) {
                atlas_feats = cached_feats;
            } else {
                for (const auto& ai : atlas_imgs)
                    atlas_feats.push_back(encode(ai, model.seg.enc, arch));
            }
            Tensor loss;
            for (std::size_t idx : batch) {
                Tensor x = to_tensor(train[idx].image);
                Tensor y = to_tensor(train[idx].label);
                EncoderOutput feat = encode(x, model.seg.enc, arch);
                CombinedFeature comb = combine(feat, atlas_feats);
                std::vector<Tensor> dfs = predict_df(comb, model.hs, arch);
                std::vector<Tensor> warped;
                for (std::size_t a = 0; a < dfs.size(); ++a)
                    warped.push_back(warp(atlas_labels[a], dfs[a]));
                Tensor l = reg_loss(warped, y, dfs, cfg.lambda1);
                if (!cfg.no_seg_decoder) {
                    Tensor seg_init = decode_seg(feat, model.seg, arch);
                    l = add(l, scale(mse(seg_init, y), cfg.lambda2));
                }
                loss = loss.valid() ? add(loss, l) : l;
            }
            loss = scale(loss, 1.0 / static_cast<double>(batch.size()));
            opt.zero_grad();
            backward(loss);
            opt.step(lr_scale);
            epoch_loss += loss.item();
            ++batches_done;
        }
        logs.push_back({epoch, epoch_loss / static_cast<double>(batches_done),
                        cfg.lr_reg * lr_scale});
    }
    return logs;
}

struct InferDiagnostics {
    Image seg_initial;            // soft decoder output
    std::vector<Image> warped;    // soft warped atlas labels
    std::vector<Tensor> dfs;      // displacement fields [2,H,W]
    std::vector<double> d;        // per-element DSC vs Seg_initial
    FusionWeights weights;
    bool untrained_warning = false;
};

/// Full forward chain: encode -> decode -> combine -> predict_df -> warp
/// -> weights -> fuse.
inline Label infer(const Image& img, const Atlas& atlas, const ModelParams& model,
                   const TrainConfig& cfg, InferDiagnostics* diag = nullptr) {
    ArchConfig arch = cfg.arch();
    Tensor x = to_tensor(img);
    EncoderOutput feat = encode(x, model.seg.enc, arch);
    Tensor seg_init_t = decode_seg(feat, model.seg, arch);
    Image seg_init = from_tensor(seg_init_t);

    std::vector<EncoderOutput> atlas_feats;
    for (const auto& e : atlas.elements)
        atlas_feats.push_back(encode(to_tensor(e.image), model.seg.enc, arch));
    CombinedFeature comb = combine(feat, atlas_feats);
    std::vector<Tensor> dfs = predict_df(comb, model.hs, arch);
    std::vector<Image> warped;
    for (std::size_t a = 0; a < dfs.size(); ++a)
        warped.push_back(from_tensor(warp(to_tensor(atlas.elements[a].label), dfs[a])));

    FusionWeights w = astn_weights(seg_init, warped);
    Label fused = fuse(seg_init, warped, w, cfg.threshold);
    if (diag) {
        diag->seg_initial = seg_init;
        diag->warped = warped;
        diag->dfs = dfs;
        Label ref = binarize(seg_init, 0.5);
        diag->d.clear();
        for (const auto& wl : warped) diag->d.push_back(metrics::dsc(binarize(wl, 0.5), ref));
        diag->weights = w;
        bool all_zero = true;
        for (const auto& [name, t] : model.named())
            for (double v : t.data())
                if (v != 0.0) {
                    all_zero = false;
                    break;
                }
        diag->untrained_warning = all_zero;
    }
    return fused;
}

enum class FusionMode { astn, mv, staple, none };

inline FusionMode fusion_mode_from(const std::string& s) {
    if (s == "astn") return FusionMode::astn;
    if (s == "mv") return FusionMode::mv;
    if (s == "staple") return FusionMode::staple;
    if (s == "none") return FusionMode::none;
    throw std::invalid_argument("unknown fusion mode '" + s + "'");
}

struct Report {
    nlohmann::json config;
    std::vector<metrics::SampleMetrics> samples;
    metrics::Aggregate dsc, iou, hd, assd;
};

inline void finalize_report(Report& r) {
    auto collect = [&](auto field) {
        std::vector<double> v;
        for (const auto& s : r.samples) v.push_back(field(s));
        return metrics::aggregate(v);
    };
    r.dsc = collect([](const metrics::SampleMetrics& s) { return s.dsc; });
    r.iou = collect([](const metrics::SampleMetrics& s) { return s.iou; });
    r.hd = collect([](const metrics::SampleMetrics& s) { return s.hd; });
    r.assd = collect([](const metrics::SampleMetrics& s) { return s.assd; });
}

inline nlohmann::json report_to_json(const Report& r) {
    nlohmann::json j;
    j["config"] = r.config;
    j["samples"] = nlohmann::json::array();
    auto num = [](double v) {
        return metrics::is_defined(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    };
    for (const auto& s : r.samples)
        j["samples"].push_back(
            {{"id", s.id}, {"dsc", s.dsc}, {"iou", s.iou}, {"hd", num(s.hd)}, {"assd", num(s.assd)}});
    auto agg = [](const metrics::Aggregate& a) {
        return nlohmann::json{
            {"mean", a.mean}, {"std", a.std}, {"undefined_count", a.undefined_count}};
    };
    j["aggregate"] = {{"dsc", agg(r.dsc)}, {"iou", agg(r.iou)}, {"hd", agg(r.hd)},
                      {"assd", agg(r.assd)}};
    return j;
}

inline void write_report(const std::string& path, const Report& r) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open report for writing: " + path);
    f << report_to_json(r).dump(2) << "\n";
}

/// Evaluates one sample under a fusion mode. For FusionMode::none the row
/// holds pre-fusion registration quality: per-element metrics of the
/// warped labels against ground truth, averaged over the atlas.
inline metrics::SampleMetrics eval_sample(const Sample& s, const Atlas& atlas,
                                          const ModelParams& model, const TrainConfig& cfg,
                                          FusionMode mode) {
    InferDiagnostics diag;
    Label fused = infer(s.image, atlas, model, cfg, &diag);
    std::vector<Label> warped_bin;
    for (const auto& wl : diag.warped) warped_bin.push_back(binarize(wl, cfg.threshold));
    switch (mode) {
        case FusionMode::astn:
            return metrics::evaluate_pair(fused, s.label, s.id);
        case FusionMode::mv:
            return metrics::evaluate_pair(majority_vote(warped_bin), s.label, s.id);
        case FusionMode::staple:
            return metrics::evaluate_pair(staple(warped_bin).first, s.label, s.id);
        case FusionMode::none: {
            metrics::SampleMetrics m;
            m.id = s.id;
            std::vector<double> ds, is, hs, as;
            for (const auto& wb : warped_bin) {
                auto em = metrics::evaluate_pair(wb, s.label);
                ds.push_back(em.dsc);
                is.push_back(em.iou);
                hs.push_back(em.hd);
                as.push_back(em.assd);
            }
            m.dsc = metrics::aggregate(ds).mean;
            m.iou = metrics::aggregate(is).mean;
            auto ha = metrics::aggregate(hs);
            auto aa = metrics::aggregate(as);
            m.hd = ha.undefined_count == hs.size() ? metrics::kUndefined : ha.mean;
            m.assd = aa.undefined_count == as.size() ? metrics::kUndefined : aa.mean;
            return m;
        }
    }
    throw std::logic_error("unreachable fusion mode");
}

/// Test-set evaluation, optionally fanned out over worker threads with a
/// deterministic reduce order (results land in index order).
inline Report evaluate(const std::vector<Sample>& samples, const Atlas& atlas,
                       const ModelParams& model, const TrainConfig& cfg, FusionMode mode,
                       int threads = 1) {
    Report r;
    r.config = cfg.to_json();
    r.samples.resize(samples.size());
    if (threads <= 1) {
        for (std::size_t i = 0; i < samples.size(); ++i)
            r.samples[i] = eval_sample(samples[i], atlas, model, cfg, mode);
    } else {
        std::vector<std::thread> pool;
        std::size_t per = (samples.size() + static_cast<std::size_t>(threads) - 1) /
                          static_cast<std::size_t>(threads);
        for (int t = 0; t < threads; ++t) {
            std::size_t lo = static_cast<std::size_t>(t) * per;
            std::size_t hi = std::min(samples.size(), lo + per);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi] {
                for (std::size_t i = lo; i < hi; ++i)
                    r.samples[i] = eval_sample(samples[i], atlas, model, cfg, mode);
            });
        }
        for (auto& th : pool) th.join();
    }
    finalize_report(r);
    return r;
}

} // namespace astn

#endif
