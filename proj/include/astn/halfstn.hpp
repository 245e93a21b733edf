#ifndef ASTN_HALFSTN_HPP
#define ASTN_HALFSTN_HPP

#include <stdexcept>
#include <vector>

#include "astn/sampling.hpp"
#include "astn/tensor.hpp"
#include "astn/unet.hpp"

namespace astn {

/// Per-atlas-element combined feature: [Q ‖ K_a] rows plus the
/// channel-concatenated skip maps. The target feature is broadcast
/// across rows.
struct CombinedFeature {
    std::vector<Tensor> rows;                     // M vectors of length 2N
    std::vector<std::vector<Tensor>> skips;       // M lists of per-level maps
};

inline CombinedFeature combine(const EncoderOutput& target,
                               const std::vector<EncoderOutput>& atlas_feats) {
    if (atlas_feats.empty()) throw std::invalid_argument("combine: empty atlas feature list");
    CombinedFeature c;
    for (const auto& af : atlas_feats) {
        if (af.bottleneck.shape() != target.bottleneck.shape() ||
            af.skips.size() != target.skips.size())
            throw std::invalid_argument("combine: mismatched feature dimensions");
        c.rows.push_back(concat0({target.bottleneck, af.bottleneck}));
        std::vector<Tensor> s;
        for (std::size_t l = 0; l < target.skips.size(); ++l) {
            if (af.skips[l].shape() != target.skips[l].shape())
                throw std::invalid_argument("combine: mismatched skip dimensions at level " +
                                            std::to_string(l));
            s.push_back(concat0({target.skips[l], af.skips[l]}));
        }
        c.skips.push_back(std::move(s));
    }
    return c;
}

/// Displacement decoder parameters (Θ_HS). Mirrors the segmentation
/// decoder with 2 output channels and a zero-initialized output layer,
/// so training starts from the identity transform.
struct HSParams {
    DecoderParams dec;

    static HSParams init(const ArchConfig& cfg, std::uint64_t seed) {
        auto rng = make_rng(seed, 0x4a5f);
        HSParams p;
        p.dec = DecoderParams::init(cfg, 2 * cfg.latent, 2, 2, true, rng);
        return p;
    }
    NamedTensors named() const { return dec.named("hs"); }
};

/// One displacement field per atlas element, shared weights across
/// elements. Fields are [2,H,W] pixel offsets (dy, dx).
inline std::vector<Tensor> predict_df(const CombinedFeature& comb, const HSParams& params,
                                      const ArchConfig& cfg) {
    std::vector<Tensor> dfs;
    dfs.reserve(comb.rows.size());
    for (std::size_t a = 0; a < comb.rows.size(); ++a)
        dfs.push_back(decode_trunk(comb.rows[a], comb.skips[a], params.dec, cfg));
    return dfs;
}

/// L_reg = mean_a mse(warped_a, target) + λ1 · mean_a L_sot(df_a).
inline Tensor reg_loss(const std::vector<Tensor>& warped, const Tensor& target,
                       const std::vector<Tensor>& dfs, double lambda1) {
    if (warped.empty() || warped.size() != dfs.size())
        throw std::invalid_argument("reg_loss: warped/df list length mismatch (" +
                                    std::to_string(warped.size()) + " vs " +
                                    std::to_string(dfs.size()) + ")");
    Tensor sim = mse(warped[0], target);
    for (std::size_t a = 1; a < warped.size(); ++a) sim = add(sim, mse(warped[a], target));
    Tensor smooth = smoothness_loss(dfs[0]);
    for (std::size_t a = 1; a < dfs.size(); ++a) smooth = add(smooth, smoothness_loss(dfs[a]));
    double inv_m = 1.0 / static_cast<double>(warped.size());
    return add(scale(sim, inv_m), scale(smooth, lambda1 * inv_m));
}

} // namespace astn

#endif
