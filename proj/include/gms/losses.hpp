#pragma once

#include "gms/ops.hpp"

namespace gms {

enum class LmReduction { Sum, Mean };

struct LossConfig {
    bool use_lm = true;
    bool use_seg = true;
    LmReduction lm_reduction = LmReduction::Sum;
};

// Squared L2 distance between the target and predicted mask latents. Sum
// reduction is the literal norm; mean is exposed because the unweighted
// compound balance depends on latent size.
template <typename T>
Tensor<T> latent_matching_loss(const Tensor<T>& z_m, const Tensor<T>& z_hat,
                               LmReduction reduction = LmReduction::Sum) {
    detail::check_same_shape(z_m, z_hat, "latent_matching_loss");
    Tensor<T> sq = square(sub(z_m, z_hat));
    return reduction == LmReduction::Sum ? sum(sq) : mean(sq);
}

inline constexpr double kDiceEps = 1e-6;

// 1 - (2*sum(M (*) Mhat) + eps) / (sum(M) + sum(Mhat) + eps), differentiable
// in m_hat. m must be binary; m_hat is the pre-threshold grayscale in [0,1].
template <typename T>
Tensor<T> soft_dice_loss(const Tensor<T>& m, const Tensor<T>& m_hat) {
    detail::check_same_shape(m, m_hat, "soft_dice_loss");
    for (size_t i = 0; i < m.numel(); ++i) {
        T v = m.data()[i];
        if (v != T(0) && v != T(1))
            throw ValidationError(strfmt("soft_dice_loss: mask value %g at element %zu is not binary",
                                         static_cast<double>(v), i));
    }
    for (size_t i = 0; i < m_hat.numel(); ++i) {
        T v = m_hat.data()[i];
        if (!(v >= T(0) && v <= T(1)))
            throw ValidationError(strfmt("soft_dice_loss: prediction value %g at element %zu outside [0,1]",
                                         static_cast<double>(v), i));
    }
    const T eps = static_cast<T>(kDiceEps);
    Tensor<T> inter = sum(mul(m, m_hat));
    Tensor<T> denom = shift(add(sum(m), sum(m_hat)), eps);
    Tensor<T> ratio = div(shift(scale(inter, T(2)), eps), denom);
    return shift(scale(ratio, T(-1)), T(1));
}

// Unweighted sum of the enabled components.
template <typename T>
Tensor<T> compound_loss(const LossConfig& cfg, const Tensor<T>& z_m, const Tensor<T>& z_hat,
                        const Tensor<T>& m, const Tensor<T>& m_hat) {
    if (!cfg.use_lm && !cfg.use_seg)
        throw ConfigError("compound_loss: at least one of use_lm/use_seg must be enabled");
    if (cfg.use_lm && !cfg.use_seg) return latent_matching_loss(z_m, z_hat, cfg.lm_reduction);
    if (cfg.use_seg && !cfg.use_lm) return soft_dice_loss(m, m_hat);
    return add(latent_matching_loss(z_m, z_hat, cfg.lm_reduction), soft_dice_loss(m, m_hat));
}

}  // namespace gms
