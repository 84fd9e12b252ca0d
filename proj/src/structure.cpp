#include "proda/structure.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "proda/denoiser.hpp"
#include "proda/errors.hpp"
#include "proda/losses.hpp"
#include "proda/rng.hpp"

namespace proda {

void AugmentConfig::validate() const {
    if (weak_jitter_std < 0.0 || strong_jitter_std < 0.0) throw std::invalid_argument("augment: negative jitter");
    if (strong_jitter_std < weak_jitter_std)
        throw std::invalid_argument("augment: strong jitter must be >= weak jitter");
    if (!(strong_drop_prob >= 0.0 && strong_drop_prob <= 1.0))
        throw std::invalid_argument("augment: drop probability outside [0,1]");
    if (!(strong_scale_lo > 0.0 && strong_scale_lo <= strong_scale_hi))
        throw std::invalid_argument("augment: bad scale range");
}

Tensor2D augment(const Tensor2D& x, std::span<const std::size_t> sample_ids, const AugmentConfig& cfg,
                 AugmentMode mode, AugmentKey key) {
    if (sample_ids.size() != x.rows()) throw DimensionError("augment: one sample id per row required");
    Tensor2D out = x;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::mt19937_64 rng(stream_seed(key.seed, sample_ids[i], key.iteration, static_cast<std::uint64_t>(mode)));
        auto r = out.row(i);
        if (mode == AugmentMode::Weak) {
            if (cfg.weak_jitter_std > 0.0) {
                std::normal_distribution<double> n(0.0, cfg.weak_jitter_std);
                for (double& v : r) v += n(rng);
            }
            continue;
        }
        double scale = cfg.strong_scale_lo;
        if (cfg.strong_scale_hi > cfg.strong_scale_lo)
            scale = std::uniform_real_distribution<double>(cfg.strong_scale_lo, cfg.strong_scale_hi)(rng);
        std::normal_distribution<double> n(0.0, cfg.strong_jitter_std > 0.0 ? cfg.strong_jitter_std : 1.0);
        std::bernoulli_distribution drop(cfg.strong_drop_prob);
        for (double& v : r) {
            const double noise = cfg.strong_jitter_std > 0.0 ? n(rng) : 0.0;
            v = scale * (v + noise);
            if (cfg.strong_drop_prob > 0.0 && drop(rng)) v = 0.0;
        }
    }
    return out;
}

Tensor2D soft_assignment(const Tensor2D& features, const PrototypeBank& bank, double tau) {
    return prototype_softmax(bank.distances(features), tau);
}

Tensor2D soft_assignment_backward(const Tensor2D& features, const PrototypeBank& bank, double tau,
                                  const Tensor2D& grad_logits) {
    require_shape(grad_logits, features.rows(), bank.class_count(), "soft_assignment_backward");
    const Tensor2D dist = bank.distances(features);
    Tensor2D grad(features.rows(), features.cols());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        auto f = features.row(i);
        auto g = grad.row(i);
        for (std::size_t k = 0; k < bank.class_count(); ++k) {
            const double d = dist(i, k);
            if (!std::isfinite(d) || d == 0.0) continue;
            // logit u_k = -d_k / tau, d d_k / d f = (f - eta_k) / d_k
            const double coeff = -grad_logits(i, k) / (tau * d);
            auto c = bank.centroids().row(k);
            for (std::size_t j = 0; j < f.size(); ++j) g[j] += coeff * (f[j] - c[j]);
        }
    }
    return grad;
}

ConsistencyOutput consistency_from_views(const Tensor2D& weak_ema_features, const Tensor2D& strong_view,
                                         const Network& net, const PrototypeBank& bank, double tau,
                                         double clamp_floor) {
    ConsistencyOutput out;
    out.z_weak = soft_assignment(weak_ema_features, bank, tau);
    out.strong = net.forward(strong_view, out.trace);
    out.z_strong = soft_assignment(out.strong.features, bank, tau);
    const LossResult kl = kl_consistency(out.z_weak, out.z_strong, clamp_floor);
    out.loss = kl.value;
    out.grad_features = soft_assignment_backward(out.strong.features, bank, tau, kl.grad);
    return out;
}

ConsistencyOutput consistency_step(const Tensor2D& x, std::span<const std::size_t> sample_ids, AugmentKey key,
                                   const Network& net, const EmaEncoder& ema, const PrototypeBank& bank,
                                   const AugmentConfig& cfg, double tau, double clamp_floor) {
    if (!bank.any_seen()) throw StateError("consistency_step: prototype bank has no seen class");
    const Tensor2D weak = augment(x, sample_ids, cfg, AugmentMode::Weak, key);
    const Tensor2D strong = augment(x, sample_ids, cfg, AugmentMode::Strong, key);
    return consistency_from_views(ema.forward(weak), strong, net, bank, tau, clamp_floor);
}

} // namespace proda
