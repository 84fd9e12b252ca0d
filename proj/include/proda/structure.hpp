#pragma once

#include <cstdint>
#include <span>

#include "proda/network.hpp"
#include "proda/prototypes.hpp"
#include "proda/tensor.hpp"

namespace proda {

/// Point-space augmentations. Weak: Gaussian jitter. Strong: jitter, a random
/// per-sample scale and per-coordinate dropout.
struct AugmentConfig {
    double weak_jitter_std = 0.05;
    double strong_jitter_std = 0.3;
    double strong_drop_prob = 0.1;
    double strong_scale_lo = 0.85;
    double strong_scale_hi = 1.15;

    /// Throws std::invalid_argument on out-of-range values or when the strong
    /// view is not at least as noisy as the weak view.
    void validate() const;
};

enum class AugmentMode : std::uint8_t { Weak = 0, Strong = 1 };

/// Identifies the random stream of one augmentation call. Each row draws
/// from its own generator keyed on (seed, sample id, iteration, mode), so the
/// result does not depend on batch composition or order.
struct AugmentKey {
    std::uint64_t seed = 0;
    std::uint64_t iteration = 0;
};

Tensor2D augment(const Tensor2D& x, std::span<const std::size_t> sample_ids, const AugmentConfig& cfg,
                 AugmentMode mode, AugmentKey key);

/// Prototypical soft assignment z = softmax(-||f - eta|| / tau). Same kernel
/// as modulation_weights().
Tensor2D soft_assignment(const Tensor2D& features, const PrototypeBank& bank, double tau);

/// Pulls a gradient on the assignment logits (-d/tau) back to the features.
/// Prototypes are constants.
Tensor2D soft_assignment_backward(const Tensor2D& features, const PrototypeBank& bank, double tau,
                                  const Tensor2D& grad_logits);

struct ConsistencyOutput {
    double loss = 0.0;
    Tensor2D z_weak;
    Tensor2D z_strong;
    Tensor2D grad_features;  // d loss / d f(strong view); feed to Network::backward
    ForwardTrace trace;      // recorded forward of the strong view
    ForwardResult strong;
};

/// KL(z_weak || z_strong) with z_weak from momentum-encoder features of the
/// weak view (constant) and z_strong from the live extractor on the strong view.
ConsistencyOutput consistency_from_views(const Tensor2D& weak_ema_features, const Tensor2D& strong_view,
                                         const Network& net, const PrototypeBank& bank, double tau,
                                         double clamp_floor = 1e-4);

ConsistencyOutput consistency_step(const Tensor2D& x, std::span<const std::size_t> sample_ids, AugmentKey key,
                                   const Network& net, const EmaEncoder& ema, const PrototypeBank& bank,
                                   const AugmentConfig& cfg, double tau, double clamp_floor = 1e-4);

} // namespace proda
