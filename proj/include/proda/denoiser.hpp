#pragma once

#include <optional>
#include <span>

#include "proda/labels.hpp"
#include "proda/tensor.hpp"

namespace proda {

/// Argmax per row (ties to the lowest class index). Rows whose maximum is
/// below `threshold` map to kIgnore.
Labels hard_label(const Tensor2D& probs, double threshold = 0.0);

/// Softmax over negative distances: w(i,k) = exp(-d(i,k)/tau) / sum_k' exp(-d(i,k')/tau).
/// +inf distances (unseen prototypes) get weight 0. Used both for the label
/// modulation weights and for the soft prototypical assignments.
Tensor2D prototype_softmax(const Tensor2D& distances, double tau);

inline Tensor2D modulation_weights(const Tensor2D& distances, double tau) {
    return prototype_softmax(distances, tau);
}

/// Row-normalised omega * base. Rows with zero mass stay zero.
Tensor2D weighted_labels(const Tensor2D& base, const Tensor2D& omega);

/// argmax_k omega(i,k) * base(i,k). With threshold > 0 the product row is
/// renormalised first and rows whose max falls below the threshold become kIgnore.
Labels rectify_labels(const Tensor2D& base, const Tensor2D& omega, double threshold = 0.0);

/// Frozen soft predictions of the warmed-up model plus the current rectified
/// labels. The boilerplate can be written exactly once.
class PseudoLabelStore {
public:
    PseudoLabelStore() = default;
    explicit PseudoLabelStore(Tensor2D boilerplate);

    bool initialized() const noexcept { return initialized_; }
    void set_boilerplate(Tensor2D boilerplate);
    const Tensor2D& boilerplate() const;

    std::size_t size() const noexcept { return current_.size(); }
    const Labels& current() const noexcept { return current_; }

    /// Recomputes the labels of `indices` from omega (one row per index).
    void rectify(std::span<const std::size_t> indices, const Tensor2D& omega, double threshold = 0.0);
    /// Recomputes every label.
    void rectify_all(const Tensor2D& omega, double threshold = 0.0);

private:
    Tensor2D boilerplate_;
    Labels current_;
    bool initialized_ = false;
};

} // namespace proda
