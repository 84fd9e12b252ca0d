#include "proda/denoiser.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "proda/errors.hpp"

namespace proda {

namespace {

Label argmax_row(std::span<const double> row) {
    if (row.empty()) return kIgnore;
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
        if (row[k] > row[best]) best = k;
    return static_cast<Label>(best);
}

} // namespace

Labels hard_label(const Tensor2D& probs, double threshold) {
    Labels out(probs.rows(), kIgnore);
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const Label k = argmax_row(probs.row(i));
        if (k != kIgnore && probs(i, static_cast<std::size_t>(k)) >= threshold) out[i] = k;
    }
    return out;
}

Tensor2D prototype_softmax(const Tensor2D& distances, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("prototype_softmax: tau must be positive");
    Tensor2D out(distances.rows(), distances.cols());
    for (std::size_t i = 0; i < distances.rows(); ++i) {
        auto d = distances.row(i);
        double dmin = std::numeric_limits<double>::infinity();
        for (double v : d) dmin = std::min(dmin, v);
        if (!std::isfinite(dmin)) throw StateError("prototype_softmax: no seen prototype");
        auto o = out.row(i);
        double sum = 0.0;
        for (std::size_t k = 0; k < d.size(); ++k) {
            o[k] = std::isfinite(d[k]) ? std::exp(-(d[k] - dmin) / tau) : 0.0;
            sum += o[k];
        }
        for (double& v : o) v /= sum;
    }
    return out;
}

Tensor2D weighted_labels(const Tensor2D& base, const Tensor2D& omega) {
    require_shape(omega, base.rows(), base.cols(), "weighted_labels");
    Tensor2D out(base.rows(), base.cols());
    for (std::size_t i = 0; i < base.rows(); ++i) {
        auto o = out.row(i);
        double sum = 0.0;
        for (std::size_t k = 0; k < o.size(); ++k) {
            o[k] = omega(i, k) * base(i, k);
            sum += o[k];
        }
        if (sum > 0.0)
            for (double& v : o) v /= sum;
    }
    return out;
}

Labels rectify_labels(const Tensor2D& base, const Tensor2D& omega, double threshold) {
    require_shape(omega, base.rows(), base.cols(), "rectify");
    Labels out(base.rows(), kIgnore);
    std::vector<double> prod(base.cols());
    for (std::size_t i = 0; i < base.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < prod.size(); ++k) {
            prod[k] = omega(i, k) * base(i, k);
            sum += prod[k];
        }
        if (!(sum > 0.0)) continue;
        const Label k = argmax_row(prod);
        if (threshold > 0.0 && prod[static_cast<std::size_t>(k)] / sum < threshold) continue;
        out[i] = k;
    }
    return out;
}

PseudoLabelStore::PseudoLabelStore(Tensor2D boilerplate) { set_boilerplate(std::move(boilerplate)); }

void PseudoLabelStore::set_boilerplate(Tensor2D boilerplate) {
    if (initialized_) throw StateError("PseudoLabelStore: boilerplate is write-once");
    for (std::size_t i = 0; i < boilerplate.rows(); ++i) {
        double s = 0.0;
        for (double v : boilerplate.row(i)) s += v;
        if (std::abs(s - 1.0) > 1e-6) throw std::invalid_argument("PseudoLabelStore: boilerplate rows must sum to 1");
    }
    current_ = hard_label(boilerplate, 0.0);
    boilerplate_ = std::move(boilerplate);
    initialized_ = true;
}

const Tensor2D& PseudoLabelStore::boilerplate() const {
    if (!initialized_) throw StateError("PseudoLabelStore: boilerplate not generated");
    return boilerplate_;
}

void PseudoLabelStore::rectify(std::span<const std::size_t> indices, const Tensor2D& omega, double threshold) {
    const Tensor2D base = boilerplate().gather_rows(indices);
    const Labels fresh = rectify_labels(base, omega, threshold);
    for (std::size_t j = 0; j < indices.size(); ++j) current_[indices[j]] = fresh[j];
}

void PseudoLabelStore::rectify_all(const Tensor2D& omega, double threshold) {
    current_ = rectify_labels(boilerplate(), omega, threshold);
}

} // namespace proda
