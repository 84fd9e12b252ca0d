#include "proda/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "proda/errors.hpp"

namespace proda {

CentroidAccumulator::CentroidAccumulator(std::size_t class_count, std::size_t feature_dim)
    : sums_(class_count, feature_dim), counts_(class_count, 0) {}

void CentroidAccumulator::add(const Tensor2D& features, const Labels& labels) {
    if (features.rows() != labels.size()) throw DimensionError("centroids: one label per feature row required");
    if (features.cols() != sums_.cols())
        throw DimensionError(fmt::format("centroids: feature width {} != {}", features.cols(), sums_.cols()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const Label y = labels[i];
        if (y == kIgnore) continue;
        if (y < 0 || static_cast<std::size_t>(y) >= counts_.size())
            throw std::out_of_range(fmt::format("centroids: label {} outside [0,{})", y, counts_.size()));
        auto s = sums_.row(static_cast<std::size_t>(y));
        auto f = features.row(i);
        for (std::size_t d = 0; d < s.size(); ++d) s[d] += f[d];
        ++counts_[static_cast<std::size_t>(y)];
    }
}

BatchCentroids CentroidAccumulator::finish() const {
    BatchCentroids out{sums_, counts_};
    for (std::size_t k = 0; k < counts_.size(); ++k) {
        if (counts_[k] == 0) continue;
        for (double& v : out.centroids.row(k)) v /= static_cast<double>(counts_[k]);
    }
    return out;
}

BatchCentroids batch_centroids(const Tensor2D& features, const Labels& labels, std::size_t class_count) {
    CentroidAccumulator acc(class_count, features.cols());
    acc.add(features, labels);
    return acc.finish();
}

PrototypeBank::PrototypeBank(std::size_t class_count, std::size_t feature_dim, double momentum)
    : centroids_(class_count, feature_dim), seen_(class_count, false), momentum_(0.0) {
    set_momentum(momentum);
}

void PrototypeBank::set_momentum(double m) {
    if (!(m >= 0.0 && m < 1.0)) throw std::invalid_argument("prototype momentum must be in [0,1)");
    momentum_ = m;
}

bool PrototypeBank::any_seen() const noexcept { return std::find(seen_.begin(), seen_.end(), true) != seen_.end(); }

void PrototypeBank::assign(const BatchCentroids& c) {
    require_shape(c.centroids, class_count(), feature_dim(), "prototype assign");
    centroids_ = c.centroids;
    for (std::size_t k = 0; k < class_count(); ++k) {
        seen_[k] = c.counts[k] > 0;
        if (!seen_[k]) std::fill(centroids_.row(k).begin(), centroids_.row(k).end(), 0.0);
    }
}

void PrototypeBank::ema_update(const BatchCentroids& batch) {
    require_shape(batch.centroids, class_count(), feature_dim(), "ema_update_prototypes");
    if (batch.counts.size() != class_count()) throw DimensionError("ema_update_prototypes: counts size");
    for (std::size_t k = 0; k < class_count(); ++k) {
        if (batch.counts[k] == 0) continue;
        auto eta = centroids_.row(k);
        auto fresh = batch.centroids.row(k);
        if (!seen_[k]) {
            std::copy(fresh.begin(), fresh.end(), eta.begin());
            seen_[k] = true;
            continue;
        }
        for (std::size_t d = 0; d < eta.size(); ++d) eta[d] = momentum_ * eta[d] + (1.0 - momentum_) * fresh[d];
    }
}

Tensor2D PrototypeBank::distances(const Tensor2D& features) const {
    if (features.cols() != feature_dim())
        throw DimensionError(fmt::format("distances: feature width {} != {}", features.cols(), feature_dim()));
    Tensor2D out(features.rows(), class_count());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        auto f = features.row(i);
        for (std::size_t k = 0; k < class_count(); ++k) {
            if (!seen_[k]) {
                out(i, k) = std::numeric_limits<double>::infinity();
                continue;
            }
            auto c = centroids_.row(k);
            double s = 0.0;
            for (std::size_t d = 0; d < f.size(); ++d) {
                const double diff = f[d] - c[d];
                s += diff * diff;
            }
            out(i, k) = std::sqrt(s);
        }
    }
    return out;
}

PrototypeBank init_prototypes(const Tensor2D& features, const Labels& labels, std::size_t class_count,
                              double momentum) {
    PrototypeBank bank(class_count, features.cols(), momentum);
    bank.assign(batch_centroids(features, labels, class_count));
    return bank;
}

} // namespace proda
