#pragma once

#include <cstddef>
#include <vector>

#include "proda/labels.hpp"
#include "proda/tensor.hpp"

namespace proda {

/// Per-class feature means of one batch; a zero count marks the row absent.
struct BatchCentroids {
    Tensor2D centroids;
    std::vector<std::size_t> counts;
};

/// Running per-class sums, so dataset-level centroids can be built from a
/// stream of batches. IGNORE labels are skipped.
class CentroidAccumulator {
public:
    CentroidAccumulator(std::size_t class_count, std::size_t feature_dim);
    void add(const Tensor2D& features, const Labels& labels);
    BatchCentroids finish() const;

private:
    Tensor2D sums_;
    std::vector<std::size_t> counts_;
};

BatchCentroids batch_centroids(const Tensor2D& features, const Labels& labels, std::size_t class_count);

/// K class centroids in feature space tracked by exponential moving average.
class PrototypeBank {
public:
    PrototypeBank(std::size_t class_count, std::size_t feature_dim, double momentum);

    std::size_t class_count() const noexcept { return centroids_.rows(); }
    std::size_t feature_dim() const noexcept { return centroids_.cols(); }
    double momentum() const noexcept { return momentum_; }
    void set_momentum(double m);

    const Tensor2D& centroids() const noexcept { return centroids_; }
    const std::vector<bool>& seen() const noexcept { return seen_; }
    bool any_seen() const noexcept;

    /// Overwrites all centroids; classes with count 0 become zero + unseen.
    void assign(const BatchCentroids& c);

    /// eta <- lambda * eta + (1 - lambda) * eta' for classes present in the
    /// batch. A class seen for the first time takes eta' directly.
    void ema_update(const BatchCentroids& batch);

    /// Euclidean distance from every feature row to every centroid.
    /// Unseen classes get +infinity.
    Tensor2D distances(const Tensor2D& features) const;

private:
    Tensor2D centroids_;
    std::vector<bool> seen_;
    double momentum_;
};

/// Dataset-level initialisation: centroid k is the mean of all features
/// whose hard label is k.
PrototypeBank init_prototypes(const Tensor2D& features, const Labels& labels, std::size_t class_count,
                              double momentum);

} // namespace proda
