#pragma once

#include <vector>

#include "proda/bench_data.hpp"
#include "proda/labels.hpp"
#include "proda/network.hpp"
#include "proda/prototypes.hpp"
#include "proda/tensor.hpp"

namespace proda::metrics {

struct IouResult {
    std::vector<std::vector<std::size_t>> confusion;  // [truth][pred]
    std::vector<double> per_class_iou;                // 0 for classes absent from the truth
    std::vector<bool> present;                        // class occurs in the truth
    double miou = 0.0;                                // mean over present classes
    double accuracy = 0.0;                            // over rows where neither side is kIgnore
    std::size_t counted = 0;
};

/// Rows where either label is kIgnore are skipped.
IouResult confusion_and_iou(const Labels& pred, const Labels& truth, std::size_t class_count);

struct EvalReport {
    std::vector<double> per_class_iou;
    double miou = 0.0;
    double accuracy = 0.0;
    double pseudo_accuracy = 0.0;
    double pseudo_miou = 0.0;
    double proto_drift = 0.0;
};

/// Mean per-class features under the hidden ground truth.
BatchCentroids true_centroids(const Tensor2D& features, const HiddenLabels& truth, std::size_t class_count);

/// Mean distance from each seen prototype to its class's true centroid.
double prototype_drift(const PrototypeBank& bank, const Tensor2D& features, const HiddenLabels& truth);

/// Evaluation channel for one dataset. The only consumer of target ground truth.
class Evaluator {
public:
    explicit Evaluator(const DomainData& data) : data_(&data), truth_(ground_truth(data.target_truth)) {}

    double source_accuracy(const Network& net) const;
    IouResult target(const Network& net) const;
    IouResult pseudo_labels(const Labels& labels) const;
    double prototype_drift(const PrototypeBank& bank, const EmaEncoder& ema) const;

    /// Fraction of target samples whose label differs from the truth (kIgnore counts as wrong).
    double label_error_rate(const Labels& labels) const;

private:
    const DomainData* data_;
    Labels truth_;
};

} // namespace proda::metrics
