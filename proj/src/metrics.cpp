#include "proda/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "proda/denoiser.hpp"
#include "proda/errors.hpp"

namespace proda::metrics {

Labels ground_truth(const HiddenLabels& hidden) { return hidden.labels_; }

IouResult confusion_and_iou(const Labels& pred, const Labels& truth, std::size_t class_count) {
    if (pred.size() != truth.size()) throw DimensionError("confusion_and_iou: length mismatch");
    IouResult r;
    r.confusion.assign(class_count, std::vector<std::size_t>(class_count, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == kIgnore || truth[i] == kIgnore) continue;
        const auto p = static_cast<std::size_t>(pred[i]);
        const auto t = static_cast<std::size_t>(truth[i]);
        if (p >= class_count || t >= class_count) throw std::out_of_range("confusion_and_iou: label out of range");
        ++r.confusion[t][p];
        ++r.counted;
        if (p == t) ++correct;
    }
    r.accuracy = r.counted ? static_cast<double>(correct) / static_cast<double>(r.counted) : 0.0;

    r.per_class_iou.assign(class_count, 0.0);
    r.present.assign(class_count, false);
    std::size_t present = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < class_count; ++k) {
        std::size_t tp = r.confusion[k][k], fn = 0, fp = 0;
        for (std::size_t j = 0; j < class_count; ++j) {
            if (j == k) continue;
            fn += r.confusion[k][j];
            fp += r.confusion[j][k];
        }
        r.present[k] = tp + fn > 0;
        const std::size_t denom = tp + fp + fn;
        r.per_class_iou[k] = denom ? static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
        if (r.present[k]) {
            sum += r.per_class_iou[k];
            ++present;
        }
    }
    r.miou = present ? sum / static_cast<double>(present) : 0.0;
    return r;
}

BatchCentroids true_centroids(const Tensor2D& features, const HiddenLabels& truth, std::size_t class_count) {
    return batch_centroids(features, ground_truth(truth), class_count);
}

double prototype_drift(const PrototypeBank& bank, const Tensor2D& features, const HiddenLabels& truth) {
    const BatchCentroids ref = true_centroids(features, truth, bank.class_count());
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < bank.class_count(); ++k) {
        if (!bank.seen()[k] || ref.counts[k] == 0) continue;
        double s = 0.0;
        for (std::size_t d = 0; d < bank.feature_dim(); ++d) {
            const double diff = bank.centroids()(k, d) - ref.centroids(k, d);
            s += diff * diff;
        }
        sum += std::sqrt(s);
        ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

double Evaluator::source_accuracy(const Network& net) const {
    const Labels pred = hard_label(net.forward(data_->source.x).probs);
    return confusion_and_iou(pred, data_->source.y, data_->spec.class_count).accuracy;
}

IouResult Evaluator::target(const Network& net) const {
    const Labels pred = hard_label(net.forward(data_->target).probs);
    return confusion_and_iou(pred, truth_, data_->spec.class_count);
}

IouResult Evaluator::pseudo_labels(const Labels& labels) const {
    return confusion_and_iou(labels, truth_, data_->spec.class_count);
}

double Evaluator::prototype_drift(const PrototypeBank& bank, const EmaEncoder& ema) const {
    return metrics::prototype_drift(bank, ema.forward(data_->target), data_->target_truth);
}

double Evaluator::label_error_rate(const Labels& labels) const {
    const Labels& truth = truth_;
    if (labels.size() != truth.size()) throw DimensionError("label_error_rate: length mismatch");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != truth[i]) ++wrong;
    return labels.empty() ? 0.0 : static_cast<double>(wrong) / static_cast<double>(labels.size());
}

} // namespace proda::metrics
