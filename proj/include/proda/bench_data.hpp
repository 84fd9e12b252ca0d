#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "proda/labels.hpp"
#include "proda/network.hpp"
#include "proda/tensor.hpp"

namespace proda {

enum class DomainFamily { Gaussian, Moons };

/// Generative description of a source/target pair. The target domain is the
/// source distribution rotated about `pivot` (first two coordinates) and then
/// translated.
struct DomainSpec {
    std::string name = "custom";
    DomainFamily family = DomainFamily::Gaussian;
    std::size_t class_count = 2;
    std::size_t dim = 2;
    std::vector<std::vector<double>> means;  // Gaussian: one mean per class
    std::vector<double> stds;                // Gaussian: isotropic std per class
    double moon_radius = 1.0;                // Moons: arc radius
    double moon_noise = 0.1;                 // Moons: isotropic noise std
    double rotation_deg = 0.0;
    std::vector<double> pivot;
    std::vector<double> translation;
    std::vector<double> class_freqs;         // source class proportions
    std::vector<double> target_class_freqs;  // empty: same as source
    std::size_t n_source = 1000;
    std::size_t n_target = 1000;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument when the spec is inconsistent.
    void validate() const;
};

/// Named presets: "gauss-shift" (4 classes, 2-D) and "moons-shift" (2 classes).
DomainSpec domain_preset(const std::string& name);

struct LabeledSet {
    Tensor2D x;
    Labels y;
};

class HiddenLabels;

namespace metrics {
Labels ground_truth(const HiddenLabels& hidden);
}

/// Target-domain ground truth. Only the metrics module can read it, so
/// training code cannot consume target labels by accident.
class HiddenLabels {
public:
    HiddenLabels() = default;
    explicit HiddenLabels(Labels labels) : labels_(std::move(labels)) {}
    std::size_t size() const noexcept { return labels_.size(); }

private:
    friend Labels metrics::ground_truth(const HiddenLabels& hidden);
    Labels labels_;
};

struct DomainData {
    DomainSpec spec;
    LabeledSet source;
    Tensor2D target;
    HiddenLabels target_truth;
};

DomainData generate(const DomainSpec& spec);

/// Applies the spec's rotation and translation to points.
Tensor2D apply_shift(const DomainSpec& spec, const Tensor2D& x);

/// Flips the labels of the round(rate * N) non-ignored samples with the
/// smallest margin (top-1 minus top-2 probability) under `model`. Each flipped
/// sample takes the model's most probable class other than its current label.
/// Margin ties resolve by sample index.
Labels inject_boundary_noise(const Labels& labels, const Tensor2D& features, const Network& model, double rate);

/// Dataset files: <dir>/source.csv, <dir>/target.csv (x0..x{d-1},y) and
/// <dir>/spec.json.
void export_dataset(const std::filesystem::path& dir, const DomainData& data);
DomainData import_dataset(const std::filesystem::path& dir);

} // namespace proda
