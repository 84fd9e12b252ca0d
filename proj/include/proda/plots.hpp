#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "proda/tensor.hpp"

namespace proda {

/// 2-D projection of feature rows: the rows themselves when D <= 2, else the
/// top two principal directions. Each direction's sign makes its
/// largest-magnitude component positive.
struct Projection {
    std::vector<double> mean;
    Tensor2D basis;  // D x 2

    static Projection fit(const Tensor2D& features);
    Tensor2D apply(const Tensor2D& features) const;
};

/// Writes outDir/plots/{curves,scatter,pseudo_quality}.svg.
/// metrics_csv needs iter, stage, total, ce_s, sce_t, kl, reg, kd,
/// source_acc, target_acc, pseudo_acc, pseudo_miou. dataset_csv holds
/// numeric feature columns plus an integer class column "y". The optional
/// prototypes file has a "class" column followed by the same feature columns.
/// Missing columns throw FormatError.
void emit_plots(const std::filesystem::path& metrics_csv, const std::filesystem::path& dataset_csv,
                const std::filesystem::path& out_dir,
                const std::optional<std::filesystem::path>& prototypes_csv = {});

} // namespace proda
