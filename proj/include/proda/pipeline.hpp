#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "proda/bench_data.hpp"
#include "proda/config.hpp"
#include "proda/denoiser.hpp"
#include "proda/metrics.hpp"
#include "proda/network.hpp"
#include "proda/prototypes.hpp"

namespace proda {

/// One evaluation snapshot. Loss columns are means over the iterations since
/// the previous snapshot.
struct MetricsRow {
    std::size_t iter = 0;
    std::string stage;
    double ce_s = 0, sce_t = 0, kl = 0, reg = 0, kd = 0, total = 0;
    double source_acc = 0, target_acc = 0, target_miou = 0;
    double pseudo_acc = 0, pseudo_miou = 0, proto_drift = 0;
};

struct LossRow {
    std::size_t iter = 0;
    std::string stage;
    double ce_s = 0, sce_t = 0, kl = 0, reg = 0, kd = 0, total = 0;
};

class MetricsLog {
public:
    void add(MetricsRow row) { rows_.push_back(std::move(row)); }
    void add(LossRow row) { losses_.push_back(std::move(row)); }
    const std::vector<MetricsRow>& rows() const noexcept { return rows_; }
    const std::vector<LossRow>& losses() const noexcept { return losses_; }

    void write_metrics_csv(const std::filesystem::path& path) const;
    void write_losses_csv(const std::filesystem::path& path) const;

private:
    std::vector<MetricsRow> rows_;
    std::vector<LossRow> losses_;
};

struct StageSummary {
    std::string stage;
    bool ok = true;
    std::string error;
    std::size_t iterations = 0;
    double source_acc = 0, target_acc = 0, target_miou = 0, pseudo_acc = 0;
    double peak_target_acc = 0;
    double max_drawdown = 0;  // largest drop of target accuracy below its running peak
};

/// Shared state for the stages of one run: data, evaluation channel, log.
struct RunContext {
    const DomainData* data = nullptr;
    metrics::Evaluator evaluator;
    MetricsLog* log = nullptr;
    std::size_t eval_interval = 50;
    std::uint64_t seed = 0;

    RunContext(const DomainData& d, MetricsLog& l, std::size_t interval, std::uint64_t s)
        : data(&d), evaluator(d), log(&l), eval_interval(interval), seed(s) {}
};

/// Source-only CE training until the source accuracy plateaus or the epoch
/// cap is reached. Throws TrainingAborted on a non-finite loss.
StageSummary warmup(Network& net, const StageConfig& cfg, RunContext& ctx);

/// Frozen soft predictions of `net` on the target samples.
PseudoLabelStore generate_boilerplate(const Network& net, const Tensor2D& target);

struct Stage1State {
    Network net;
    EmaEncoder ema;
    PrototypeBank bank{1, 1, 0.0};
    PseudoLabelStore store;
};

/// Prologue: boilerplate, prototype initialisation, momentum encoder copy.
Stage1State prepare_stage1(const Network& warmed, const StageConfig& cfg, const DomainData& data);

/// Denoised self-training with structure learning; mutates `state`.
StageSummary run_stage1(Stage1State& state, const StageConfig& cfg, RunContext& ctx);

/// Encoder pretrained without labels: two jittered copies of a target point
/// are pulled together, other points in the batch are pushed beyond a margin.
Network pretrain_encoder(const NetworkShape& shape, const Tensor2D& target, const StageConfig& cfg,
                         std::uint64_t seed);

Network init_student(const Network& teacher, const StageConfig& cfg, const Tensor2D& target, std::uint64_t seed);

/// Distils `teacher` into `student`; returns the trained student's summary.
StageSummary run_distill_stage(const Network& teacher, Network& student, const StageConfig& cfg,
                               RunContext& ctx, const std::string& stage_name = "distill");

enum class Ablation { Vanilla, DenoiseOnly, StructureOnly, Full };

/// Switches the stage-1 components on/off the way the component ablation does.
void apply_ablation(StageConfig& cfg, Ablation a);
Ablation parse_ablation(const std::string& name);

struct RunManifest {
    std::string config_text;
    std::string config_hash;
    std::uint64_t seed = 0;
    double baseline_target_acc = 0.0;
    std::vector<StageSummary> stages;
    std::optional<std::string> failed_stage;
    std::string failure;
    double wall_clock_seconds = 0.0;

    std::string to_json() const;
};

struct RunResult {
    RunManifest manifest;
    MetricsLog log;
    Network final_net;
};

/// Runs the configured stage list. With an output directory, writes
/// metrics.csv, losses.csv, manifest.json, config.txt, model.ckpt,
/// target_features.csv, prototypes.csv (after stage 1) and the SVG plots.
RunResult run_experiment(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& out_dir = {});

/// One manifest per grid point, written under out_dir/point_NNN.
std::vector<RunManifest> run_sweep(const ParsedConfig& parsed, const std::optional<std::filesystem::path>& out_dir);

/// git blob hash: sha1("blob <len>\0" + content), lowercase hex.
std::string git_blob_hash(const std::string& content);

} // namespace proda
