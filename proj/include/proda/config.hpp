#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "proda/bench_data.hpp"
#include "proda/losses.hpp"
#include "proda/network.hpp"
#include "proda/structure.hpp"

namespace proda {

enum class LabelMode { FixedBoilerplate, Dynamic };
enum class LabelForm { Hard, Soft };
enum class ProtoInit { TargetPseudo, SourceTruth };
enum class StudentInit { Resume, FreshRandom, FreshPretrained };

/// Every hyperparameter of one training stage. Member defaults follow the
/// published settings except for the learning rate and epoch count.
struct StageConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    double learning_rate = 0.1;
    double lr_decay = 0.9;  // multiplied in once per epoch
    double sgd_momentum = 0.0;

    double proto_momentum = 0.9999;
    double ema_decay = 0.999;
    double tau = 1.0;
    LossWeights weights;
    double label_threshold = 0.0;  // rectified-label selection threshold
    double kd_threshold = 0.95;    // teacher hard-label threshold in distillation

    bool denoise = true;           // false: omega forced uniform
    LabelMode label_mode = LabelMode::FixedBoilerplate;
    LabelForm label_form = LabelForm::Hard;
    ProtoInit proto_init = ProtoInit::TargetPseudo;
    AugmentConfig augment;

    StudentInit student_init = StudentInit::FreshPretrained;
    std::size_t pretrain_epochs = 10;
    double pretrain_margin = 1.0;
    double pretrain_learning_rate = 0.05;

    // warm-up stopping rule: source accuracy range over the last
    // plateau_window epochs within plateau_tol
    std::size_t plateau_window = 3;
    double plateau_tol = 0.005;

    void validate() const;
};

/// Stage-1 settings for the toy benchmarks. A run here is about two thousand
/// iterations, so both momenta are shortened to keep the prototypes and the
/// momentum encoder in step with the features, and the consistency weight is
/// raised because feature distances are much smaller than in a deep network.
StageConfig toy_stage1_defaults();

struct ExperimentConfig {
    std::string preset = "gauss-shift";
    std::size_t n_source = 0;  // 0: preset value
    std::size_t n_target = 0;
    std::optional<double> rotation_deg;              // unset: preset value
    std::optional<double> class_std;
    std::optional<double> moon_noise;
    std::optional<std::vector<double>> target_class_freqs;
    std::optional<std::vector<double>> translation;
    std::uint64_t seed = 1;
    NetworkShape net{2, {16}, 8, 4};
    std::size_t eval_interval = 50;
    std::vector<std::string> stages{"warmup", "stage1", "distill", "distill"};
    StageConfig warmup;
    StageConfig stage1 = toy_stage1_defaults();
    StageConfig distill;

    /// Defaults with the network input and class count matched to the preset.
    static ExperimentConfig for_preset(const std::string& preset);

    DomainSpec domain() const;
    void validate() const;
};

/// Applies one `key = value` assignment (e.g. "stage1.gamma1", "10").
/// Throws FormatError on unknown keys or malformed values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Canonical sorted key = value listing of every setting.
std::map<std::string, std::string> config_entries(const ExperimentConfig& cfg);
std::string config_text(const ExperimentConfig& cfg);

struct ParsedConfig {
    ExperimentConfig base;
    /// sweep.<key> = v1,v2,... axes, in file order.
    std::vector<std::pair<std::string, std::vector<std::string>>> sweep_axes;
};

/// Parses flat key=value text. `preset` (or `data.preset`) is applied first
/// so that the preset's defaults can be overridden by later keys.
ParsedConfig parse_config(const std::string& text);
ParsedConfig load_config(const std::filesystem::path& path);

/// Cartesian product of the sweep axes; one config per grid point, the first
/// axis varying slowest.
std::vector<ExperimentConfig> expand_sweep(const ParsedConfig& parsed);

} // namespace proda
