#include "proda/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "proda/csv.hpp"
#include "proda/errors.hpp"

namespace proda {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_real(const std::string& key, const std::string& v) {
    try {
        return parse_real(v);
    } catch (const FormatError&) {
        throw FormatError(fmt::format("config: '{}' expects a number, got '{}'", key, v));
    }
}

std::size_t to_count(const std::string& key, const std::string& v) {
    const double d = to_real(key, v);
    if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d)))
        throw FormatError(fmt::format("config: '{}' expects a non-negative integer, got '{}'", key, v));
    return static_cast<std::size_t>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw FormatError(fmt::format("config: '{}' expects true/false, got '{}'", key, v));
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

template <typename Enum>
struct EnumNames {
    std::vector<std::pair<Enum, std::string>> names;

    Enum parse(const std::string& key, const std::string& v) const {
        for (const auto& [e, n] : names)
            if (n == v) return e;
        throw FormatError(fmt::format("config: '{}' has no option '{}'", key, v));
    }
    std::string name(Enum e) const {
        for (const auto& [x, n] : names)
            if (x == e) return n;
        return "?";
    }
};

const EnumNames<LabelMode> kLabelMode{{{LabelMode::FixedBoilerplate, "fixed"}, {LabelMode::Dynamic, "dynamic"}}};
const EnumNames<LabelForm> kLabelForm{{{LabelForm::Hard, "hard"}, {LabelForm::Soft, "soft"}}};
const EnumNames<ProtoInit> kProtoInit{
    {{ProtoInit::TargetPseudo, "target-pseudo"}, {ProtoInit::SourceTruth, "source-truth"}}};
const EnumNames<StudentInit> kStudentInit{{{StudentInit::Resume, "resume"},
                                           {StudentInit::FreshRandom, "fresh-random"},
                                           {StudentInit::FreshPretrained, "fresh-pretrained"}}};

struct StageField {
    const char* name;
    std::function<void(StageConfig&, const std::string& key, const std::string&)> set;
    std::function<std::string(const StageConfig&)> get;
};

#define REAL_FIELD(NAME, MEMBER)                                                                              \
    StageField {                                                                                              \
        NAME, [](StageConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_real(k, v); },   \
            [](const StageConfig& c) { return format_real(c.MEMBER); }                                        \
    }
#define COUNT_FIELD(NAME, MEMBER)                                                                             \
    StageField {                                                                                              \
        NAME, [](StageConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_count(k, v); },  \
            [](const StageConfig& c) { return std::to_string(c.MEMBER); }                                     \
    }

const std::vector<StageField>& stage_fields() {
    static const std::vector<StageField> fields = {
        COUNT_FIELD("epochs", epochs),
        COUNT_FIELD("batch_size", batch_size),
        REAL_FIELD("lr", learning_rate),
        REAL_FIELD("lr_decay", lr_decay),
        REAL_FIELD("sgd_momentum", sgd_momentum),
        REAL_FIELD("proto_momentum", proto_momentum),
        REAL_FIELD("ema_decay", ema_decay),
        REAL_FIELD("tau", tau),
        REAL_FIELD("alpha", weights.alpha),
        REAL_FIELD("beta_sce", weights.beta_sce),
        REAL_FIELD("gamma1", weights.gamma1),
        REAL_FIELD("gamma2", weights.gamma2),
        REAL_FIELD("beta_kd", weights.beta_kd),
        REAL_FIELD("clamp_floor", weights.clamp_floor),
        REAL_FIELD("label_threshold", label_threshold),
        REAL_FIELD("kd_threshold", kd_threshold),
        StageField{"denoise", [](StageConfig& c, const std::string& k, const std::string& v) { c.denoise = to_bool(k, v); },
                   [](const StageConfig& c) { return from_bool(c.denoise); }},
        StageField{"label_mode",
                   [](StageConfig& c, const std::string& k, const std::string& v) { c.label_mode = kLabelMode.parse(k, v); },
                   [](const StageConfig& c) { return kLabelMode.name(c.label_mode); }},
        StageField{"label_form",
                   [](StageConfig& c, const std::string& k, const std::string& v) { c.label_form = kLabelForm.parse(k, v); },
                   [](const StageConfig& c) { return kLabelForm.name(c.label_form); }},
        StageField{"proto_init",
                   [](StageConfig& c, const std::string& k, const std::string& v) { c.proto_init = kProtoInit.parse(k, v); },
                   [](const StageConfig& c) { return kProtoInit.name(c.proto_init); }},
        StageField{"student_init",
                   [](StageConfig& c, const std::string& k, const std::string& v) {
                       c.student_init = kStudentInit.parse(k, v);
                   },
                   [](const StageConfig& c) { return kStudentInit.name(c.student_init); }},
        REAL_FIELD("aug.weak_jitter", augment.weak_jitter_std),
        REAL_FIELD("aug.strong_jitter", augment.strong_jitter_std),
        REAL_FIELD("aug.strong_drop", augment.strong_drop_prob),
        REAL_FIELD("aug.strong_scale_lo", augment.strong_scale_lo),
        REAL_FIELD("aug.strong_scale_hi", augment.strong_scale_hi),
        COUNT_FIELD("pretrain_epochs", pretrain_epochs),
        REAL_FIELD("pretrain_margin", pretrain_margin),
        REAL_FIELD("pretrain_lr", pretrain_learning_rate),
        COUNT_FIELD("plateau_window", plateau_window),
        REAL_FIELD("plateau_tol", plateau_tol),
    };
    return fields;
}

#undef REAL_FIELD
#undef COUNT_FIELD

StageConfig* stage_by_prefix(ExperimentConfig& cfg, const std::string& prefix) {
    if (prefix == "warmup") return &cfg.warmup;
    if (prefix == "stage1") return &cfg.stage1;
    if (prefix == "distill") return &cfg.distill;
    return nullptr;
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out;
}

void apply_preset_defaults(ExperimentConfig& cfg, const std::string& preset) {
    const DomainSpec spec = domain_preset(preset);
    cfg.preset = preset;
    cfg.net.input_dim = spec.dim;
    cfg.net.class_count = spec.class_count;
}

} // namespace

void StageConfig::validate() const {
    if (batch_size == 0) throw std::invalid_argument("stage: batch_size must be positive");
    if (!(learning_rate > 0.0) || !(lr_decay > 0.0)) throw std::invalid_argument("stage: rates must be positive");
    if (sgd_momentum < 0.0 || sgd_momentum >= 1.0) throw std::invalid_argument("stage: sgd_momentum in [0,1)");
    if (!(proto_momentum >= 0.0 && proto_momentum < 1.0)) throw std::invalid_argument("stage: proto_momentum in [0,1)");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw std::invalid_argument("stage: ema_decay in [0,1)");
    if (!(tau > 0.0)) throw std::invalid_argument("stage: tau must be positive");
    const auto& w = weights;
    if (w.alpha < 0 || w.beta_sce < 0 || w.gamma1 < 0 || w.gamma2 < 0 || w.beta_kd < 0)
        throw std::invalid_argument("stage: loss weights must be non-negative");
    if (!(w.clamp_floor > 0.0 && w.clamp_floor < 1.0)) throw std::invalid_argument("stage: clamp_floor in (0,1)");
    if (label_threshold < 0.0 || label_threshold > 1.0 || kd_threshold < 0.0 || kd_threshold > 1.0)
        throw std::invalid_argument("stage: thresholds in [0,1]");
    if (!(pretrain_learning_rate > 0.0)) throw std::invalid_argument("stage: pretrain_lr must be positive");
    augment.validate();
}

StageConfig toy_stage1_defaults() {
    StageConfig c;
    c.epochs = 120;
    c.lr_decay = 0.98;
    c.proto_momentum = 0.99;
    c.ema_decay = 0.99;
    c.weights.gamma1 = 100.0;
    return c;
}

ExperimentConfig ExperimentConfig::for_preset(const std::string& preset) {
    ExperimentConfig cfg;
    apply_preset_defaults(cfg, preset);
    return cfg;
}

DomainSpec ExperimentConfig::domain() const {
    DomainSpec spec = domain_preset(preset);
    if (n_source) spec.n_source = n_source;
    if (n_target) spec.n_target = n_target;
    if (rotation_deg) spec.rotation_deg = *rotation_deg;
    if (class_std) std::fill(spec.stds.begin(), spec.stds.end(), *class_std);
    if (translation) spec.translation = *translation;
    if (moon_noise) spec.moon_noise = *moon_noise;
    if (target_class_freqs) spec.target_class_freqs = *target_class_freqs;
    spec.seed = seed;
    return spec;
}

void ExperimentConfig::validate() const {
    const DomainSpec spec = domain();
    spec.validate();
    if (net.input_dim != spec.dim || net.class_count != spec.class_count)
        throw std::invalid_argument("config: network shape does not match the dataset");
    if (net.feature_dim == 0) throw std::invalid_argument("config: feature_dim must be positive");
    if (eval_interval == 0) throw std::invalid_argument("config: eval_interval must be positive");
    for (const auto& s : stages)
        if (s != "warmup" && s != "stage1" && s != "distill")
            throw std::invalid_argument("config: unknown stage '" + s + "'");
    warmup.validate();
    stage1.validate();
    distill.validate();
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "preset" || key == "data.preset") {
        apply_preset_defaults(cfg, value);
        return;
    }
    if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(to_count(key, value));
        return;
    }
    if (key == "data.n_source") {
        cfg.n_source = to_count(key, value);
        return;
    }
    if (key == "data.n_target") {
        cfg.n_target = to_count(key, value);
        return;
    }
    if (key == "data.rotation_deg") {
        cfg.rotation_deg = to_real(key, value);
        return;
    }
    if (key == "data.target_class_freqs") {
        std::vector<double> f;
        for (const auto& v : split_list(value)) f.push_back(to_real(key, v));
        cfg.target_class_freqs = std::move(f);
        return;
    }
    if (key == "data.moon_noise") {
        cfg.moon_noise = to_real(key, value);
        return;
    }
    if (key == "data.std") {
        cfg.class_std = to_real(key, value);
        return;
    }
    if (key == "data.translation") {
        std::vector<double> t;
        for (const auto& v : split_list(value)) t.push_back(to_real(key, v));
        cfg.translation = std::move(t);
        return;
    }
    if (key == "eval_interval") {
        cfg.eval_interval = to_count(key, value);
        return;
    }
    if (key == "stages") {
        cfg.stages = split_list(value);
        return;
    }
    if (key == "net.hidden") {
        cfg.net.hidden.clear();
        for (const auto& h : split_list(value)) cfg.net.hidden.push_back(to_count(key, h));
        return;
    }
    if (key == "net.feature_dim") {
        cfg.net.feature_dim = to_count(key, value);
        return;
    }
    const auto dot = key.find('.');
    if (dot != std::string::npos) {
        if (StageConfig* stage = stage_by_prefix(cfg, key.substr(0, dot))) {
            const std::string field = key.substr(dot + 1);
            for (const auto& f : stage_fields())
                if (field == f.name) {
                    f.set(*stage, key, value);
                    return;
                }
        }
    }
    throw FormatError("config: unknown key '" + key + "'");
}

std::map<std::string, std::string> config_entries(const ExperimentConfig& cfg) {
    std::map<std::string, std::string> out;
    out["preset"] = cfg.preset;
    out["seed"] = std::to_string(cfg.seed);
    out["data.n_source"] = std::to_string(cfg.n_source);
    out["data.n_target"] = std::to_string(cfg.n_target);
    if (cfg.rotation_deg) out["data.rotation_deg"] = format_real(*cfg.rotation_deg);
    if (cfg.class_std) out["data.std"] = format_real(*cfg.class_std);
    if (cfg.moon_noise) out["data.moon_noise"] = format_real(*cfg.moon_noise);
    if (cfg.target_class_freqs) {
        std::vector<std::string> f;
        for (double v : *cfg.target_class_freqs) f.push_back(format_real(v));
        out["data.target_class_freqs"] = join(f);
    }
    if (cfg.translation) {
        std::vector<std::string> t;
        for (double v : *cfg.translation) t.push_back(format_real(v));
        out["data.translation"] = join(t);
    }
    out["eval_interval"] = std::to_string(cfg.eval_interval);
    out["stages"] = join(cfg.stages);
    std::vector<std::string> hidden;
    for (auto h : cfg.net.hidden) hidden.push_back(std::to_string(h));
    out["net.hidden"] = join(hidden);
    out["net.feature_dim"] = std::to_string(cfg.net.feature_dim);
    const std::pair<const char*, const StageConfig*> stages[] = {
        {"warmup", &cfg.warmup}, {"stage1", &cfg.stage1}, {"distill", &cfg.distill}};
    for (const auto& [prefix, stage] : stages)
        for (const auto& f : stage_fields()) out[fmt::format("{}.{}", prefix, f.name)] = f.get(*stage);
    return out;
}

std::string config_text(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
    return out;
}

ParsedConfig parse_config(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> assignments;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError(fmt::format("config line {}: expected key = value", lineno));
        assignments.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }

    ParsedConfig parsed;
    // The preset resets shape defaults, so it goes first.
    for (const auto& [k, v] : assignments)
        if (k == "preset" || k == "data.preset") set_config_value(parsed.base, k, v);
    for (const auto& [k, v] : assignments) {
        if (k == "preset" || k == "data.preset") continue;
        if (k.rfind("sweep.", 0) == 0) {
            const std::string target = k.substr(6);
            auto values = split_list(v);
            if (values.empty()) throw FormatError("config: empty sweep axis '" + target + "'");
            ExperimentConfig probe = parsed.base;
            for (const auto& val : values) set_config_value(probe, target, val);
            parsed.sweep_axes.emplace_back(target, std::move(values));
            continue;
        }
        set_config_value(parsed.base, k, v);
    }
    return parsed;
}

ParsedConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot read config " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

std::vector<ExperimentConfig> expand_sweep(const ParsedConfig& parsed) {
    std::vector<ExperimentConfig> out{parsed.base};
    for (const auto& [key, values] : parsed.sweep_axes) {
        std::vector<ExperimentConfig> next;
        for (const auto& cfg : out)
            for (const auto& v : values) {
                ExperimentConfig c = cfg;
                set_config_value(c, key, v);
                next.push_back(std::move(c));
            }
        out = std::move(next);
    }
    return out;
}

} // namespace proda
