#include "proda/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "proda/csv.hpp"
#include "proda/errors.hpp"
#include "proda/losses.hpp"
#include "proda/plots.hpp"
#include "proda/rng.hpp"
#include "proda/structure.hpp"

namespace proda {

namespace {

// Stream tags for the per-stage generators.
constexpr std::uint64_t kTagInit = 0x1001;
constexpr std::uint64_t kTagWarmup = 0x2001;
constexpr std::uint64_t kTagStage1 = 0x3001;
constexpr std::uint64_t kTagDistill = 0x4001;
constexpr std::uint64_t kTagPretrain = 0x5001;
constexpr std::uint64_t kTagStudent = 0x6001;

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(p.begin(), p.end(), rng);
    return p;
}

/// Cycles through the labelled source set in reshuffled passes.
class SourceSampler {
public:
    SourceSampler(const LabeledSet& set, std::uint64_t seed) : set_(&set), seed_(seed) { reshuffle(); }

    LabeledSet next(std::size_t batch) {
        std::vector<std::size_t> ids;
        while (ids.size() < batch) {
            if (pos_ == perm_.size()) reshuffle();
            ids.push_back(perm_[pos_++]);
        }
        LabeledSet out{set_->x.gather_rows(ids), Labels(ids.size())};
        for (std::size_t i = 0; i < ids.size(); ++i) out.y[i] = set_->y[ids[i]];
        return out;
    }

private:
    void reshuffle() {
        perm_ = shuffled(set_->x.rows(), stream_seed(seed_, pass_++));
        pos_ = 0;
    }

    const LabeledSet* set_;
    std::uint64_t seed_;
    std::uint64_t pass_ = 0;
    std::vector<std::size_t> perm_;
    std::size_t pos_ = 0;
};

void check_finite(double v, const std::string& stage, std::size_t iter) {
    if (!std::isfinite(v)) throw TrainingAborted(fmt::format("{}: non-finite loss at iteration {}", stage, iter));
}

/// Interval loss means, evaluation snapshots and peak/drawdown tracking.
class StageTracker {
public:
    StageTracker(std::string stage, RunContext& ctx) : stage_(std::move(stage)), ctx_(&ctx) {}

    void record(const LossRow& l) {
        ctx_->log->add(l);
        acc_.ce_s += l.ce_s;
        acc_.sce_t += l.sce_t;
        acc_.kl += l.kl;
        acc_.reg += l.reg;
        acc_.kd += l.kd;
        acc_.total += l.total;
        ++count_;
    }

    bool due(std::size_t iter) const { return iter % ctx_->eval_interval == 0; }

    void snapshot(std::size_t iter, const Network& net, const Labels* pseudo = nullptr,
                  const PrototypeBank* bank = nullptr, const EmaEncoder* ema = nullptr) {
        if (iter == last_snapshot_) return;
        last_snapshot_ = iter;
        MetricsRow row;
        row.iter = iter;
        row.stage = stage_;
        if (count_) {
            const double n = static_cast<double>(count_);
            row.ce_s = acc_.ce_s / n;
            row.sce_t = acc_.sce_t / n;
            row.kl = acc_.kl / n;
            row.reg = acc_.reg / n;
            row.kd = acc_.kd / n;
            row.total = acc_.total / n;
        }
        acc_ = {};
        count_ = 0;
        const auto& ev = ctx_->evaluator;
        row.source_acc = ev.source_accuracy(net);
        const auto tgt = ev.target(net);
        row.target_acc = tgt.accuracy;
        row.target_miou = tgt.miou;
        if (pseudo) {
            const auto pq = ev.pseudo_labels(*pseudo);
            row.pseudo_acc = pq.accuracy;
            row.pseudo_miou = pq.miou;
        }
        if (bank && ema) row.proto_drift = ev.prototype_drift(*bank, *ema);

        peak_ = std::max(peak_, row.target_acc);
        drawdown_ = std::max(drawdown_, peak_ - row.target_acc);
        summary_.source_acc = row.source_acc;
        summary_.target_acc = row.target_acc;
        summary_.target_miou = row.target_miou;
        summary_.pseudo_acc = row.pseudo_acc;
        ctx_->log->add(std::move(row));
    }

    StageSummary finish(std::size_t iterations) {
        summary_.stage = stage_;
        summary_.iterations = iterations;
        summary_.peak_target_acc = peak_;
        summary_.max_drawdown = drawdown_;
        return summary_;
    }

    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
    RunContext* ctx_;
    LossRow acc_;
    std::size_t count_ = 0;
    std::size_t last_snapshot_ = static_cast<std::size_t>(-1);
    double peak_ = 0.0;
    double drawdown_ = 0.0;
    StageSummary summary_;
};

Tensor2D uniform_rows(std::size_t n, std::size_t k) { return Tensor2D(n, k, 1.0 / static_cast<double>(k)); }

/// Labels the stage-1 procedure would assign to every target sample now.
Labels current_pseudo_labels(const Stage1State& s, const StageConfig& cfg, const Tensor2D& target) {
    const std::size_t k = s.bank.class_count();
    const Tensor2D omega = cfg.denoise ? modulation_weights(s.bank.distances(s.ema.forward(target)), cfg.tau)
                                       : uniform_rows(target.rows(), k);
    const Tensor2D base =
        cfg.label_mode == LabelMode::FixedBoilerplate ? s.store.boilerplate() : s.net.forward(target).probs;
    return rectify_labels(base, omega, cfg.label_threshold);
}

std::size_t batches_per_epoch(std::size_t n, std::size_t batch) { return (n + batch - 1) / batch; }

std::span<const std::size_t> batch_ids(const std::vector<std::size_t>& perm, std::size_t b, std::size_t batch) {
    const std::size_t lo = b * batch;
    const std::size_t hi = std::min(perm.size(), lo + batch);
    return {perm.data() + lo, hi - lo};
}

std::string hex(const unsigned char* d, unsigned n) {
    std::string s;
    for (unsigned i = 0; i < n; ++i) s += fmt::format("{:02x}", d[i]);
    return s;
}

nlohmann::json summary_json(const StageSummary& s) {
    return {{"stage", s.stage},         {"ok", s.ok},
            {"error", s.error},         {"iterations", s.iterations},
            {"source_acc", s.source_acc}, {"target_acc", s.target_acc},
            {"target_miou", s.target_miou}, {"pseudo_acc", s.pseudo_acc},
            {"peak_target_acc", s.peak_target_acc}, {"max_drawdown", s.max_drawdown}};
}

void write_features_csv(const std::filesystem::path& path, const Tensor2D& features, const Labels& labels) {
    std::vector<std::string> header;
    for (std::size_t d = 0; d < features.cols(); ++d) header.push_back(fmt::format("f{}", d));
    header.emplace_back("y");
    CsvWriter w(path, header);
    for (std::size_t i = 0; i < features.rows(); ++i) {
        std::vector<std::string> row;
        for (double v : features.row(i)) row.push_back(format_real(v));
        row.push_back(std::to_string(labels[i]));
        w.row(row);
    }
}

void write_prototypes_csv(const std::filesystem::path& path, const PrototypeBank& bank) {
    std::vector<std::string> header{"class"};
    for (std::size_t d = 0; d < bank.feature_dim(); ++d) header.push_back(fmt::format("f{}", d));
    CsvWriter w(path, header);
    for (std::size_t k = 0; k < bank.class_count(); ++k) {
        if (!bank.seen()[k]) continue;
        std::vector<std::string> row{std::to_string(k)};
        for (double v : bank.centroids().row(k)) row.push_back(format_real(v));
        w.row(row);
    }
}

} // namespace

void MetricsLog::write_metrics_csv(const std::filesystem::path& path) const {
    CsvWriter w(path, {"iter", "stage", "ce_s", "sce_t", "kl", "reg", "kd", "total", "source_acc", "target_acc",
                       "target_miou", "pseudo_acc", "pseudo_miou", "proto_drift"});
    auto f = [](double v) { return fmt::format("{:.6f}", v); };
    for (const auto& r : rows_)
        w.row({std::to_string(r.iter), r.stage, f(r.ce_s), f(r.sce_t), f(r.kl), f(r.reg), f(r.kd), f(r.total),
               f(r.source_acc), f(r.target_acc), f(r.target_miou), f(r.pseudo_acc), f(r.pseudo_miou),
               f(r.proto_drift)});
}

void MetricsLog::write_losses_csv(const std::filesystem::path& path) const {
    CsvWriter w(path, {"iter", "stage", "ce_s", "sce_t", "kl", "reg", "kd", "total"});
    auto f = [](double v) { return fmt::format("{:.6f}", v); };
    for (const auto& r : losses_)
        w.row({std::to_string(r.iter), r.stage, f(r.ce_s), f(r.sce_t), f(r.kl), f(r.reg), f(r.kd), f(r.total)});
}

StageSummary warmup(Network& net, const StageConfig& cfg, RunContext& ctx) {
    cfg.validate();
    const auto& source = ctx.data->source;
    StageTracker tracker("warmup", ctx);
    Sgd sgd(cfg.sgd_momentum);
    const std::size_t per_epoch = batches_per_epoch(source.x.rows(), cfg.batch_size);
    std::vector<double> history;
    std::size_t iter = 0;
    tracker.snapshot(0, net);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.learning_rate * std::pow(cfg.lr_decay, static_cast<double>(epoch));
        const auto perm = shuffled(source.x.rows(), stream_seed(ctx.seed, kTagWarmup, epoch));
        for (std::size_t b = 0; b < per_epoch; ++b) {
            const auto ids = batch_ids(perm, b, cfg.batch_size);
            const Tensor2D x = source.x.gather_rows(ids);
            Labels y(ids.size());
            for (std::size_t i = 0; i < ids.size(); ++i) y[i] = source.y[ids[i]];
            ForwardTrace trace;
            const auto fwd = net.forward(x, trace);
            const LossResult ce = ce_loss(fwd.probs, y, cfg.weights.clamp_floor);
            check_finite(ce.value, "warmup", iter);
            sgd.step(net, net.backward(trace, ce.grad), lr);
            ++iter;
            tracker.record({iter, "warmup", ce.value, 0, 0, 0, 0, ce.value});
            if (tracker.due(iter)) tracker.snapshot(iter, net);
        }
        history.push_back(ctx.evaluator.source_accuracy(net));
        if (cfg.plateau_window > 0 && history.size() >= cfg.plateau_window) {
            const auto first = history.end() - static_cast<std::ptrdiff_t>(cfg.plateau_window);
            const auto [lo, hi] = std::minmax_element(first, history.end());
            if (*hi - *lo <= cfg.plateau_tol) break;
        }
    }
    tracker.snapshot(iter, net);
    return tracker.finish(iter);
}

PseudoLabelStore generate_boilerplate(const Network& net, const Tensor2D& target) {
    return PseudoLabelStore(net.forward(target).probs);
}

Stage1State prepare_stage1(const Network& warmed, const StageConfig& cfg, const DomainData& data) {
    cfg.validate();
    Stage1State s;
    s.net = warmed;
    s.store = generate_boilerplate(warmed, data.target);
    const std::size_t k = warmed.shape().class_count;
    if (cfg.proto_init == ProtoInit::TargetPseudo)
        s.bank = init_prototypes(warmed.features(data.target), hard_label(s.store.boilerplate()), k,
                                 cfg.proto_momentum);
    else
        s.bank = init_prototypes(warmed.features(data.source.x), data.source.y, k, cfg.proto_momentum);
    if (!s.bank.any_seen()) throw TrainingAborted("stage1: degenerate prototype bank");
    s.ema = EmaEncoder(warmed, cfg.ema_decay);
    return s;
}

StageSummary run_stage1(Stage1State& s, const StageConfig& cfg, RunContext& ctx) {
    cfg.validate();
    const Tensor2D& target = ctx.data->target;
    const std::size_t k = s.net.shape().class_count;
    const double floor = cfg.weights.clamp_floor;
    StageTracker tracker("stage1", ctx);
    SourceSampler source(ctx.data->source, stream_seed(ctx.seed, kTagStage1, 1));
    Sgd sgd(cfg.sgd_momentum);
    const std::size_t per_epoch = batches_per_epoch(target.rows(), cfg.batch_size);
    const bool structure = cfg.weights.gamma1 > 0.0 || cfg.weights.gamma2 > 0.0;

    auto snapshot = [&](std::size_t iter) {
        const Labels pseudo = current_pseudo_labels(s, cfg, target);
        tracker.snapshot(iter, s.net, &pseudo, &s.bank, &s.ema);
    };
    snapshot(0);

    std::size_t iter = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.learning_rate * std::pow(cfg.lr_decay, static_cast<double>(epoch));
        const auto perm = shuffled(target.rows(), stream_seed(ctx.seed, kTagStage1, 2, epoch));
        for (std::size_t b = 0; b < per_epoch; ++b) {
            const auto ids = batch_ids(perm, b, cfg.batch_size);
            const AugmentKey key{stream_seed(ctx.seed, kTagStage1, 3), iter};
            LossRow losses{iter + 1, "stage1"};
            Gradients grads = s.net.params().zeros_like();

            // Source CE.
            const LabeledSet src = source.next(cfg.batch_size);
            ForwardTrace src_trace;
            const auto src_fwd = s.net.forward(src.x, src_trace);
            const LossResult ce = ce_loss(src_fwd.probs, src.y, floor);
            accumulate(grads, s.net.backward(src_trace, ce.grad));
            losses.ce_s = ce.value;

            // Denoising weights from the momentum encoder, then the rectified labels.
            const Tensor2D x = target.gather_rows(ids);
            const Tensor2D weak = augment(x, ids, cfg.augment, AugmentMode::Weak, key);
            const Tensor2D ema_features = s.ema.forward(weak);
            const Tensor2D omega = cfg.denoise ? modulation_weights(s.bank.distances(ema_features), cfg.tau)
                                               : uniform_rows(ids.size(), k);
            ForwardTrace tgt_trace;
            const auto tgt_fwd = s.net.forward(weak, tgt_trace);
            const Tensor2D base = cfg.label_mode == LabelMode::FixedBoilerplate
                                      ? s.store.boilerplate().gather_rows(ids)
                                      : tgt_fwd.probs;
            const Labels labels = rectify_labels(base, omega, cfg.label_threshold);
            if (cfg.label_mode == LabelMode::FixedBoilerplate) s.store.rectify(ids, omega, cfg.label_threshold);

            // Target SCE.
            LossResult sce;
            if (cfg.label_form == LabelForm::Hard) {
                sce = sce_loss(tgt_fwd.probs, labels, cfg.weights.alpha, cfg.weights.beta_sce, floor);
            } else {
                Tensor2D soft = weighted_labels(base, omega);
                for (std::size_t i = 0; i < labels.size(); ++i)
                    if (labels[i] == kIgnore) std::fill(soft.row(i).begin(), soft.row(i).end(), 0.0);
                sce = sce_loss_soft(tgt_fwd.probs, soft, cfg.weights.alpha, cfg.weights.beta_sce, floor);
            }
            if (!sce.all_ignored) accumulate(grads, s.net.backward(tgt_trace, sce.grad));
            losses.sce_t = sce.value;

            // Structure learning: consistency between views plus the regulariser.
            if (structure) {
                const Tensor2D strong = augment(x, ids, cfg.augment, AugmentMode::Strong, key);
                Tensor2D grad_features;
                ForwardTrace trace;
                Tensor2D strong_probs;
                if (cfg.weights.gamma1 > 0.0) {
                    ConsistencyOutput cons = consistency_from_views(ema_features, strong, s.net, s.bank, cfg.tau, floor);
                    losses.kl = cons.loss;
                    grad_features = std::move(cons.grad_features);
                    for (double& v : grad_features.values()) v *= cfg.weights.gamma1;
                    trace = std::move(cons.trace);
                    strong_probs = std::move(cons.strong.probs);
                } else {
                    strong_probs = s.net.forward(strong, trace).probs;
                }
                const LossResult reg = regularizer(strong_probs, floor);
                losses.reg = reg.value;
                Tensor2D grad_logits = reg.grad;
                for (double& v : grad_logits.values()) v *= cfg.weights.gamma2;
                accumulate(grads, s.net.backward(trace, grad_logits, grad_features));
            }
            losses.total =
                total_stage1_loss(losses.ce_s, losses.sce_t, losses.kl, losses.reg, cfg.weights.gamma1, cfg.weights.gamma2);
            check_finite(losses.total, "stage1", iter);

            sgd.step(s.net, grads, lr);
            s.bank.ema_update(batch_centroids(ema_features, labels, k));
            if (!s.bank.any_seen()) throw TrainingAborted("stage1: degenerate prototype bank");
            s.ema.update(s.net, cfg.ema_decay);

            ++iter;
            tracker.record(losses);
            if (tracker.due(iter)) snapshot(iter);
        }
    }
    snapshot(iter);
    return tracker.finish(iter);
}

Network pretrain_encoder(const NetworkShape& shape, const Tensor2D& target, const StageConfig& cfg,
                         std::uint64_t seed) {
    Network net(shape, stream_seed(seed, kTagPretrain, 0));
    Sgd sgd(cfg.sgd_momentum);
    AugmentConfig jitter;
    jitter.weak_jitter_std = cfg.augment.strong_jitter_std;
    const std::size_t per_epoch = batches_per_epoch(target.rows(), cfg.batch_size);
    const double margin = cfg.pretrain_margin;
    std::size_t iter = 0;
    for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        const double lr = cfg.pretrain_learning_rate * std::pow(cfg.lr_decay, static_cast<double>(epoch));
        const auto perm = shuffled(target.rows(), stream_seed(seed, kTagPretrain, 1, epoch));
        for (std::size_t b = 0; b < per_epoch; ++b, ++iter) {
            const auto ids = batch_ids(perm, b, cfg.batch_size);
            const std::size_t n = ids.size();
            if (n < 2) continue;
            const Tensor2D x = target.gather_rows(ids);
            const Tensor2D va = augment(x, ids, jitter, AugmentMode::Weak, {stream_seed(seed, kTagPretrain, 2), iter});
            const Tensor2D vb = augment(x, ids, jitter, AugmentMode::Weak, {stream_seed(seed, kTagPretrain, 3), iter});
            ForwardTrace ta, tb;
            const Tensor2D a = net.forward(va, ta).features;
            const Tensor2D fb = net.forward(vb, tb).features;
            Tensor2D ga(n, a.cols()), gb(n, a.cols());
            const double scale = 1.0 / static_cast<double>(n * (n - 1));
            auto sqdist = [](std::span<const double> u, std::span<const double> v) {
                double s = 0.0;
                for (std::size_t d = 0; d < u.size(); ++d) s += (u[d] - v[d]) * (u[d] - v[d]);
                return s;
            };
            double loss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double pos = sqdist(a.row(i), fb.row(i));
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const double hinge = margin + pos - sqdist(a.row(i), fb.row(j));
                    if (hinge <= 0.0) continue;
                    loss += hinge * scale;
                    for (std::size_t d = 0; d < a.cols(); ++d) {
                        ga(i, d) += scale * 2.0 * (fb(j, d) - fb(i, d));
                        gb(i, d) -= scale * 2.0 * (a(i, d) - fb(i, d));
                        gb(j, d) += scale * 2.0 * (a(i, d) - fb(j, d));
                    }
                }
            }
            check_finite(loss, "pretrain", iter);
            Gradients g = net.backward(ta, {}, ga);
            accumulate(g, net.backward(tb, {}, gb));
            sgd.step(net, g, lr);
        }
    }
    return net;
}

Network init_student(const Network& teacher, const StageConfig& cfg, const Tensor2D& target, std::uint64_t seed) {
    switch (cfg.student_init) {
    case StudentInit::Resume:
        return teacher;
    case StudentInit::FreshRandom:
        return Network(teacher.shape(), stream_seed(seed, kTagStudent));
    case StudentInit::FreshPretrained:
        break;
    }
    Network pretrained = pretrain_encoder(teacher.shape(), target, cfg, seed);
    Network student(teacher.shape(), stream_seed(seed, kTagStudent));
    student.set_encoder(pretrained.params().encoder);
    return student;
}

StageSummary run_distill_stage(const Network& teacher, Network& student, const StageConfig& cfg, RunContext& ctx,
                               const std::string& stage_name) {
    cfg.validate();
    if (teacher.shape() != student.shape()) throw DimensionError("distill: teacher and student shapes differ");
    const Tensor2D& target = ctx.data->target;
    const double floor = cfg.weights.clamp_floor;
    const Tensor2D teacher_probs = teacher.forward(target).probs;
    const Labels teacher_labels = hard_label(teacher_probs, cfg.kd_threshold);
    const std::uint64_t tag = stream_seed(kTagDistill, std::hash<std::string>{}(stage_name));

    StageTracker tracker(stage_name, ctx);
    SourceSampler source(ctx.data->source, stream_seed(ctx.seed, tag, 1));
    Sgd sgd(cfg.sgd_momentum);
    const std::size_t per_epoch = batches_per_epoch(target.rows(), cfg.batch_size);
    std::size_t iter = 0;
    tracker.snapshot(0, student, &teacher_labels);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.learning_rate * std::pow(cfg.lr_decay, static_cast<double>(epoch));
        const auto perm = shuffled(target.rows(), stream_seed(ctx.seed, tag, 2, epoch));
        for (std::size_t b = 0; b < per_epoch; ++b) {
            const auto ids = batch_ids(perm, b, cfg.batch_size);
            const LabeledSet src = source.next(cfg.batch_size);
            ForwardTrace ts, tt;
            const auto fs = student.forward(src.x, ts);
            const auto ft = student.forward(target.gather_rows(ids), tt);
            const KdResult kd = kd_loss(fs.probs, src.y, ft.probs, teacher_probs.gather_rows(ids), cfg.kd_threshold,
                                        cfg.weights.beta_kd, floor);
            check_finite(kd.value, stage_name, iter);
            Gradients g = student.backward(ts, kd.grad_source_logits);
            accumulate(g, student.backward(tt, kd.grad_target_logits));
            sgd.step(student, g, lr);
            ++iter;
            tracker.record({iter, stage_name, kd.source_ce, kd.target_ce, 0, 0, kd.kl, kd.value});
            if (tracker.due(iter)) tracker.snapshot(iter, student, &teacher_labels);
        }
    }
    tracker.snapshot(iter, student, &teacher_labels);
    return tracker.finish(iter);
}

void apply_ablation(StageConfig& cfg, Ablation a) {
    switch (a) {
    case Ablation::Vanilla:
        cfg.denoise = false;
        cfg.weights.alpha = 1.0;
        cfg.weights.beta_sce = 0.0;
        cfg.weights.gamma1 = 0.0;
        cfg.weights.gamma2 = 0.0;
        break;
    case Ablation::DenoiseOnly:
        cfg.denoise = true;
        cfg.weights.gamma1 = 0.0;
        cfg.weights.gamma2 = 0.0;
        break;
    case Ablation::StructureOnly:
        cfg.denoise = false;
        break;
    case Ablation::Full:
        cfg.denoise = true;
        break;
    }
}

Ablation parse_ablation(const std::string& name) {
    if (name == "vanilla") return Ablation::Vanilla;
    if (name == "denoise-only") return Ablation::DenoiseOnly;
    if (name == "structure-only") return Ablation::StructureOnly;
    if (name == "full") return Ablation::Full;
    throw std::invalid_argument("unknown ablation '" + name + "'");
}

std::string RunManifest::to_json() const {
    nlohmann::json j;
    j["config"] = config_text;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["baseline_target_acc"] = baseline_target_acc;
    auto arr = nlohmann::json::array();
    for (const auto& s : stages) arr.push_back(summary_json(s));
    j["stages"] = arr;
    j["failed_stage"] = failed_stage ? nlohmann::json(*failed_stage) : nlohmann::json(nullptr);
    j["failure"] = failure;
    j["wall_clock_seconds"] = wall_clock_seconds;
    return j.dump(2);
}

std::string git_blob_hash(const std::string& content) {
    const std::string blob = fmt::format("blob {}", content.size()) + std::string(1, '\0') + content;
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr);
    return hex(digest, len);
}

RunResult run_experiment(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& out_dir) {
    const auto started = std::chrono::steady_clock::now();
    cfg.validate();
    RunResult result;
    RunManifest& m = result.manifest;
    m.config_text = config_text(cfg);
    m.config_hash = git_blob_hash(m.config_text);
    m.seed = cfg.seed;

    const DomainData data = generate(cfg.domain());
    RunContext ctx(data, result.log, cfg.eval_interval, cfg.seed);
    Network net(cfg.net, stream_seed(cfg.seed, kTagInit));
    m.baseline_target_acc = ctx.evaluator.target(net).accuracy;

    std::optional<Stage1State> stage1;
    std::size_t distill_count = 0;
    for (const auto& stage : cfg.stages) {
        StageSummary summary;
        std::string label = stage;
        try {
            if (stage == "warmup") {
                summary = warmup(net, cfg.warmup, ctx);
                m.baseline_target_acc = summary.target_acc;
            } else if (stage == "stage1") {
                stage1 = prepare_stage1(net, cfg.stage1, data);
                summary = run_stage1(*stage1, cfg.stage1, ctx);
                net = stage1->net;
            } else {
                label = fmt::format("distill{}", ++distill_count);
                Network student =
                    init_student(net, cfg.distill, data.target, stream_seed(cfg.seed, kTagStudent, distill_count));
                summary = run_distill_stage(net, student, cfg.distill, ctx, label);
                net = std::move(student);
            }
        } catch (const std::exception& e) {
            summary.stage = label;
            summary.ok = false;
            summary.error = e.what();
            m.stages.push_back(summary);
            m.failed_stage = label;
            m.failure = e.what();
            break;
        }
        m.stages.push_back(summary);
    }
    result.final_net = net;
    m.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        result.log.write_metrics_csv(*out_dir / "metrics.csv");
        result.log.write_losses_csv(*out_dir / "losses.csv");
        std::ofstream(*out_dir / "config.txt") << m.config_text;
        save_checkpoint(*out_dir / "model.ckpt", net);
        std::optional<std::filesystem::path> protos;
        std::filesystem::path features = *out_dir / "target_features.csv";
        if (stage1) {
            write_features_csv(features, stage1->ema.forward(data.target), metrics::ground_truth(data.target_truth));
            protos = *out_dir / "prototypes.csv";
            write_prototypes_csv(*protos, stage1->bank);
        } else {
            write_features_csv(features, net.features(data.target), metrics::ground_truth(data.target_truth));
        }
        emit_plots(*out_dir / "metrics.csv", features, *out_dir, protos);
        std::ofstream(*out_dir / "manifest.json") << m.to_json() << '\n';
    }
    return result;
}

std::vector<RunManifest> run_sweep(const ParsedConfig& parsed, const std::optional<std::filesystem::path>& out_dir) {
    std::vector<RunManifest> out;
    const auto grid = expand_sweep(parsed);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::optional<std::filesystem::path> dir;
        if (out_dir) dir = *out_dir / fmt::format("point_{:03}", i);
        out.push_back(run_experiment(grid[i], dir).manifest);
    }
    return out;
}

} // namespace proda
