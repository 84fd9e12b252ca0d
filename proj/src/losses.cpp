#include "proda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "proda/denoiser.hpp"
#include "proda/errors.hpp"

namespace proda {

namespace {

double flog(double p, double floor) { return std::log(std::max(p, floor)); }

void check_labels(const Tensor2D& probs, const Labels& labels) {
    if (labels.size() != probs.rows())
        throw DimensionError(fmt::format("loss: {} labels for {} rows", labels.size(), probs.rows()));
    for (Label y : labels)
        if (y != kIgnore && (y < 0 || static_cast<std::size_t>(y) >= probs.cols()))
            throw std::out_of_range(fmt::format("loss: label {} outside [0,{})", y, probs.cols()));
}

Tensor2D one_hot(const Labels& labels, std::size_t k) {
    Tensor2D t(labels.size(), k);
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != kIgnore) t(i, static_cast<std::size_t>(labels[i])) = 1.0;
    return t;
}

double row_mass(std::span<const double> r) {
    double s = 0.0;
    for (double v : r) s += v;
    return s;
}

} // namespace

LossResult ce_loss(const Tensor2D& probs, const Labels& labels, double clamp_floor) {
    check_labels(probs, labels);
    return ce_loss_soft(probs, one_hot(labels, probs.cols()), clamp_floor);
}

LossResult ce_loss_soft(const Tensor2D& probs, const Tensor2D& targets, double clamp_floor) {
    require_shape(targets, probs.rows(), probs.cols(), "ce_loss");
    LossResult r;
    r.grad = Tensor2D(probs.rows(), probs.cols());
    for (std::size_t i = 0; i < probs.rows(); ++i)
        if (row_mass(targets.row(i)) > 0.0) ++r.valid_rows;
    if (r.valid_rows == 0) {
        r.all_ignored = true;
        return r;
    }
    const double inv = 1.0 / static_cast<double>(r.valid_rows);
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        auto y = targets.row(i);
        const double mass = row_mass(y);
        if (!(mass > 0.0)) continue;
        auto p = probs.row(i);
        auto g = r.grad.row(i);
        for (std::size_t k = 0; k < p.size(); ++k) {
            if (y[k] != 0.0) r.value -= y[k] * flog(p[k], clamp_floor) * inv;
            g[k] = (p[k] * mass - y[k]) * inv;
        }
    }
    return r;
}

LossResult sce_loss(const Tensor2D& probs, const Labels& labels, double alpha, double beta_sce,
                    double clamp_floor) {
    check_labels(probs, labels);
    return sce_loss_soft(probs, one_hot(labels, probs.cols()), alpha, beta_sce, clamp_floor);
}

LossResult sce_loss_soft(const Tensor2D& probs, const Tensor2D& targets, double alpha, double beta_sce,
                         double clamp_floor) {
    if (alpha < 0.0 || beta_sce < 0.0) throw std::invalid_argument("sce_loss: negative coefficient");
    LossResult fwd = ce_loss_soft(probs, targets, clamp_floor);
    LossResult r;
    r.valid_rows = fwd.valid_rows;
    r.all_ignored = fwd.all_ignored;
    r.grad = Tensor2D(probs.rows(), probs.cols());
    if (r.all_ignored) return r;

    // Reverse CE: -sum_k p_k log(clamp(y_k)), gradient on p is -log(clamp(y_k)).
    const double inv = 1.0 / static_cast<double>(r.valid_rows);
    double rce = 0.0;
    Tensor2D grad_p(probs.rows(), probs.cols());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        auto y = targets.row(i);
        if (!(row_mass(y) > 0.0)) continue;
        auto p = probs.row(i);
        auto gp = grad_p.row(i);
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double logy = std::log(std::clamp(y[k], clamp_floor, 1.0));
            rce -= p[k] * logy * inv;
            gp[k] = -logy * inv;
        }
    }
    const Tensor2D grad_rce = softmax_backward(probs, grad_p);
    r.value = alpha * fwd.value + beta_sce * rce;
    for (std::size_t i = 0; i < r.grad.size(); ++i)
        r.grad.values()[i] = alpha * fwd.grad.values()[i] + beta_sce * grad_rce.values()[i];
    return r;
}

LossResult kl_consistency(const Tensor2D& z_weak, const Tensor2D& z_strong, double clamp_floor) {
    require_shape(z_strong, z_weak.rows(), z_weak.cols(), "kl_consistency");
    LossResult r;
    r.grad = Tensor2D(z_weak.rows(), z_weak.cols());
    r.valid_rows = z_weak.rows();
    if (z_weak.rows() == 0) return r;
    const double inv = 1.0 / static_cast<double>(z_weak.rows());
    for (std::size_t i = 0; i < z_weak.rows(); ++i) {
        auto w = z_weak.row(i);
        auto s = z_strong.row(i);
        auto g = r.grad.row(i);
        const double mass = row_mass(w);
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (w[k] > 0.0) r.value += w[k] * (std::log(w[k]) - flog(s[k], clamp_floor)) * inv;
            g[k] = (s[k] * mass - w[k]) * inv;
        }
    }
    return r;
}

LossResult regularizer(const Tensor2D& probs, double clamp_floor) {
    LossResult r;
    r.grad = Tensor2D(probs.rows(), probs.cols());
    r.valid_rows = probs.rows();
    if (probs.rows() == 0) return r;
    const double inv = 1.0 / static_cast<double>(probs.rows());
    const double kk = static_cast<double>(probs.cols());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        auto p = probs.row(i);
        auto g = r.grad.row(i);
        for (std::size_t k = 0; k < p.size(); ++k) {
            r.value -= flog(p[k], clamp_floor) * inv;
            g[k] = (kk * p[k] - 1.0) * inv;
        }
    }
    return r;
}

double total_stage1_loss(double source_ce, double target_sce, double kl, double reg, double gamma1,
                         double gamma2) {
    return source_ce + target_sce + gamma1 * kl + gamma2 * reg;
}

KdResult kd_loss(const Tensor2D& student_source_probs, const Labels& source_labels,
                 const Tensor2D& student_target_probs, const Tensor2D& teacher_target_probs, double threshold,
                 double beta_kd, double clamp_floor) {
    if (beta_kd < 0.0) throw std::invalid_argument("kd_loss: negative beta_kd");
    KdResult r;
    const LossResult src = ce_loss(student_source_probs, source_labels, clamp_floor);
    const LossResult tgt = ce_loss(student_target_probs, hard_label(teacher_target_probs, threshold), clamp_floor);
    const LossResult kl = kl_consistency(teacher_target_probs, student_target_probs, clamp_floor);
    r.source_ce = src.value;
    r.target_ce = tgt.value;
    r.kl = kl.value;
    r.target_all_ignored = tgt.all_ignored;
    r.value = src.value + tgt.value + beta_kd * kl.value;
    r.grad_source_logits = src.grad;
    r.grad_target_logits = tgt.grad;
    for (std::size_t i = 0; i < r.grad_target_logits.size(); ++i)
        r.grad_target_logits.values()[i] += beta_kd * kl.grad.values()[i];
    return r;
}

} // namespace proda
