#pragma once

#include "proda/labels.hpp"
#include "proda/tensor.hpp"

namespace proda {

/// Weights of the adaptation objectives. Defaults are the published values.
struct LossWeights {
    double alpha = 0.1;        // SCE forward CE
    double beta_sce = 1.0;     // SCE reverse CE
    double gamma1 = 10.0;      // consistency KL
    double gamma2 = 0.1;       // anti-degeneration regulariser
    double beta_kd = 1.0;      // distillation KL
    double clamp_floor = 1e-4; // floor for every log argument and for the clamped one-hot label
};

// Loss values floor every log argument at clamp_floor. Returned gradients
// are taken with respect to the logits that produced the probabilities and
// are exact derivatives of the loss wherever no probability is below the
// floor. All losses are means over their valid rows.

struct LossResult {
    double value = 0.0;
    Tensor2D grad;            // d value / d logits, same shape as the input
    std::size_t valid_rows = 0;
    bool all_ignored = false; // every row was kIgnore: value 0, zero gradient
};

/// Mean of -log p(label) over non-ignored rows.
LossResult ce_loss(const Tensor2D& probs, const Labels& labels, double clamp_floor = 1e-4);

/// Soft-target CE, -sum_k y_k log p_k. Rows of `targets` with zero mass are ignored.
LossResult ce_loss_soft(const Tensor2D& probs, const Tensor2D& targets, double clamp_floor = 1e-4);

/// alpha * CE(p, y) + beta * CE(y, p), where the reverse term clamps the
/// one-hot label into [clamp_floor, 1].
LossResult sce_loss(const Tensor2D& probs, const Labels& labels, double alpha, double beta_sce,
                    double clamp_floor = 1e-4);
LossResult sce_loss_soft(const Tensor2D& probs, const Tensor2D& targets, double alpha, double beta_sce,
                         double clamp_floor = 1e-4);

/// Mean over rows of KL(z_weak || z_strong). z_weak is a constant teacher;
/// the gradient is with respect to the logits of z_strong.
LossResult kl_consistency(const Tensor2D& z_weak, const Tensor2D& z_strong, double clamp_floor = 1e-4);

/// Mean over rows of -sum_k log p(i,k). Minimised by uniform rows.
LossResult regularizer(const Tensor2D& probs, double clamp_floor = 1e-4);

double total_stage1_loss(double source_ce, double target_sce, double kl, double reg, double gamma1,
                         double gamma2);

struct KdResult {
    double value = 0.0;
    double source_ce = 0.0;
    double target_ce = 0.0;
    double kl = 0.0;
    Tensor2D grad_source_logits;
    Tensor2D grad_target_logits;
    bool target_all_ignored = false;
};

/// CE on labelled source + CE on teacher hard labels (thresholded) +
/// beta_kd * KL(teacher || student) on every target row.
KdResult kd_loss(const Tensor2D& student_source_probs, const Labels& source_labels,
                 const Tensor2D& student_target_probs, const Tensor2D& teacher_target_probs, double threshold,
                 double beta_kd, double clamp_floor = 1e-4);

} // namespace proda
