#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace proda {

/// Dense row-major matrix of doubles. Carries features, logits and
/// probabilities for a batch (one row per sample).
class Tensor2D {
public:
    Tensor2D() = default;
    Tensor2D(std::size_t rows, std::size_t cols, double fill = 0.0);
    Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data);
    Tensor2D(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    void fill(double v);
    bool all_finite() const noexcept;

    /// Rows selected by index, in the given order.
    Tensor2D gather_rows(std::span<const std::size_t> indices) const;

    bool operator==(const Tensor2D&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Throws DimensionError unless `t` has the given shape.
void require_shape(const Tensor2D& t, std::size_t rows, std::size_t cols, const char* what);

std::string shape_str(const Tensor2D& t);

/// Row-wise softmax with max-subtraction; finite for |logit| up to ~1e300.
Tensor2D softmax_rows(const Tensor2D& logits);

/// Pulls an upstream gradient on softmax outputs back to the logits:
/// dz_j = p_j * (g_j - sum_k p_k g_k), row by row.
Tensor2D softmax_backward(const Tensor2D& probs, const Tensor2D& grad_probs);

} // namespace proda
