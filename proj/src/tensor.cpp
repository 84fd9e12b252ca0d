#include "proda/tensor.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "proda/errors.hpp"

namespace proda {

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw DimensionError(fmt::format("Tensor2D: {} values for a {}x{} shape", data_.size(), rows_, cols_));
}

Tensor2D::Tensor2D(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DimensionError("Tensor2D: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

void Tensor2D::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor2D::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor2D Tensor2D::gather_rows(std::span<const std::size_t> indices) const {
    Tensor2D out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows_) throw DimensionError("gather_rows: index out of range");
        std::copy_n(data_.begin() + indices[i] * cols_, cols_, out.data_.begin() + i * cols_);
    }
    return out;
}

void require_shape(const Tensor2D& t, std::size_t rows, std::size_t cols, const char* what) {
    if (t.rows() != rows || t.cols() != cols)
        throw DimensionError(fmt::format("{}: expected {}x{}, got {}", what, rows, cols, shape_str(t)));
}

std::string shape_str(const Tensor2D& t) { return fmt::format("{}x{}", t.rows(), t.cols()); }

Tensor2D softmax_rows(const Tensor2D& logits) {
    Tensor2D out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto in = logits.row(i);
        auto o = out.row(i);
        if (in.empty()) continue;
        const double m = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (std::size_t k = 0; k < in.size(); ++k) {
            o[k] = std::exp(in[k] - m);
            sum += o[k];
        }
        for (double& v : o) v /= sum;
    }
    return out;
}

Tensor2D softmax_backward(const Tensor2D& probs, const Tensor2D& grad_probs) {
    require_shape(grad_probs, probs.rows(), probs.cols(), "softmax_backward");
    Tensor2D out(probs.rows(), probs.cols());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        auto p = probs.row(i);
        auto g = grad_probs.row(i);
        double dot = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) dot += p[k] * g[k];
        auto o = out.row(i);
        for (std::size_t k = 0; k < p.size(); ++k) o[k] = p[k] * (g[k] - dot);
    }
    return out;
}

} // namespace proda
