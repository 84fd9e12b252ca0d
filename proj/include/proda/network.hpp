#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "proda/tensor.hpp"

namespace proda {

/// y = x * weight + bias, weight stored in x out.
struct DenseLayer {
    Tensor2D weight;
    std::vector<double> bias;

    std::size_t in_dim() const noexcept { return weight.rows(); }
    std::size_t out_dim() const noexcept { return weight.cols(); }
    bool operator==(const DenseLayer&) const = default;
};

struct NetworkShape {
    std::size_t input_dim = 2;
    std::vector<std::size_t> hidden;  // widths of the tanh layers before the feature layer
    std::size_t feature_dim = 8;
    std::size_t class_count = 2;

    bool operator==(const NetworkShape&) const = default;
};

/// All trainable tensors of a network. Also used for gradients and
/// optimizer state, which share the parameter layout.
struct Parameters {
    std::vector<DenseLayer> encoder;
    DenseLayer head;

    Parameters zeros_like() const;
    /// Flat views over every weight and bias, encoder first then head.
    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;
    std::size_t count() const;
    bool operator==(const Parameters&) const = default;
};

using Gradients = Parameters;

/// Activations recorded by a training forward pass; consumed by backward().
struct ForwardTrace {
    Tensor2D input;
    std::vector<Tensor2D> activations;  // post-tanh output of every encoder layer
    Tensor2D probs;
    bool recorded = false;
};

struct ForwardResult {
    Tensor2D features;
    Tensor2D logits;
    Tensor2D probs;
};

/// Runs x through tanh dense layers. Shared by the live network and the
/// momentum encoder.
Tensor2D encode(std::span<const DenseLayer> layers, const Tensor2D& x,
                std::vector<Tensor2D>* activations = nullptr);

/// Feature extractor f (tanh MLP) followed by a linear classifier g and a softmax.
class Network {
public:
    Network() = default;
    /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
    Network(const NetworkShape& shape, std::uint64_t seed);

    static Network zeros(const NetworkShape& shape);

    const NetworkShape& shape() const noexcept { return shape_; }
    Parameters& params() noexcept { return params_; }
    const Parameters& params() const noexcept { return params_; }

    ForwardResult forward(const Tensor2D& x) const;
    ForwardResult forward(const Tensor2D& x, ForwardTrace& trace) const;
    Tensor2D features(const Tensor2D& x) const;
    Tensor2D logits_from_features(const Tensor2D& features) const;

    /// Reverse pass. Either upstream gradient may be empty (0x0) meaning
    /// "no contribution"; when both are given they are summed at the
    /// feature layer.
    Gradients backward(const ForwardTrace& trace, const Tensor2D& grad_logits,
                       const Tensor2D& grad_features = {}) const;

    /// Replaces the feature extractor, keeping the head.
    void set_encoder(std::vector<DenseLayer> encoder);

private:
    void check_input(const Tensor2D& x) const;

    NetworkShape shape_;
    Parameters params_;
};

/// Momentum (EMA) shadow of a network's feature extractor.
class EmaEncoder {
public:
    EmaEncoder() = default;
    EmaEncoder(const Network& net, double decay);

    double decay() const noexcept { return decay_; }
    const std::vector<DenseLayer>& shadow() const noexcept { return shadow_; }
    std::vector<DenseLayer>& shadow() noexcept { return shadow_; }

    /// shadow <- decay * shadow + (1 - decay) * live
    void update(const Network& net, double decay);
    void update(const Network& net) { update(net, decay_); }

    Tensor2D forward(const Tensor2D& x) const;

private:
    std::vector<DenseLayer> shadow_;
    double decay_ = 0.999;
};

/// Plain gradient descent with optional heavy-ball momentum.
class Sgd {
public:
    explicit Sgd(double momentum = 0.0) : momentum_(momentum) {}
    void step(Network& net, const Gradients& grads, double lr);

private:
    double momentum_;
    Parameters velocity_;
    bool has_velocity_ = false;
};

/// Accumulates `scale * src` into `dst` (matching layouts).
void accumulate(Gradients& dst, const Gradients& src, double scale = 1.0);

// Checkpoint: one JSON header line (format, version, shapes) then all
// parameters as little-endian float64 in header order.
void save_checkpoint(const std::filesystem::path& path, const Network& net);
Network load_checkpoint(const std::filesystem::path& path);

} // namespace proda
