#include "proda/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "proda/errors.hpp"

namespace proda {

namespace {

DenseLayer make_layer(std::size_t in, std::size_t out) {
    return DenseLayer{Tensor2D(in, out), std::vector<double>(out, 0.0)};
}

std::vector<std::size_t> encoder_widths(const NetworkShape& s) {
    std::vector<std::size_t> w{s.input_dim};
    w.insert(w.end(), s.hidden.begin(), s.hidden.end());
    w.push_back(s.feature_dim);
    return w;
}

Parameters zero_params(const NetworkShape& s) {
    Parameters p;
    const auto widths = encoder_widths(s);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) p.encoder.push_back(make_layer(widths[l], widths[l + 1]));
    p.head = make_layer(s.feature_dim, s.class_count);
    return p;
}

// out = x * W + b
Tensor2D affine(const Tensor2D& x, const DenseLayer& layer) {
    const std::size_t n = x.rows(), in = layer.in_dim(), out = layer.out_dim();
    Tensor2D y(n, out);
    for (std::size_t i = 0; i < n; ++i) {
        auto yr = y.row(i);
        std::copy(layer.bias.begin(), layer.bias.end(), yr.begin());
        for (std::size_t a = 0; a < in; ++a) {
            const double xv = x(i, a);
            if (xv == 0.0) continue;
            for (std::size_t b = 0; b < out; ++b) yr[b] += xv * layer.weight(a, b);
        }
    }
    return y;
}

// Gradient of y = x W + b given dy; fills dW, db and returns dx (if wanted).
Tensor2D affine_backward(const Tensor2D& x, const DenseLayer& layer, const Tensor2D& dy, DenseLayer& grad,
                         bool want_dx) {
    const std::size_t n = x.rows(), in = layer.in_dim(), out = layer.out_dim();
    for (std::size_t i = 0; i < n; ++i) {
        auto dyr = dy.row(i);
        for (std::size_t b = 0; b < out; ++b) grad.bias[b] += dyr[b];
        for (std::size_t a = 0; a < in; ++a) {
            const double xv = x(i, a);
            for (std::size_t b = 0; b < out; ++b) grad.weight(a, b) += xv * dyr[b];
        }
    }
    if (!want_dx) return {};
    Tensor2D dx(n, in);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < in; ++a) {
            double s = 0.0;
            for (std::size_t b = 0; b < out; ++b) s += dy(i, b) * layer.weight(a, b);
            dx(i, a) = s;
        }
    return dx;
}

void put_le(std::ostream& os, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
    os.write(buf, 8);
}

double get_le(std::istream& is) {
    unsigned char buf[8];
    if (!is.read(reinterpret_cast<char*>(buf), 8)) throw FormatError("checkpoint: truncated parameter data");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

constexpr int kCheckpointVersion = 1;
constexpr const char* kCheckpointFormat = "proda-mlp";

} // namespace

Parameters Parameters::zeros_like() const {
    Parameters p;
    for (const auto& l : encoder) p.encoder.push_back(make_layer(l.in_dim(), l.out_dim()));
    p.head = make_layer(head.in_dim(), head.out_dim());
    return p;
}

std::vector<std::span<double>> Parameters::tensors() {
    std::vector<std::span<double>> out;
    for (auto& l : encoder) {
        out.push_back(l.weight.values());
        out.push_back(l.bias);
    }
    out.push_back(head.weight.values());
    out.push_back(head.bias);
    return out;
}

std::vector<std::span<const double>> Parameters::tensors() const {
    std::vector<std::span<const double>> out;
    for (const auto& l : encoder) {
        out.push_back(l.weight.values());
        out.push_back(l.bias);
    }
    out.push_back(head.weight.values());
    out.push_back(head.bias);
    return out;
}

std::size_t Parameters::count() const {
    std::size_t n = 0;
    for (auto t : tensors()) n += t.size();
    return n;
}

Tensor2D encode(std::span<const DenseLayer> layers, const Tensor2D& x, std::vector<Tensor2D>* activations) {
    Tensor2D h = x;
    if (activations) activations->clear();
    for (const auto& layer : layers) {
        if (h.cols() != layer.in_dim())
            throw DimensionError(fmt::format("encode: layer expects {} inputs, got {}", layer.in_dim(), h.cols()));
        h = affine(h, layer);
        for (double& v : h.values()) v = std::tanh(v);
        if (activations) activations->push_back(h);
    }
    return h;
}

Network::Network(const NetworkShape& shape, std::uint64_t seed) : shape_(shape), params_(zero_params(shape)) {
    std::mt19937_64 rng(seed);
    auto init = [&rng](DenseLayer& l) {
        const double s = 1.0 / std::sqrt(static_cast<double>(l.in_dim()));
        std::uniform_real_distribution<double> u(-s, s);
        for (double& w : l.weight.values()) w = u(rng);
        for (double& b : l.bias) b = u(rng);
    };
    for (auto& l : params_.encoder) init(l);
    init(params_.head);
}

Network Network::zeros(const NetworkShape& shape) {
    Network n;
    n.shape_ = shape;
    n.params_ = zero_params(shape);
    return n;
}

void Network::check_input(const Tensor2D& x) const {
    if (x.cols() != shape_.input_dim)
        throw DimensionError(fmt::format("forward: network expects {} inputs, got {}", shape_.input_dim, x.cols()));
    if (!x.all_finite()) throw DimensionError("forward: non-finite input");
}

Tensor2D Network::features(const Tensor2D& x) const {
    check_input(x);
    return encode(params_.encoder, x);
}

Tensor2D Network::logits_from_features(const Tensor2D& features) const {
    if (features.cols() != shape_.feature_dim) throw DimensionError("classifier: feature width mismatch");
    return affine(features, params_.head);
}

ForwardResult Network::forward(const Tensor2D& x) const {
    ForwardResult r;
    r.features = features(x);
    r.logits = logits_from_features(r.features);
    r.probs = softmax_rows(r.logits);
    return r;
}

ForwardResult Network::forward(const Tensor2D& x, ForwardTrace& trace) const {
    check_input(x);
    ForwardResult r;
    trace.input = x;
    r.features = encode(params_.encoder, x, &trace.activations);
    r.logits = logits_from_features(r.features);
    r.probs = softmax_rows(r.logits);
    trace.probs = r.probs;
    trace.recorded = true;
    return r;
}

Gradients Network::backward(const ForwardTrace& trace, const Tensor2D& grad_logits,
                            const Tensor2D& grad_features) const {
    if (!trace.recorded) throw StateError("backward: no forward pass recorded");
    const std::size_t n = trace.input.rows();
    const Tensor2D& feats = trace.activations.empty() ? trace.input : trace.activations.back();

    Gradients g = params_.zeros_like();
    Tensor2D dh(n, shape_.feature_dim);
    if (!grad_logits.empty()) {
        require_shape(grad_logits, n, shape_.class_count, "backward(grad_logits)");
        dh = affine_backward(feats, params_.head, grad_logits, g.head, true);
    }
    if (!grad_features.empty()) {
        require_shape(grad_features, n, shape_.feature_dim, "backward(grad_features)");
        for (std::size_t i = 0; i < dh.size(); ++i) dh.values()[i] += grad_features.values()[i];
    }

    for (std::size_t l = params_.encoder.size(); l-- > 0;) {
        const Tensor2D& h = trace.activations[l];
        Tensor2D da = dh;
        for (std::size_t i = 0; i < da.size(); ++i) {
            const double hv = h.values()[i];
            da.values()[i] *= 1.0 - hv * hv;
        }
        const Tensor2D& below = l == 0 ? trace.input : trace.activations[l - 1];
        dh = affine_backward(below, params_.encoder[l], da, g.encoder[l], l > 0);
    }
    return g;
}

void Network::set_encoder(std::vector<DenseLayer> encoder) {
    if (encoder.size() != params_.encoder.size()) throw DimensionError("set_encoder: layer count mismatch");
    for (std::size_t l = 0; l < encoder.size(); ++l)
        if (encoder[l].weight.rows() != params_.encoder[l].weight.rows() ||
            encoder[l].weight.cols() != params_.encoder[l].weight.cols())
            throw DimensionError("set_encoder: layer shape mismatch");
    params_.encoder = std::move(encoder);
}

EmaEncoder::EmaEncoder(const Network& net, double decay) : shadow_(net.params().encoder), decay_(decay) {
    if (!(decay >= 0.0 && decay < 1.0)) throw std::invalid_argument("EmaEncoder: decay must be in [0,1)");
}

void EmaEncoder::update(const Network& net, double decay) {
    if (!(decay >= 0.0 && decay < 1.0)) throw std::invalid_argument("ema_update: decay must be in [0,1)");
    const auto& live = net.params().encoder;
    if (live.size() != shadow_.size()) throw DimensionError("ema_update: layer count mismatch");
    for (std::size_t l = 0; l < live.size(); ++l) {
        if (live[l].weight.rows() != shadow_[l].weight.rows() || live[l].weight.cols() != shadow_[l].weight.cols())
            throw DimensionError("ema_update: layer shape mismatch");
        auto sw = shadow_[l].weight.values();
        auto lw = live[l].weight.values();
        for (std::size_t i = 0; i < sw.size(); ++i) sw[i] = decay * sw[i] + (1.0 - decay) * lw[i];
        for (std::size_t i = 0; i < shadow_[l].bias.size(); ++i)
            shadow_[l].bias[i] = decay * shadow_[l].bias[i] + (1.0 - decay) * live[l].bias[i];
    }
}

Tensor2D EmaEncoder::forward(const Tensor2D& x) const {
    if (shadow_.empty()) throw StateError("ema_forward: encoder not initialised");
    if (x.cols() != shadow_.front().in_dim())
        throw DimensionError(fmt::format("ema_forward: expects {} inputs, got {}", shadow_.front().in_dim(), x.cols()));
    return encode(shadow_, x);
}

void accumulate(Gradients& dst, const Gradients& src, double scale) {
    auto d = dst.tensors();
    auto s = src.tensors();
    if (d.size() != s.size()) throw DimensionError("accumulate: layout mismatch");
    for (std::size_t t = 0; t < d.size(); ++t) {
        if (d[t].size() != s[t].size()) throw DimensionError("accumulate: layout mismatch");
        for (std::size_t i = 0; i < d[t].size(); ++i) d[t][i] += scale * s[t][i];
    }
}

void Sgd::step(Network& net, const Gradients& grads, double lr) {
    if (momentum_ == 0.0) {
        accumulate(net.params(), grads, -lr);
        return;
    }
    if (!has_velocity_) {
        velocity_ = net.params().zeros_like();
        has_velocity_ = true;
    }
    auto v = velocity_.tensors();
    auto g = grads.tensors();
    for (std::size_t t = 0; t < v.size(); ++t)
        for (std::size_t i = 0; i < v[t].size(); ++i) v[t][i] = momentum_ * v[t][i] + g[t][i];
    accumulate(net.params(), velocity_, -lr);
}

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
    nlohmann::json header;
    header["format"] = kCheckpointFormat;
    header["version"] = kCheckpointVersion;
    const auto& s = net.shape();
    header["input_dim"] = s.input_dim;
    header["hidden"] = s.hidden;
    header["feature_dim"] = s.feature_dim;
    header["class_count"] = s.class_count;
    auto layers = nlohmann::json::array();
    const auto& p = net.params();
    for (std::size_t l = 0; l < p.encoder.size(); ++l)
        layers.push_back({{"name", fmt::format("encoder.{}", l)},
                          {"weight", {p.encoder[l].in_dim(), p.encoder[l].out_dim()}},
                          {"bias", {p.encoder[l].out_dim()}}});
    layers.push_back(
        {{"name", "head"}, {"weight", {p.head.in_dim(), p.head.out_dim()}}, {"bias", {p.head.out_dim()}}});
    header["layers"] = layers;

    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("checkpoint: cannot open " + path.string());
    os << header.dump() << '\n';
    for (auto t : p.tensors())
        for (double v : t) put_le(os, v);
}

Network load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("checkpoint: cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw FormatError("checkpoint: missing header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: bad header: ") + e.what());
    }
    if (header.value("format", "") != kCheckpointFormat) throw FormatError("checkpoint: unknown format");
    if (header.value("version", 0) != kCheckpointVersion)
        throw FormatError(fmt::format("checkpoint: unsupported version {}", header.value("version", 0)));

    NetworkShape s;
    s.input_dim = header.at("input_dim").get<std::size_t>();
    s.hidden = header.at("hidden").get<std::vector<std::size_t>>();
    s.feature_dim = header.at("feature_dim").get<std::size_t>();
    s.class_count = header.at("class_count").get<std::size_t>();
    Network net = Network::zeros(s);

    const auto& layers = header.at("layers");
    if (layers.size() != net.params().encoder.size() + 1) throw FormatError("checkpoint: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& ref = l < net.params().encoder.size() ? net.params().encoder[l] : net.params().head;
        auto w = layers[l].at("weight").get<std::vector<std::size_t>>();
        if (w.size() != 2 || w[0] != ref.in_dim() || w[1] != ref.out_dim())
            throw FormatError("checkpoint: layer shape disagrees with network shape");
    }
    for (auto t : net.params().tensors())
        for (double& v : t) v = get_le(is);
    if (is.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint: trailing bytes");
    return net;
}

} // namespace proda
