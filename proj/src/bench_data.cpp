#include "proda/bench_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "proda/csv.hpp"
#include "proda/errors.hpp"
#include "proda/rng.hpp"

namespace proda {

namespace {

Labels draw_classes(std::mt19937_64& rng, const std::vector<double>& freqs, std::size_t n) {
    std::discrete_distribution<int> pick(freqs.begin(), freqs.end());
    Labels y(n);
    for (auto& v : y) v = static_cast<Label>(pick(rng));
    return y;
}

Tensor2D draw_points(std::mt19937_64& rng, const DomainSpec& spec, const Labels& y) {
    Tensor2D x(y.size(), spec.dim);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> arc(0.0, std::numbers::pi);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto k = static_cast<std::size_t>(y[i]);
        auto r = x.row(i);
        if (spec.family == DomainFamily::Gaussian) {
            for (std::size_t d = 0; d < spec.dim; ++d) r[d] = spec.means[k][d] + spec.stds[k] * gauss(rng);
        } else {
            const double t = arc(rng);
            const double rad = spec.moon_radius;
            if (k == 0) {
                r[0] = rad * std::cos(t);
                r[1] = rad * std::sin(t);
            } else {
                r[0] = rad * (1.0 - std::cos(t));
                r[1] = rad * (0.5 - std::sin(t));
            }
            for (std::size_t d = 0; d < spec.dim; ++d) r[d] += spec.moon_noise * gauss(rng);
        }
    }
    return x;
}

nlohmann::json spec_to_json(const DomainSpec& s) {
    return {{"name", s.name},
            {"family", s.family == DomainFamily::Gaussian ? "gaussian" : "moons"},
            {"class_count", s.class_count},
            {"dim", s.dim},
            {"means", s.means},
            {"stds", s.stds},
            {"moon_radius", s.moon_radius},
            {"moon_noise", s.moon_noise},
            {"rotation_deg", s.rotation_deg},
            {"pivot", s.pivot},
            {"translation", s.translation},
            {"class_freqs", s.class_freqs},
            {"target_class_freqs", s.target_class_freqs},
            {"n_source", s.n_source},
            {"n_target", s.n_target},
            {"seed", s.seed}};
}

DomainSpec spec_from_json(const nlohmann::json& j) {
    DomainSpec s;
    s.name = j.at("name").get<std::string>();
    s.family = j.at("family").get<std::string>() == "moons" ? DomainFamily::Moons : DomainFamily::Gaussian;
    s.class_count = j.at("class_count").get<std::size_t>();
    s.dim = j.at("dim").get<std::size_t>();
    s.means = j.at("means").get<std::vector<std::vector<double>>>();
    s.stds = j.at("stds").get<std::vector<double>>();
    s.moon_radius = j.at("moon_radius").get<double>();
    s.moon_noise = j.at("moon_noise").get<double>();
    s.rotation_deg = j.at("rotation_deg").get<double>();
    s.pivot = j.at("pivot").get<std::vector<double>>();
    s.translation = j.at("translation").get<std::vector<double>>();
    s.class_freqs = j.at("class_freqs").get<std::vector<double>>();
    s.target_class_freqs = j.at("target_class_freqs").get<std::vector<double>>();
    s.n_source = j.at("n_source").get<std::size_t>();
    s.n_target = j.at("n_target").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

void write_set(const std::filesystem::path& path, const Tensor2D& x, const Labels& y) {
    std::vector<std::string> header;
    for (std::size_t d = 0; d < x.cols(); ++d) header.push_back(fmt::format("x{}", d));
    header.emplace_back("y");
    CsvWriter w(path, header);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::vector<std::string> row;
        for (double v : x.row(i)) row.push_back(format_real(v));
        row.push_back(std::to_string(y[i]));
        w.row(row);
    }
}

LabeledSet read_set(const std::filesystem::path& path, std::size_t dim) {
    const CsvTable t = read_csv(path);
    if (t.header.size() != dim + 1) throw FormatError(fmt::format("{}: expected {} columns", path.string(), dim + 1));
    LabeledSet s{Tensor2D(t.rows.size(), dim), Labels(t.rows.size())};
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        for (std::size_t d = 0; d < dim; ++d) s.x(i, d) = parse_real(t.rows[i][d]);
        s.y[i] = static_cast<Label>(std::stol(t.rows[i][dim]));
    }
    return s;
}

void check_freqs(const std::vector<double>& f, std::size_t k, const char* what) {
    if (f.size() != k) throw std::invalid_argument(fmt::format("DomainSpec: {} needs {} entries", what, k));
    const double sum = std::accumulate(f.begin(), f.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument(fmt::format("DomainSpec: {} must sum to 1", what));
    for (double v : f)
        if (v < 0.0) throw std::invalid_argument(fmt::format("DomainSpec: negative {}", what));
}

} // namespace

void DomainSpec::validate() const {
    if (class_count == 0 || dim == 0) throw std::invalid_argument("DomainSpec: empty class count or dim");
    check_freqs(class_freqs, class_count, "class_freqs");
    if (!target_class_freqs.empty()) check_freqs(target_class_freqs, class_count, "target_class_freqs");
    if (family == DomainFamily::Gaussian) {
        if (means.size() != class_count || stds.size() != class_count)
            throw std::invalid_argument("DomainSpec: one mean and std per class required");
        for (const auto& m : means)
            if (m.size() != dim) throw std::invalid_argument("DomainSpec: mean dimension mismatch");
        for (double s : stds)
            if (!(s > 0.0)) throw std::invalid_argument("DomainSpec: stds must be positive");
    } else {
        if (class_count != 2 || dim != 2) throw std::invalid_argument("DomainSpec: moons are 2 classes in 2-D");
        if (!(moon_noise > 0.0) || !(moon_radius > 0.0)) throw std::invalid_argument("DomainSpec: bad moon params");
    }
    if (!pivot.empty() && pivot.size() != dim) throw std::invalid_argument("DomainSpec: pivot dimension");
    if (!translation.empty() && translation.size() != dim)
        throw std::invalid_argument("DomainSpec: translation dimension");
    if (rotation_deg != 0.0 && dim < 2) throw std::invalid_argument("DomainSpec: rotation needs dim >= 2");
}

DomainSpec domain_preset(const std::string& name) {
    DomainSpec s;
    s.name = name;
    if (name == "gauss-shift") {
        s.family = DomainFamily::Gaussian;
        s.class_count = 4;
        s.dim = 2;
        s.means = {{2.2, 2.2}, {-2.2, 2.2}, {-2.2, -2.2}, {2.2, -2.2}};
        s.stds = {0.5, 0.5, 0.5, 0.5};
        s.rotation_deg = 30.0;
        s.pivot = {0.0, 0.0};
        s.translation = {0.4, 0.0};
        s.class_freqs = {0.3, 0.3, 0.2, 0.2};
        s.n_source = 1000;
        s.n_target = 1000;
        return s;
    }
    if (name == "moons-shift") {
        s.family = DomainFamily::Moons;
        s.class_count = 2;
        s.dim = 2;
        s.moon_radius = 2.0;
        s.moon_noise = 0.2;
        s.rotation_deg = 35.0;
        s.pivot = {1.0, 0.25};
        s.translation = {0.0, 0.0};
        s.class_freqs = {0.5, 0.5};
        s.n_source = 1000;
        s.n_target = 1000;
        return s;
    }
    throw std::invalid_argument("unknown domain preset '" + name + "'");
}

Tensor2D apply_shift(const DomainSpec& spec, const Tensor2D& x) {
    Tensor2D out = x;
    const double a = spec.rotation_deg * std::numbers::pi / 180.0;
    const double c = std::cos(a), s = std::sin(a);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        if (spec.rotation_deg != 0.0) {
            const double px = spec.pivot.empty() ? 0.0 : spec.pivot[0];
            const double py = spec.pivot.empty() ? 0.0 : spec.pivot[1];
            const double dx = r[0] - px, dy = r[1] - py;
            r[0] = px + c * dx - s * dy;
            r[1] = py + s * dx + c * dy;
        }
        if (!spec.translation.empty())
            for (std::size_t d = 0; d < r.size(); ++d) r[d] += spec.translation[d];
    }
    return out;
}

DomainData generate(const DomainSpec& spec) {
    spec.validate();
    DomainData data;
    data.spec = spec;
    std::mt19937_64 src_rng(stream_seed(spec.seed, 1));
    data.source.y = draw_classes(src_rng, spec.class_freqs, spec.n_source);
    data.source.x = draw_points(src_rng, spec, data.source.y);

    std::mt19937_64 tgt_rng(stream_seed(spec.seed, 2));
    const auto& tf = spec.target_class_freqs.empty() ? spec.class_freqs : spec.target_class_freqs;
    Labels ty = draw_classes(tgt_rng, tf, spec.n_target);
    data.target = apply_shift(spec, draw_points(tgt_rng, spec, ty));
    data.target_truth = HiddenLabels(std::move(ty));
    return data;
}

Labels inject_boundary_noise(const Labels& labels, const Tensor2D& features, const Network& model, double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("inject_boundary_noise: rate must be in [0,1)");
    if (labels.size() != features.rows()) throw DimensionError("inject_boundary_noise: label count mismatch");
    const Tensor2D probs = model.forward(features).probs;

    std::vector<std::size_t> candidates;
    std::vector<double> margin(labels.size(), 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == kIgnore) continue;
        std::vector<double> p(probs.row(i).begin(), probs.row(i).end());
        std::partial_sort(p.begin(), p.begin() + std::min<std::size_t>(2, p.size()), p.end(), std::greater<>());
        margin[i] = p.size() > 1 ? p[0] - p[1] : p[0];
        candidates.push_back(i);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return margin[a] < margin[b]; });

    const auto flips = static_cast<std::size_t>(std::llround(rate * static_cast<double>(candidates.size())));
    Labels out = labels;
    for (std::size_t j = 0; j < flips; ++j) {
        const std::size_t i = candidates[j];
        auto p = probs.row(i);
        std::size_t best = p.size();
        for (std::size_t k = 0; k < p.size(); ++k) {
            if (static_cast<Label>(k) == labels[i]) continue;
            if (best == p.size() || p[k] > p[best]) best = k;
        }
        if (best < p.size()) out[i] = static_cast<Label>(best);
    }
    return out;
}

void export_dataset(const std::filesystem::path& dir, const DomainData& data) {
    std::filesystem::create_directories(dir);
    write_set(dir / "source.csv", data.source.x, data.source.y);
    write_set(dir / "target.csv", data.target, metrics::ground_truth(data.target_truth));
    std::ofstream(dir / "spec.json") << spec_to_json(data.spec).dump(2) << '\n';
}

DomainData import_dataset(const std::filesystem::path& dir) {
    std::ifstream is(dir / "spec.json");
    if (!is) throw FormatError("dataset: missing spec.json in " + dir.string());
    DomainData data;
    try {
        data.spec = spec_from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("dataset: bad spec.json: ") + e.what());
    }
    data.source = read_set(dir / "source.csv", data.spec.dim);
    LabeledSet t = read_set(dir / "target.csv", data.spec.dim);
    data.target = std::move(t.x);
    data.target_truth = HiddenLabels(std::move(t.y));
    return data;
}

} // namespace proda
