#include "proda/plots.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "proda/csv.hpp"
#include "proda/errors.hpp"

namespace proda {

namespace {

constexpr double kWidth = 480.0;
constexpr double kHeight = 320.0;
constexpr double kMargin = 40.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

const char* colour(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string num(double v) { return fmt::format("{:.2f}", v); }

struct Series {
    std::string name;
    std::vector<double> x, y;
};

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void settle() {
        if (lo > hi) lo = 0.0, hi = 1.0;
        if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    }
};

/// One panel placed at (ox, oy) inside a document.
class Panel {
public:
    Panel(double ox, double oy, Range xr, Range yr, std::string title)
        : ox_(ox), oy_(oy), xr_(xr), yr_(yr), title_(std::move(title)) {
        xr_.settle();
        yr_.settle();
    }

    double px(double x) const { return ox_ + kMargin + (x - xr_.lo) / (xr_.hi - xr_.lo) * (kWidth - 2 * kMargin); }
    double py(double y) const { return oy_ + kHeight - kMargin - (y - yr_.lo) / (yr_.hi - yr_.lo) * (kHeight - 2 * kMargin); }

    void axes(std::string& out) const {
        const double x0 = ox_ + kMargin, y0 = oy_ + kHeight - kMargin;
        const double x1 = ox_ + kWidth - kMargin, y1 = oy_ + kMargin;
        out += fmt::format("<g class=\"axes\" stroke=\"#000\" fill=\"none\">"
                           "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\"/>"
                           "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{3}\"/></g>\n",
                           num(x0), num(y0), num(x1), num(y1));
        out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>\n", num(x0), num(y1 - 10), title_);
        out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"9\">{}</text>\n", num(x0), num(y0 + 14),
                           fmt::format("{:.4g}", xr_.lo));
        out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"9\" text-anchor=\"end\">{}</text>\n", num(x1),
                           num(y0 + 14), fmt::format("{:.4g}", xr_.hi));
        out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"9\" text-anchor=\"end\">{}</text>\n", num(x0 - 3),
                           num(y0), fmt::format("{:.4g}", yr_.lo));
        out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"9\" text-anchor=\"end\">{}</text>\n", num(x0 - 3),
                           num(y1 + 8), fmt::format("{:.4g}", yr_.hi));
    }

    void lines(std::string& out, const std::vector<Series>& series) const {
        for (std::size_t s = 0; s < series.size(); ++s) {
            const auto& ser = series[s];
            std::string pts;
            for (std::size_t i = 0; i < ser.x.size(); ++i) {
                if (!std::isfinite(ser.y[i])) continue;
                if (!pts.empty()) pts += ' ';
                pts += num(px(ser.x[i])) + "," + num(py(ser.y[i]));
            }
            if (!pts.empty())
                out += fmt::format("<polyline class=\"series\" fill=\"none\" stroke=\"{}\" points=\"{}\"/>\n",
                                   colour(s), pts);
            out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"9\" fill=\"{}\">{}</text>\n",
                               num(ox_ + kWidth - kMargin + 4), num(oy_ + kMargin + 12.0 * static_cast<double>(s)),
                               colour(s), ser.name);
        }
    }

private:
    double ox_, oy_;
    Range xr_, yr_;
    std::string title_;
};

std::string document(double w, double h, const std::string& body) {
    return fmt::format("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
                       "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" "
                       "viewBox=\"0 0 {0} {1}\">\n"
                       "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n{2}</svg>\n",
                       num(w), num(h), body);
}

void write(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot write " + path.string());
    os << text;
}

/// x positions that keep increasing across stages, whose iteration counters restart.
std::vector<double> global_iterations(const CsvTable& t) {
    const std::size_t ci = t.column("iter");
    const std::size_t cs = t.column("stage");
    std::vector<double> x;
    double offset = 0.0, last = 0.0;
    std::string stage;
    for (const auto& r : t.rows) {
        const double it = parse_real(r[ci]);
        if (r[cs] != stage) {
            offset += last;
            stage = r[cs];
        }
        last = it;
        x.push_back(offset + it);
    }
    return x;
}

std::vector<Series> collect(const CsvTable& t, const std::vector<double>& x, std::initializer_list<const char*> cols) {
    std::vector<Series> out;
    for (const char* name : cols) {
        const std::size_t c = t.column(name);
        Series s{name, x, {}};
        for (const auto& r : t.rows) s.y.push_back(parse_real(r[c]));
        out.push_back(std::move(s));
    }
    return out;
}

Range x_range(const std::vector<double>& x) {
    Range r;
    for (double v : x) r.add(v);
    return r;
}

Range y_range(const std::vector<Series>& series) {
    Range r;
    for (const auto& s : series)
        for (double v : s.y) r.add(v);
    return r;
}

std::string curves_svg(const CsvTable& t) {
    const auto x = global_iterations(t);
    const auto losses = collect(t, x, {"total", "ce_s", "sce_t", "kl", "reg", "kd"});
    const auto accs = collect(t, x, {"source_acc", "target_acc"});
    Range unit;
    unit.add(0.0);
    unit.add(1.0);
    std::string body;
    Panel left(0, 0, x_range(x), y_range(losses), "losses");
    left.axes(body);
    left.lines(body, losses);
    Panel right(kWidth + 40, 0, x_range(x), unit, "accuracy");
    right.axes(body);
    right.lines(body, accs);
    return document(2 * kWidth + 40, kHeight, body);
}

std::string pseudo_svg(const CsvTable& t) {
    const auto x = global_iterations(t);
    const auto series = collect(t, x, {"pseudo_acc", "pseudo_miou"});
    Range unit;
    unit.add(0.0);
    unit.add(1.0);
    std::string body;
    Panel p(0, 0, x_range(x), unit, "pseudo-label quality");
    p.axes(body);
    p.lines(body, series);
    return document(kWidth + 60, kHeight, body);
}

/// Feature columns and labels of a dataset-style CSV.
void split_features(const CsvTable& t, const std::string& label_col, Tensor2D& features, std::vector<long>& labels) {
    const std::size_t cy = t.column(label_col);
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < t.header.size(); ++c)
        if (c != cy) cols.push_back(c);
    features = Tensor2D(t.rows.size(), cols.size());
    labels.clear();
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        for (std::size_t d = 0; d < cols.size(); ++d) features(i, d) = parse_real(t.rows[i][cols[d]]);
        labels.push_back(std::lround(parse_real(t.rows[i][cy])));
    }
}

std::string scatter_svg(const CsvTable& data, const std::optional<CsvTable>& protos) {
    Tensor2D feats;
    std::vector<long> labels;
    split_features(data, "y", feats, labels);
    const Projection proj = Projection::fit(feats);
    const Tensor2D xy = proj.apply(feats);

    Tensor2D proto_xy;
    std::vector<long> proto_labels;
    if (protos) {
        Tensor2D pf;
        split_features(*protos, "class", pf, proto_labels);
        if (pf.cols() != feats.cols())
            throw FormatError(fmt::format("prototype width {} does not match features {}", pf.cols(), feats.cols()));
        proto_xy = proj.apply(pf);
    }

    Range xr, yr;
    for (const Tensor2D* m : std::array<const Tensor2D*, 2>{&xy, &proto_xy})
        for (std::size_t i = 0; i < m->rows(); ++i) {
            xr.add((*m)(i, 0));
            yr.add((*m)(i, 1));
        }
    std::string body;
    Panel p(0, 0, xr, yr, "target features");
    p.axes(body);
    body += "<g class=\"points\">\n";
    for (std::size_t i = 0; i < xy.rows(); ++i)
        body += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"{}\"/>\n", num(p.px(xy(i, 0))),
                            num(p.py(xy(i, 1))), labels[i] < 0 ? "#bbb" : colour(static_cast<std::size_t>(labels[i])));
    body += "</g>\n<g class=\"prototypes\">\n";
    for (std::size_t i = 0; i < proto_xy.rows(); ++i) {
        const double cx = p.px(proto_xy(i, 0)), cy = p.py(proto_xy(i, 1));
        body += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"9\" height=\"9\" fill=\"{}\" stroke=\"#000\"/>\n",
                            num(cx - 4.5), num(cy - 4.5), colour(static_cast<std::size_t>(proto_labels[i])));
    }
    body += "</g>\n";
    return document(kWidth, kHeight, body);
}

} // namespace

Projection Projection::fit(const Tensor2D& features) {
    const std::size_t n = features.rows(), d = features.cols();
    Projection p;
    p.mean.assign(d, 0.0);
    p.basis = Tensor2D(d, 2);
    if (d <= 2) {
        for (std::size_t k = 0; k < d; ++k) p.basis(k, k) = 1.0;
        return p;
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) p.mean[k] += features(i, k) / static_cast<double>(n);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd c(static_cast<Eigen::Index>(d));
        for (std::size_t k = 0; k < d; ++k) c(static_cast<Eigen::Index>(k)) = features(i, k) - p.mean[k];
        cov.noalias() += c * c.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    // Eigenvalues come in ascending order.
    for (std::size_t j = 0; j < 2; ++j) {
        Eigen::VectorXd v = eig.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - j));
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        for (std::size_t k = 0; k < d; ++k) p.basis(k, j) = v(static_cast<Eigen::Index>(k));
    }
    return p;
}

Tensor2D Projection::apply(const Tensor2D& features) const {
    if (features.rows() && features.cols() != mean.size())
        throw DimensionError(fmt::format("projection expects {} columns, got {}", mean.size(), features.cols()));
    Tensor2D out(features.rows(), 2);
    for (std::size_t i = 0; i < features.rows(); ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < mean.size(); ++k) s += (features(i, k) - mean[k]) * basis(k, j);
            out(i, j) = s;
        }
    return out;
}

void emit_plots(const std::filesystem::path& metrics_csv, const std::filesystem::path& dataset_csv,
                const std::filesystem::path& out_dir, const std::optional<std::filesystem::path>& prototypes_csv) {
    const CsvTable metrics = read_csv(metrics_csv);
    const CsvTable data = read_csv(dataset_csv);
    std::optional<CsvTable> protos;
    if (prototypes_csv) protos = read_csv(*prototypes_csv);

    const std::string curves = curves_svg(metrics);
    const std::string pseudo = pseudo_svg(metrics);
    const std::string scatter = scatter_svg(data, protos);

    const auto dir = out_dir / "plots";
    std::filesystem::create_directories(dir);
    write(dir / "curves.svg", curves);
    write(dir / "pseudo_quality.svg", pseudo);
    write(dir / "scatter.svg", scatter);
}

} // namespace proda
