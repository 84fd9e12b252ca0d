// Command-line driver: run, sweep, baseline, plot.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "proda/config.hpp"
#include "proda/pipeline.hpp"
#include "proda/plots.hpp"

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string stages;
    std::vector<std::string> overrides;
    std::string ablation;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "override the config seed");
    cmd->add_option("--out-dir", o.out_dir, "directory for the run artifacts");
    cmd->add_option("--set", o.overrides, "extra key=value override (repeatable)");
}

proda::ParsedConfig build_config(const CommonOptions& o) {
    proda::ParsedConfig parsed = o.config.empty() ? proda::ParsedConfig{} : proda::load_config(o.config);
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        proda::set_config_value(parsed.base, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed) proda::set_config_value(parsed.base, "seed", std::to_string(*o.seed));
    if (!o.stages.empty()) proda::set_config_value(parsed.base, "stages", o.stages);
    if (!o.ablation.empty()) proda::apply_ablation(parsed.base.stage1, proda::parse_ablation(o.ablation));
    return parsed;
}

std::optional<std::filesystem::path> out_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::filesystem::path(s);
}

void print_summary(const proda::RunManifest& m) {
    fmt::print("seed {}  baseline target acc {:.4f}  ({:.1f}s)\n", m.seed, m.baseline_target_acc,
               m.wall_clock_seconds);
    for (const auto& s : m.stages) {
        if (!s.ok) {
            fmt::print("  {:<9} FAILED: {}\n", s.stage, s.error);
            continue;
        }
        fmt::print("  {:<9} iters {:>5}  source {:.4f}  target {:.4f}  mIoU {:.4f}  pseudo {:.4f}  peak {:.4f}  drawdown {:.4f}\n",
                   s.stage, s.iterations, s.source_acc, s.target_acc, s.target_miou, s.pseudo_acc,
                   s.peak_target_acc, s.max_drawdown);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"prototypical pseudo-label denoising lab"};
    app.require_subcommand(1);

    CommonOptions run_opts;
    auto* run = app.add_subcommand("run", "run the configured stage list");
    add_common(run, run_opts);
    run->add_option("--stages", run_opts.stages, "comma list of warmup,stage1,distill");
    run->add_option("--ablation", run_opts.ablation, "vanilla | denoise-only | structure-only | full");

    CommonOptions sweep_opts;
    auto* sweep = app.add_subcommand("sweep", "run every point of the sweep.* grid");
    add_common(sweep, sweep_opts);
    sweep->add_option("--stages", sweep_opts.stages, "comma list of warmup,stage1,distill");

    CommonOptions base_opts;
    auto* baseline = app.add_subcommand("baseline", "source-only warm-up and its target accuracy");
    add_common(baseline, base_opts);

    std::string metrics_csv, dataset_csv, prototypes_csv, plot_dir;
    auto* plot = app.add_subcommand("plot", "render SVG plots from CSV artifacts");
    plot->add_option("--metrics", metrics_csv, "metrics CSV")->required()->check(CLI::ExistingFile);
    plot->add_option("--dataset", dataset_csv, "feature CSV with a y column")->required()->check(CLI::ExistingFile);
    plot->add_option("--prototypes", prototypes_csv, "prototype CSV")->check(CLI::ExistingFile);
    plot->add_option("--out-dir", plot_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto result = proda::run_experiment(build_config(run_opts).base, out_path(run_opts.out_dir));
            print_summary(result.manifest);
            return result.manifest.failed_stage ? 2 : 0;
        }
        if (*sweep) {
            const auto manifests = proda::run_sweep(build_config(sweep_opts), out_path(sweep_opts.out_dir));
            int rc = 0;
            for (std::size_t i = 0; i < manifests.size(); ++i) {
                fmt::print("point {:03}\n", i);
                print_summary(manifests[i]);
                if (manifests[i].failed_stage) rc = 2;
            }
            return rc;
        }
        if (*baseline) {
            base_opts.stages = "warmup";
            const auto result = proda::run_experiment(build_config(base_opts).base, out_path(base_opts.out_dir));
            print_summary(result.manifest);
            return result.manifest.failed_stage ? 2 : 0;
        }
        if (*plot) {
            std::optional<std::filesystem::path> protos;
            if (!prototypes_csv.empty()) protos = prototypes_csv;
            proda::emit_plots(metrics_csv, dataset_csv, plot_dir, protos);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
