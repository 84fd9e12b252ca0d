#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "proda/pipeline.hpp"

using namespace proda;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.n_source = 200;
    cfg.n_target = 200;
    cfg.eval_interval = 5;
    cfg.warmup.epochs = 5;
    cfg.stage1.epochs = 2;
    cfg.distill.epochs = 2;
    cfg.distill.pretrain_epochs = 1;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("proda_pipeline_" + name);
    fs::remove_all(dir);
    return dir;
}

} // namespace

TEST(GitBlobHash, KnownValue) {
    EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
    EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST(Pipeline, EmptyStageListGivesBaselineOnly) {
    ExperimentConfig cfg = small_config();
    cfg.stages.clear();
    const auto dir = scratch("empty");
    RunResult r = run_experiment(cfg, dir);
    EXPECT_TRUE(r.manifest.stages.empty());
    EXPECT_FALSE(r.manifest.failed_stage);
    auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(j["baseline_target_acc"].get<double>(), r.manifest.baseline_target_acc);
    EXPECT_TRUE(j["stages"].empty());
    EXPECT_TRUE(j["failed_stage"].is_null());
    EXPECT_EQ(j["config_hash"], git_blob_hash(slurp(dir / "config.txt")));
    EXPECT_TRUE(fs::exists(dir / "plots" / "curves.svg"));
    fs::remove_all(dir);
}

TEST(Pipeline, FixedSeedIsBitIdentical) {
    ExperimentConfig cfg = small_config();
    const auto a = scratch("det_a"), b = scratch("det_b");
    run_experiment(cfg, a);
    run_experiment(cfg, b);
    for (const char* f : {"metrics.csv", "losses.csv", "model.ckpt", "prototypes.csv", "plots/curves.svg",
                          "plots/scatter.svg", "plots/pseudo_quality.svg"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Pipeline, StagesAreLoggedInOrder) {
    RunResult r = run_experiment(small_config());
    ASSERT_EQ(r.manifest.stages.size(), 4u);
    EXPECT_EQ(r.manifest.stages[0].stage, "warmup");
    EXPECT_EQ(r.manifest.stages[1].stage, "stage1");
    EXPECT_EQ(r.manifest.stages[2].stage, "distill1");
    EXPECT_EQ(r.manifest.stages[3].stage, "distill2");
    for (const auto& s : r.manifest.stages) {
        EXPECT_TRUE(s.ok);
        EXPECT_GE(s.peak_target_acc, s.target_acc);
        EXPECT_GE(s.max_drawdown, 0.0);
    }
    EXPECT_EQ(r.log.rows().front().iter, 0u);
}

TEST(Pipeline, FailedStageIsRecorded) {
    ExperimentConfig cfg = small_config();
    cfg.warmup.learning_rate = std::numeric_limits<double>::infinity();
    RunResult r = run_experiment(cfg);
    ASSERT_TRUE(r.manifest.failed_stage);
    EXPECT_EQ(*r.manifest.failed_stage, "warmup");
    EXPECT_FALSE(r.manifest.stages.back().ok);
    EXPECT_EQ(r.manifest.stages.size(), 1u);
    auto j = nlohmann::json::parse(r.manifest.to_json());
    EXPECT_EQ(j["failed_stage"], "warmup");
}

TEST(Pipeline, VanillaAblationSwitchesOffBothComponents) {
    StageConfig cfg;
    apply_ablation(cfg, Ablation::Vanilla);
    EXPECT_FALSE(cfg.denoise);
    EXPECT_EQ(cfg.weights.gamma1, 0.0);
    EXPECT_EQ(cfg.weights.gamma2, 0.0);
    EXPECT_EQ(cfg.label_mode, LabelMode::FixedBoilerplate);
    EXPECT_EQ(parse_ablation("structure-only"), Ablation::StructureOnly);
    EXPECT_THROW(parse_ablation("half"), std::invalid_argument);
}

TEST(Pipeline, ZeroEpochResumedStudentMatchesTeacher) {
    ExperimentConfig cfg = small_config();
    const DomainData data = generate(cfg.domain());
    MetricsLog log;
    RunContext ctx(data, log, 5, 3);
    Network teacher(cfg.net, 4);
    warmup(teacher, cfg.warmup, ctx);
    StageConfig d = cfg.distill;
    d.epochs = 0;
    d.student_init = StudentInit::Resume;
    d.kd_threshold = 0.0;
    Network student = init_student(teacher, d, data.target, 5);
    StageSummary s = run_distill_stage(teacher, student, d, ctx);
    EXPECT_EQ(student.params(), teacher.params());
    EXPECT_EQ(s.target_acc, ctx.evaluator.target(teacher).accuracy);
    EXPECT_EQ(s.pseudo_acc, ctx.evaluator.target(teacher).accuracy);
}

TEST(Pipeline, WarmupZeroEpochsLeavesNetUnchanged) {
    ExperimentConfig cfg = small_config();
    const DomainData data = generate(cfg.domain());
    MetricsLog log;
    RunContext ctx(data, log, 5, 3);
    Network net(cfg.net, 4);
    const Network before = net;
    StageConfig w = cfg.warmup;
    w.epochs = 0;
    warmup(net, w, ctx);
    EXPECT_EQ(net.params(), before.params());
}

TEST(Pipeline, BoilerplateFromUniformNetIsUniform) {
    NetworkShape shape{2, {4}, 3, 4};
    PseudoLabelStore store = generate_boilerplate(Network::zeros(shape), Tensor2D{{1, 2}, {3, 4}});
    for (double v : store.boilerplate().values()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Pipeline, SweepWritesOneManifestPerPoint) {
    auto parsed = parse_config(
        "data.n_source = 100\ndata.n_target = 100\nstages = warmup\nwarmup.epochs = 2\nsweep.seed = 1,2\n");
    const auto dir = scratch("sweep");
    auto manifests = run_sweep(parsed, dir);
    ASSERT_EQ(manifests.size(), 2u);
    EXPECT_EQ(manifests[1].seed, 2u);
    EXPECT_TRUE(fs::exists(dir / "point_000" / "manifest.json"));
    EXPECT_TRUE(fs::exists(dir / "point_001" / "manifest.json"));
    fs::remove_all(dir);
}
