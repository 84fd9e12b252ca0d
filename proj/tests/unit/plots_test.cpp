#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "proda/errors.hpp"
#include "proda/plots.hpp"

using namespace proda;
namespace fs = std::filesystem;

namespace {

const char* kHeader = "iter,stage,ce_s,sce_t,kl,reg,kd,total,source_acc,target_acc,target_miou,pseudo_acc,"
                      "pseudo_miou,proto_drift\n";

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::size_t count(const std::string& s, const std::string& what) {
    std::size_t n = 0;
    for (auto pos = s.find(what); pos != std::string::npos; pos = s.find(what, pos + 1)) ++n;
    return n;
}

class Plots : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("proda_plots_" +
                                           std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        write("dataset.csv", "f0,f1,f2,y\n0,0,1,0\n1,0,0,1\n0,2,0,1\n0.5,0.5,0.5,0\n1,1,1,1\n");
        write("metrics.csv", std::string(kHeader) + "0,warmup,1,0,0,0,0,1,0.5,0.4,0.3,0,0,0\n"
                                                    "10,warmup,0.5,0,0,0,0,0.5,0.9,0.7,0.6,0,0,0\n"
                                                    "0,stage1,0.2,1,0.1,2,0,3.4,0.9,0.7,0.6,0.7,0.6,0.1\n"
                                                    "10,stage1,0.2,0.8,0.1,2,0,3.1,0.9,0.8,0.7,0.75,0.6,0.05\n");
    }
    void TearDown() override { fs::remove_all(dir); }
    void write(const std::string& name, const std::string& text) { std::ofstream(dir / name) << text; }

    fs::path dir;
};

} // namespace

TEST_F(Plots, WritesThreeFiles) {
    emit_plots(dir / "metrics.csv", dir / "dataset.csv", dir / "out");
    for (const char* f : {"curves.svg", "scatter.svg", "pseudo_quality.svg"})
        {
        const std::string svg = slurp(dir / "out" / "plots" / f);
        EXPECT_NE(svg.find("<svg"), std::string::npos) << f;
    }
    EXPECT_NE(slurp(dir / "out" / "plots" / "curves.svg").find("<polyline"), std::string::npos);
}

TEST_F(Plots, EmptyMetricsGiveEmptyAxes) {
    write("empty.csv", kHeader);
    emit_plots(dir / "empty.csv", dir / "dataset.csv", dir / "out");
    const std::string svg = slurp(dir / "out" / "plots" / "curves.svg");
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    EXPECT_EQ(count(svg, "<polyline"), 0u);
}

TEST_F(Plots, ByteIdenticalForFixedInput) {
    write("protos.csv", "class,f0,f1,f2\n0,0,0,0.5\n1,1,1,0\n");
    emit_plots(dir / "metrics.csv", dir / "dataset.csv", dir / "a", dir / "protos.csv");
    emit_plots(dir / "metrics.csv", dir / "dataset.csv", dir / "b", dir / "protos.csv");
    for (const char* f : {"curves.svg", "scatter.svg", "pseudo_quality.svg"})
        EXPECT_EQ(slurp(dir / "a" / "plots" / f), slurp(dir / "b" / "plots" / f));
}

TEST_F(Plots, ScatterHasOnePointPerRowAndPrototypeMarkers) {
    write("protos.csv", "class,f0,f1,f2\n0,0,0,0.5\n1,1,1,0\n");
    emit_plots(dir / "metrics.csv", dir / "dataset.csv", dir / "out", dir / "protos.csv");
    const std::string svg = slurp(dir / "out" / "plots" / "scatter.svg");
    EXPECT_EQ(count(svg, "<circle"), 5u);
    EXPECT_EQ(count(svg, "<rect"), 3u);  // background plus one per prototype
}

TEST_F(Plots, MissingColumnIsSchemaError) {
    write("bad.csv", "iter,stage,total\n0,warmup,1\n");
    EXPECT_THROW(emit_plots(dir / "bad.csv", dir / "dataset.csv", dir / "out"), FormatError);
    write("bad_data.csv", "f0,f1\n0,0\n");
    EXPECT_THROW(emit_plots(dir / "metrics.csv", dir / "bad_data.csv", dir / "out"), FormatError);
}

TEST(Projection, TwoDimensionalIsIdentity) {
    Tensor2D f{{1, 2}, {3, -4}};
    Projection p = Projection::fit(f);
    EXPECT_EQ(p.apply(f), f);
}

TEST(Projection, PrincipalAxisAndSign) {
    // Points spread along (1,1,0)/sqrt2 with a small uncorrelated spread along z.
    Tensor2D f{{-2, -2, 0.1}, {2, 2, 0.1}, {-1, -1, -0.1}, {1, 1, -0.1}};
    Projection p = Projection::fit(f);
    ASSERT_EQ(p.basis.rows(), 3u);
    EXPECT_NEAR(std::abs(p.basis(0, 0)), std::sqrt(0.5), 1e-9);
    EXPECT_NEAR(p.basis(0, 0), p.basis(1, 0), 1e-9);
    EXPECT_GT(p.basis(0, 0) + p.basis(1, 0), 0.0);
    EXPECT_NEAR(std::abs(p.basis(2, 1)), 1.0, 1e-9);
    EXPECT_GT(p.basis(2, 1), 0.0);
}
