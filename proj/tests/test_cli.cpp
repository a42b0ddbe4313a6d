#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "adrflat/simulation.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kScenario = std::string(ADRFLAT_SCENARIO_DIR) + "/paper_iv.toml";

struct Result {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("adrflat_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    Result run(const std::string& args, const std::string& env = "") const {
        const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
        const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" + ADRFLAT_CLI + "' " + args + " >'" +
                                out.string() + "' 2>'" + err.string() + "'";
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
    }

    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(dir_ / name) << text;
        return dir_ / name;
    }

    fs::path dir_;
};

std::string first_line(const fs::path& p) {
    std::ifstream is(p);
    std::string line;
    std::getline(is, line);
    return line;
}

} // namespace

TEST_F(Cli, RunWritesAllOutputs) {
    const auto r = run("run '" + kScenario + "' --duration 0.2 --out run1");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("seed: 1"), std::string::npos) << r.out;
    const fs::path d = dir_ / "run1";
    EXPECT_EQ(first_line(d / "log.csv"), adrflat::csv_header());
    const std::string metrics = slurp(d / "metrics.txt");
    EXPECT_NE(metrics.find("rmse_tracking="), std::string::npos);
    EXPECT_NE(metrics.find("seed=1"), std::string::npos);
    for (const char* fig : {"fig_tracking.svg", "fig_disturbance.svg"}) {
        const std::string svg = slurp(d / fig);
        EXPECT_NE(svg.find("width=\"800\""), std::string::npos) << fig;
        EXPECT_NE(svg.find("height=\"500\""), std::string::npos) << fig;
        EXPECT_NE(svg.find("</svg>"), std::string::npos) << fig;
    }
    EXPECT_TRUE(fs::exists(d / "scenario.toml"));
    EXPECT_TRUE(fs::exists(d / "parameterization.txt"));
}

TEST_F(Cli, SeedOverrideIsPrinted) {
    const auto r = run("run '" + kScenario + "' --duration 0.01 --seed 42 --out s");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("seed: 42"), std::string::npos) << r.out;
}

TEST_F(Cli, OutputRootFromEnvironment) {
    const auto r = run("run '" + kScenario + "' --duration 0.01", "ADRFLAT_OUT='" + (dir_ / "envout").string() + "'");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir_ / "envout" / "paper_iv" / "log.csv"));
    const auto d = run("run '" + kScenario + "' --duration 0.01", "ADRFLAT_OUT=");
    ASSERT_EQ(d.code, 0) << d.err;
    EXPECT_TRUE(fs::exists(dir_ / "out" / "paper_iv" / "metrics.txt"));
}

TEST_F(Cli, ConfigErrorsExitOne) {
    const auto bad = write("bad.toml", "[plant]\nm1 = 0.1\nmass3 = 2\n");
    auto r = run("run '" + bad.string() + "'");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
    EXPECT_EQ(run("run '" + (dir_ / "missing.toml").string() + "'").code, 1);
    EXPECT_EQ(run("run '" + kScenario + "' --controller pid").code, 1);
    EXPECT_EQ(run("run").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
}

TEST_F(Cli, UnstableRunExitsTwoWithPartialLog) {
    const auto sc = write("unstable.toml", "[controller]\nvariant = \"conventional\"\npoles = [50, 50, 60, 60]\n"
                                           "[sim]\nduration = 2.0\n");
    const auto r = run("run '" + sc.string() + "' --out u");
    EXPECT_EQ(r.code, 2) << r.err;
    const fs::path log = dir_ / "u" / "log.csv";
    ASSERT_TRUE(fs::exists(log));
    EXPECT_EQ(first_line(log), adrflat::csv_header());
    std::ifstream is(log);
    std::size_t rows = 0;
    for (std::string line; std::getline(is, line);)
        ++rows;
    EXPECT_GT(rows, 2u);
    EXPECT_LT(rows, 2001u);
}

TEST_F(Cli, SweepWritesSummaryAndRuns) {
    const auto r = run("sweep '" + kScenario + "' --param dob-bandwidth --values 500,1000 --duration 0.05 --out sw");
    ASSERT_EQ(r.code, 0) << r.err;
    const fs::path root = dir_ / "sw";
    std::ifstream is(root / "sweep_summary.csv");
    std::vector<std::string> lines;
    for (std::string line; std::getline(is, line);)
        lines.push_back(line);
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0], "value, rmse_tracking, est_rmse");
    EXPECT_EQ(lines[1].rfind("500, ", 0), 0u) << lines[1];
    EXPECT_EQ(lines[2].rfind("1000, ", 0), 0u) << lines[2];
    EXPECT_TRUE(fs::exists(root / "dob-bandwidth=500" / "log.csv"));
    EXPECT_TRUE(fs::exists(root / "dob-bandwidth=1000" / "metrics.txt"));
}

TEST_F(Cli, SweepRejectsUnknownParameter) {
    EXPECT_EQ(run("sweep '" + kScenario + "' --param plant.mass --values 1,2").code, 1);
    EXPECT_EQ(run("sweep '" + kScenario + "' --param dob-order --values 1.5").code, 1);
}

TEST_F(Cli, VerifySingleCheckPasses) {
    const auto r = run("verify --filter dob_gain_tuning");
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("PASS"), std::string::npos);
    EXPECT_NE(r.out.find("1/1 checks passed"), std::string::npos) << r.out;
}

TEST_F(Cli, VerifyReportsInjectedFault) {
    const auto r = run("verify --filter dob_gain_tuning --inject-fault gain");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("FAIL"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("psi_spectrum"), std::string::npos) << r.out;
    EXPECT_EQ(run("verify --inject-fault sign").code, 1);
    EXPECT_EQ(run("verify --filter no_such_check").code, 1);
}

TEST_F(Cli, VerifyGroupFilter) {
    const auto r = run("verify --filter model");
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("pole_placement"), std::string::npos);
    EXPECT_EQ(r.out.find("dob_"), std::string::npos) << r.out;
}
