#include <gtest/gtest.h>

#include <json.hpp>

#include <filesystem>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "ctc/cli.hpp"

using namespace ctc;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string corpus_file(const char *name) { return (fs::path(CTC_EXPERIMENTS_DIR) / name).string(); }

class TempDir : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("ctcsim_test_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const char *name) const { return (dir_ / name).string(); }

    static std::string read(const std::string &p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path dir_;
};

void expect_report_schema(const nlohmann::json &j) {
    for (const char *key : {"experiment", "converged", "iterations", "residual", "entropy_bits", "metrics", "rho_out"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    ASSERT_TRUE(j["rho_out"].is_array());
    for (const auto &row : j["rho_out"]) {
        ASSERT_EQ(row.size(), j["rho_out"].size());
        for (const auto &z : row) {
            ASSERT_TRUE(z.is_array());
            ASSERT_EQ(z.size(), 2u);
        }
    }
}

}  // namespace

using Cli = TempDir;

TEST_F(Cli, RunBrunWritesJson) {
    const auto json_path = path("out.json");
    const auto r = invoke({"run", "-f", corpus_file("brun_ch.ctc"), "--json", json_path});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(read(json_path));
    expect_report_schema(j);
    EXPECT_EQ(j["experiment"], "brun_ch");
    EXPECT_NEAR(j["metrics"]["success_probability"].get<double>(), 1.0, 1e-9);
    const auto &rho = j["rho_out"];
    EXPECT_NEAR(rho[0][0][0].get<double>(), 0.5, 1e-9);
    EXPECT_NEAR(rho[3][3][0].get<double>(), 0.5, 1e-9);
}

TEST_F(Cli, MetricKeysAreSorted) {
    const auto r = invoke({"run", "-f", corpus_file("classical_correlation.ctc"), "--json", "-"});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string text = r.out;
    const auto a = text.find("\"entropy_joint_bits\"");
    const auto b = text.find("\"mix_over_inputs\"");
    const auto c = text.find("\"mutual_information_bits\"");
    ASSERT_NE(a, std::string::npos);
    EXPECT_LT(a, b);
    EXPECT_LT(b, c);
}

TEST_F(Cli, OracleCheck) {
    const auto json_path = path("oracle.json");
    const auto r = invoke({"run", "-f", corpus_file("brun_ch.ctc"), "--oracle-check", "10", "--json", json_path});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(read(json_path));
    EXPECT_LT(j["metrics"]["oracle_distance"].get<double>(), 1e-9);
    EXPECT_EQ(j["metrics"]["oracle_depth"].get<double>(), 10.0);
    // Finite depth leaves a (1/2)^n remainder relative to the limit.
    EXPECT_LT(j["metrics"]["oracle_distance_to_fixed_point"].get<double>(), 2.0 * std::ldexp(1.0, -10));
}

TEST_F(Cli, OracleCheckBeyondCapIsADiagnostic) {
    const auto r = invoke({"run", "-f", corpus_file("brun_ch.ctc"), "--oracle-check", "20"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("cap"), std::string::npos) << r.err;
}

TEST_F(Cli, CsvTrace) {
    const auto csv_path = path("trace.csv");
    const auto r = invoke({"run", "-f", corpus_file("swap.ctc"), "--csv-trace", csv_path});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(read(csv_path));
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "step,successive_distance,residual,entropy_bits");
    std::string row;
    ASSERT_TRUE(static_cast<bool>(std::getline(in, row)));
    EXPECT_EQ(row.substr(0, 2), "1,");

    const auto t = invoke({"trace", "-f", corpus_file("ch_convergence_sweep.ctc")});
    ASSERT_EQ(t.code, 0) << t.err;
    EXPECT_EQ(t.out.substr(0, header.size()), header);
}

TEST_F(Cli, ScanSwapIsMultiple) {
    const auto json_path = path("scan.json");
    const auto r = invoke({"scan", "-f", corpus_file("swap.ctc"), "--samples", "16", "--seed", "7", "--json", json_path});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(read(json_path));
    EXPECT_EQ(j["classification"], "multiple");
    EXPECT_EQ(j["samples_used"], 18);
    EXPECT_NE(r.out.find("classification multiple"), std::string::npos);
}

TEST_F(Cli, SweepOverridesAndArrayOutput) {
    const auto json_path = path("sweep.json");
    const auto r = invoke({"sweep", "-f", corpus_file("swap_decoherence_sweep.ctc"), "--grid", "0.01,0.02", "--steps",
                        "100", "--json", json_path});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(read(json_path));
    ASSERT_TRUE(j.is_array());
    ASSERT_EQ(j.size(), 2u);
    for (const auto &rep : j) {
        expect_report_schema(rep);
        EXPECT_EQ(rep["metrics"]["steps"].get<double>(), 100.0);
    }
    const auto n_axis = invoke({"sweep", "-f", corpus_file("swap.ctc"), "--axis", "n", "--grid", "0,1,2"});
    EXPECT_EQ(n_axis.code, 0) << n_axis.err;
    const auto no_grid = invoke({"sweep", "-f", corpus_file("swap.ctc")});
    EXPECT_EQ(no_grid.code, 1);
    const auto bad_grid = invoke({"sweep", "-f", corpus_file("swap.ctc"), "--grid", "0.1,x"});
    EXPECT_EQ(bad_grid.code, 1);
}

TEST_F(Cli, SolveSubcommand) {
    const auto r = invoke({"solve", "--gate", "CH", "--control", "lower", "--state", "-", "--damping", "1", "--json", "-"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    expect_report_schema(j);
    EXPECT_NEAR(j["rho_out"][1][1][0].get<double>(), 1.0, 1e-10);

    const auto budget = invoke({"solve", "--gate", "CH", "--state", "-", "--max-iter", "3"});
    EXPECT_EQ(budget.code, 2);
    EXPECT_EQ(invoke({"solve", "--gate", "Toffoli"}).code, 1);
    EXPECT_EQ(invoke({"solve", "--state", "00"}).code, 1);
    EXPECT_EQ(invoke({"solve", "--tol", "1e-20"}).code, 1);
}

TEST_F(Cli, DiagnosticsExitOne) {
    const auto r = invoke({"run", "-f", (fs::path(CTC_TEST_DATA_DIR) / "bad_weights.ctc").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("bad_weights.ctc:3:1: error: branch weights sum to 1.2"), std::string::npos) << r.err;
    EXPECT_TRUE(r.out.empty());

    EXPECT_EQ(invoke({"run", "-f", path("missing.ctc")}).code, 1);
    EXPECT_EQ(invoke({}).code, 1);
    EXPECT_EQ(invoke({"frobnicate"}).code, 1);
    EXPECT_EQ(invoke({"run"}).code, 1);
}

TEST_F(Cli, NonConvergenceExitsTwo) {
    const auto file = path("slow.ctc");
    std::ofstream(file) << "experiment slow\ngate CH(control=lower)\nbranch 1: ket \"-\"\nsolver { max_iter=5 }\n";
    const auto r = invoke({"run", "-f", file});
    EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, HelpSucceeds) {
    const auto r = invoke({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("run"), std::string::npos);
}
