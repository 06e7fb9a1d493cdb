#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "finkey/runner.hpp"

using namespace finkey;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({
    // small phase-error BB84 sweep
    "protocol": {"preset": "bb84", "p_z": 0.9, "povm": "phase"},
    "channel": {"qber": 0.02},
    "epsilon": {"all": 0.25e-8},
    "m": {"rule": "basis"},
    "f_ec": 1.2,
    "N": [1e7, 1e8, 1e9]
})";

const char* kSampled = R"({
    "protocol": {"preset": "bb84", "p_z": 0.8, "povm": "phase"},
    "channel": {"qber": 0.02},
    "statistics": {"sampling": "sampled", "sample_below": 1e9, "trials": 3},
    "epsilon": {"all": 0.25e-8},
    "m": {"rule": "basis"},
    "grid": {"channel.qber": [0.01, 0.03]},
    "N": [1e6, 1e7]
})";

std::string tmp(const std::string& name) { return (fs::path(testing::TempDir()) / name).string(); }

std::string write_file(const std::string& name, const std::string& text) {
    const auto p = tmp(name);
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cli(const std::string& args) {
    const std::string cmd = std::string(FINKEY_CLI) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::vector<ResultRow> run_text(const std::string& text, int workers = 1) {
    const Json cfg = parse_config(text);
    const auto axes = grid_axes(cfg);
    validate_config(cfg, axes);
    RunOptions opt;
    opt.workers = workers;
    return run_points(grid_points(cfg, axes), opt);
}

std::string csv_of(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    write_csv(os, rows);
    return os.str();
}

}  // namespace

TEST(Config, ParseErrorReportsLineAndColumn) {
    try {
        parse_config("{\n  \"N\": 1e6,\n  \"m\": ]\n}", "bad.json");
        FAIL() << "no exception";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("bad.json:3:"), std::string::npos) << msg;
    }
}

TEST(Config, UnknownKeyNamesItsPath) {
    Json cfg = parse_config(kSmall);
    cfg["protocol"]["pz"] = 0.5;
    try {
        validate_config(cfg, grid_axes(cfg));
        FAIL() << "no exception";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("protocol.pz"), std::string::npos) << e.what();
    }
}

TEST(Config, GridOfThreeNGivesThreeRows) {
    const auto rows = run_text(kSmall);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].in.N, 1e7);
    EXPECT_EQ(rows[2].in.N, 1e9);
    for (const auto& r : rows) EXPECT_EQ(r.status, "ok");
    EXPECT_LT(rows[0].rate, rows[2].rate);
}

TEST(Config, NAxisIsInnermost) {
    const Json cfg = parse_config(kSampled);
    const auto pts = grid_points(cfg, grid_axes(cfg));
    ASSERT_EQ(pts.size(), 4u);
    EXPECT_EQ(pts[0]["N"].get<double>(), 1e6);
    EXPECT_EQ(pts[1]["N"].get<double>(), 1e7);
    EXPECT_EQ(pts[1]["channel"]["qber"].get<double>(), 0.01);
    EXPECT_EQ(pts[2]["channel"]["qber"].get<double>(), 0.03);
}

TEST(Config, ListAndGridFormsAgree) {
    Json cfg = parse_config(kSmall);
    cfg["grid"] = {{"channel.qber", {0.02}}};
    const auto a = run_text(kSmall), b = run_text(cfg.dump());
    EXPECT_EQ(csv_of(a), csv_of(b));
}

TEST(Config, OverrideAxisReplacesOrInsertsBeforeN) {
    const Json cfg = parse_config(kSampled);
    auto axes = grid_axes(cfg);
    override_axis(axes, {"channel.qber", {Json(0.05)}});
    ASSERT_EQ(axes.size(), 2u);
    EXPECT_EQ(axes[0].values.size(), 1u);
    override_axis(axes, {"f_ec", {Json(1.1), Json(1.2)}});
    ASSERT_EQ(axes.size(), 3u);
    EXPECT_EQ(axes[1].key, "f_ec");
    EXPECT_EQ(axes[2].key, "N");
}

TEST(Runner, WorkerCountDoesNotChangeOutput) {
    EXPECT_EQ(csv_of(run_text(kSampled, 1)), csv_of(run_text(kSampled, 4)));
}

TEST(Runner, SampledTrialsReportSpread) {
    const auto rows = run_text(kSampled);
    ASSERT_EQ(rows.size(), 4u);
    for (const auto& r : rows) {
        EXPECT_EQ(r.in.trials, 3);
        EXPECT_GE(r.rate_std, 0.0);
    }
}

TEST(Runner, CsvRoundTripKeepsFullPrecision) {
    const auto rows = run_text(kSmall);
    std::istringstream is(csv_of(rows));
    const auto table = read_csv(is);
    ASSERT_EQ(table.size(), rows.size() + 1);
    const auto& hdr = table[0];
    EXPECT_EQ(hdr, csv_columns());
    auto col = [&](const std::string& name) {
        return static_cast<size_t>(std::find(hdr.begin(), hdr.end(), name) - hdr.begin());
    };
    for (size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(std::stod(table[i + 1][col("rate")]), rows[i].rate);
        EXPECT_EQ(std::stod(table[i + 1][col("beta")]), rows[i].detail.beta);
        EXPECT_EQ(std::stod(table[i + 1][col("alpha_hat")]), rows[i].detail.alpha_hat);
        EXPECT_EQ(std::stod(table[i + 1][col("N")]), rows[i].in.N);
        EXPECT_EQ(table[i + 1][col("status")], "ok");
    }
}

TEST(Runner, OptimizePicksTheBestCandidate) {
    Json cfg = parse_config(kSmall);
    cfg["N"] = 1e8;
    cfg["optimize"] = {{"protocol.p_z", {{"values", {0.5, 0.7, 0.9}}}}};
    const auto best = run_text(cfg.dump());
    ASSERT_EQ(best.size(), 1u);
    double top = -1.0;
    for (double pz : {0.5, 0.7, 0.9}) {
        Json c = parse_config(kSmall);
        c["N"] = 1e8;
        c["protocol"]["p_z"] = pz;
        top = std::max(top, run_text(c.dump())[0].rate);
    }
    EXPECT_EQ(best[0].rate, top);
    EXPECT_EQ(best[0].in.p_z, 0.9);
}

TEST(Cli, ValidateAndRun) {
    const auto cfg = write_file("small.json", kSmall);
    EXPECT_EQ(cli("validate " + cfg), 0);
    const auto out = tmp("small.csv");
    fs::remove(out);
    EXPECT_EQ(cli("run " + cfg + " --out " + out), 0);
    EXPECT_TRUE(fs::exists(out));
    const auto js = tmp("small.json.out");
    EXPECT_EQ(cli("run " + cfg + " --format json --out " + js), 0);
    std::ifstream in(js);
    const Json parsed = Json::parse(in);
    EXPECT_EQ(parsed.size(), 3u);
}

TEST(Cli, InvalidEpsilonWritesNothing) {
    Json cfg = parse_config(kSmall);
    cfg["epsilon"] = {{"all", 0.25e-8}, {"pe", -1e-9}};
    const auto path = write_file("neg.json", cfg.dump());
    const auto out = tmp("neg.csv");
    fs::remove(out);
    EXPECT_EQ(cli("run " + path + " --out " + out), 1);
    EXPECT_FALSE(fs::exists(out));
    EXPECT_EQ(cli("validate " + path), 1);
}

TEST(Cli, SameSeedIsByteIdentical) {
    const auto cfg = write_file("sampled.json", kSampled);
    const auto a = tmp("s_a.csv"), b = tmp("s_b.csv"), c = tmp("s_c.csv");
    ASSERT_EQ(cli("run " + cfg + " --seed 7 --out " + a), 0);
    ASSERT_EQ(cli("run " + cfg + " --seed 7 --workers 3 --out " + b), 0);
    ASSERT_EQ(cli("run " + cfg + " --seed 8 --out " + c), 0);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_NE(slurp(a), slurp(c));
}

TEST(Cli, SweepAddsAxis) {
    const auto cfg = write_file("sweep.json", kSmall);
    const auto out = tmp("sweep.csv");
    ASSERT_EQ(cli("sweep " + cfg + " --set f_ec=1.1,1.3 --out " + out), 0);
    std::ifstream in(out);
    EXPECT_EQ(read_csv(in).size(), 1u + 6u);
}

TEST(Cli, BadArgumentsFail) {
    EXPECT_NE(cli("run /nonexistent.json"), 0);
    EXPECT_NE(cli("frobnicate"), 0);
    const auto bad = write_file("broken.json", "{ \"N\": ");
    EXPECT_EQ(cli("validate " + bad), 1);
}
