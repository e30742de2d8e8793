#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "support.hpp"

using namespace qnmlpt;
using namespace qnmlpt::test;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("qnmlpt-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string file(const std::string& name, const std::string& text = {}) {
    const auto p = (dir_ / name).string();
    if (!text.empty()) std::ofstream(p) << text;
    return p;
  }

  CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "qnmlpt-cli");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
  }

  static std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("no column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
  LD at(std::size_t row, const std::string& name) const { return std::stold(rows[row][col(name)]); }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

Csv parse_csv(const std::string& text) {
  Csv c;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      c.comments.push_back(line);
    } else if (c.header.empty()) {
      c.header = split(line);
    } else {
      c.rows.push_back(split(line));
    }
  }
  return c;
}

const char* kPtSolve = R"(scenario: solve
potential: {kind: poschl_teller, v0: 5, b: 1}
mode: {indices: [0, 1]}
domain: {L: 5}
)";

const char* kStepSolve = R"(scenario: solve
potential: {kind: step, v0: 100, b: 1}
mode: {indices: [1, 2]}
)";

const char* kMuSweep = R"(scenario: sweep
potential: {kind: step, v0: 100, b: 1}
mode: {index: 1}
perturbation: {kind: bump, x0: 0.3, w: 0.1}
domain: {a: 1.6}
sweep: {kind: mu-scaling, from: 0.001, to: 0.1, count: 7}
)";

}  // namespace

TEST_F(Cli, SolvePoschlTeller) {
  const auto out = file("pt.csv");
  const auto r = run({"solve", "--runfile", file("pt.yaml", kPtSolve), "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = parse_csv(slurp(out));
  ASSERT_EQ(csv.header, (std::vector<std::string>{"mode_index", "re_omega", "im_omega", "residual"}));
  ASSERT_EQ(csv.rows.size(), 2u);
  EXPECT_NEAR(csv.at(0, "re_omega"), std::sqrt(4.75L), 1e-15);
  EXPECT_NEAR(csv.at(0, "im_omega"), -0.5L, 1e-15);
  EXPECT_NEAR(csv.at(1, "im_omega"), -1.5L, 1e-14);
  EXPECT_TRUE(fs::exists(out + ".json"));
}

TEST_F(Cli, SolveStepMatchesBisection) {
  const auto out = file("step.csv");
  const auto r = run({"solve", "--runfile", file("step.yaml", kStepSolve), "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = parse_csv(slurp(out));
  ASSERT_EQ(csv.rows.size(), 2u);
  for (int k : {1, 2}) {
    const LD c = k * pi_v<LD>;  // root k lies just below k pi
    const CL q = step_q_by_bisection<LD>(100, 1, CL(c - 1.2L, -1), CL(c + 0.5L, 0));
    CL w = std::sqrt(q * q + LD(100));
    if (w.real() < 0) w = -w;
    const CL got(csv.at(k - 1, "re_omega"), csv.at(k - 1, "im_omega"));
    EXPECT_LT(rel(got, w), 1e-12) << "root " << k;
  }
}

TEST_F(Cli, HelpAndMissingArguments) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"solve"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"solve", "--runfile", file("nowhere.yaml")}).code, 2);
}

TEST_F(Cli, MalformedRunFile) {
  const auto r = run({"solve", "--runfile", file("bad.yaml", "potential: {kind: step, v0: [1,\n")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line"), std::string::npos) << r.err;
  const auto u = run({"solve", "--runfile", file("unknown.yaml", "potential:\n  kind: step\n  depth: 3\n")});
  EXPECT_EQ(u.code, 2);
  EXPECT_NE(u.err.find("line 3"), std::string::npos) << u.err;
}

TEST_F(Cli, EmptySweepRange) {
  const auto r = run({"sweep", "--runfile", file("s.yaml", R"(potential: {kind: step, v0: 100, b: 1}
perturbation: {kind: bump, x0: 0.3, w: 0.1}
sweep: {kind: mu-scaling, from: 0.1, to: 0.001, count: 5}
)")});
  EXPECT_EQ(r.code, 2) << r.err;
  const auto c = run({"sweep", "--runfile", file("c.yaml", R"(potential: {kind: step, v0: 100, b: 1}
perturbation: {kind: bump, x0: 0.3, w: 0.1}
sweep: {kind: mu-scaling, values: []}
)")});
  EXPECT_EQ(c.code, 2) << c.err;
}

TEST_F(Cli, PrecisionExhaustedExitCode) {
  const auto rf = file("p.yaml", R"(potential: {kind: poschl_teller, v0: 5, b: 1, tail_terms: 10}
mode: {index: 1}
perturbation: {kind: pt-width}
domain: {L: 14}
solver: {order: 1, series_fill_from: 3}
)");
  const auto off = run({"perturb", "--runfile", rf, "--subtract-asymptotics", "false", "--out", file("off.csv")});
  EXPECT_EQ(off.code, 4) << off.err;
  EXPECT_NE(off.err.find("subtraction"), std::string::npos);
  const auto on_out = file("on.csv");
  const auto on = run({"perturb", "--runfile", rf, "--out", on_out});
  ASSERT_EQ(on.code, 0) << on.err;
  const auto csv = parse_csv(slurp(on_out));
  const CL w1(csv.at(0, "re_omega_n"), csv.at(0, "im_omega_n"));
  EXPECT_LT(rel(w1, pt_exact<LD>(1, 5).omega1), 1e-8);
}

TEST_F(Cli, ZeroPerturbationGivesZeroRows) {
  const auto out = file("z.csv");
  const auto r = run({"perturb", "--runfile", file("z.yaml", R"(potential: {kind: step, v0: 100, b: 1}
perturbation: {kind: none}
)"), "--order", "3", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = parse_csv(slurp(out));
  ASSERT_EQ(csv.rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(csv.at(i, "order"), LD(i + 1));
    EXPECT_EQ(csv.at(i, "re_omega_n"), 0);
    EXPECT_EQ(csv.at(i, "im_omega_n"), 0);
  }
}

TEST_F(Cli, WidthPerturbationFirstOrder) {
  const auto out = file("w.csv");
  const auto r = run({"perturb", "--runfile", file("w.yaml", R"(potential: {kind: poschl_teller, v0: 5, b: 1}
mode: {index: 0}
perturbation: {kind: pt-width}
)"), "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = parse_csv(slurp(out));
  ASSERT_EQ(csv.header, (std::vector<std::string>{"order", "re_omega_n", "im_omega_n", "digits_lost",
                                                  "L_independence_residual"}));
  ASSERT_EQ(csv.rows.size(), 1u);
  const CL w1(csv.at(0, "re_omega_n"), csv.at(0, "im_omega_n"));
  EXPECT_LT(rel(w1, pt_exact<LD>(0, 5).omega1), 1e-8);
  EXPECT_LT(csv.at(0, "L_independence_residual"), 1e-8);
  EXPECT_EQ(run({"perturb", "--runfile", file("w.yaml"), "--order", "2", "--out", out}).code, 3);
}

TEST_F(Cli, SweepFitPredictsPerturbError) {
  // The second-order error at mu = 0.01 from perturb lies on the slope-3
  // line fitted by the mu-scaling sweep.
  const auto sweep_out = file("mu.csv");
  const auto s = run({"sweep", "--runfile", file("mu.yaml", kMuSweep), "--out", sweep_out});
  ASSERT_EQ(s.code, 0) << s.err;
  const auto sweep = parse_csv(slurp(sweep_out));
  LD slope = 0, intercept = 0;
  int fits = 0;
  for (const auto& c : sweep.comments) {
    if (c.rfind("# fit order=", 0) != 0) continue;
    ++fits;
    if (c.find("order=2") == std::string::npos) continue;
    std::sscanf(c.c_str(), "# fit order=2 slope=%Lf intercept=%Lf", &slope, &intercept);
  }
  EXPECT_EQ(fits, 3);
  EXPECT_NEAR(slope, 3, 0.15);

  const auto pert_out = file("p.csv");
  const auto json_out = file("p.json");
  const auto p = run({"perturb", "--runfile", file("p.yaml", R"(potential: {kind: step, v0: 100, b: 1}
mode: {index: 1}
perturbation: {kind: bump, x0: 0.3, w: 0.1, mu: 0.01}
)"), "--order", "2", "--out", pert_out, "--json", json_out});
  ASSERT_EQ(p.code, 0) << p.err;
  const auto d = nlohmann::json::parse(slurp(json_out));
  const LD err2 = d.at("errors").at(2).get<double>();
  const LD predicted = std::pow(10.0L, intercept + slope * std::log10(0.01L));
  EXPECT_LT(std::abs(std::log10(err2 / predicted)), 0.3) << double(err2) << " vs " << double(predicted);
}

TEST_F(Cli, CsvRoundTripAndFormat) {
  const auto out = file("x0.csv");
  const auto r = run({"sweep", "--runfile", file("x0.yaml", R"(potential: {kind: step, v0: 100, b: 1}
perturbation: {kind: bump, w: 0.1, mu: 10}
sweep: {kind: bump-x0, from: 0.1, to: 1.4, count: 5}
)"), "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = slurp(out);
  EXPECT_EQ(text.find('\r'), std::string::npos);
  ASSERT_FALSE(text.empty());
  EXPECT_EQ(text.back(), '\n');
  const auto csv = parse_csv(text);
  ASSERT_EQ(csv.rows.size(), 5u);
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const CL exact(csv.at(i, "re_exact"), csv.at(i, "im_exact"));
    EXPECT_EQ(csv.at(i, "converged"), 1);
    EXPECT_LT(step_bump_residual(100, 1, 1.6L, csv.at(i, "x0"), 0.1L, 10, exact), 1e-13);
    EXPECT_LT(csv.at(i, "err2"), csv.at(i, "err1"));
    // 17 significant digits: a double printed back reproduces the field.
    const auto& field = csv.rows[i][csv.col("re_exact")];
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", std::stod(field));
    EXPECT_EQ(std::stod(buf), std::stod(field));
    EXPECT_GE(field.size(), 17u) << field;
  }
  // Identical input gives identical bytes.
  const auto again = file("x0b.csv");
  ASSERT_EQ(run({"sweep", "--runfile", file("x0.yaml"), "--out", again}).code, 0);
  EXPECT_EQ(slurp(again), text);
}

TEST_F(Cli, DemoReportsThreeRoutes) {
  const auto out = file("demo.csv");
  const auto json_out = file("demo.json");
  const auto r = run({"demo", "--runfile", file("demo.yaml", R"(potential: {kind: poschl_teller, v0: 5, b: 1, tail_terms: 4}
mode: {index: 1}
domain: {L: 5}
sweep: {values: [4, 5, 6]}
)"), "--out", out, "--json", json_out});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = parse_csv(slurp(out));
  EXPECT_EQ(csv.rows.size(), 3u);
  const auto d = nlohmann::json::parse(slurp(json_out));
  EXPECT_FALSE(d.empty());
}
