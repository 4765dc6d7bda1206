#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "lodiag/cli.hpp"
#include "lodiag/csv.hpp"
#include "lodiag/estimator.hpp"
#include "support/checks.hpp"

using namespace lodiag;
namespace fs = std::filesystem;

namespace {

const std::string kToyPanel = std::string(LODIAG_TEST_DATA_DIR) + "/toy_returns.csv";

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("lodiag_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static inline int counter = 0;
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  os << text;
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("numeric CSV with and without a header") {
  std::istringstream with("a,b\n1,2\n3.5,-4e-3\n");
  const NumericTable t = read_numeric_csv(with);
  REQUIRE(t.header.has_value());
  CHECK(t.header->at(1) == "b");
  CHECK(t.values.rows() == 2);
  CHECK(t.values(1, 1) == -4e-3);

  std::istringstream without("1, 2\r\n\n3,4\n");
  const NumericTable u = read_numeric_csv(without);
  CHECK_FALSE(u.header.has_value());
  CHECK(u.values(1, 0) == 3.0);
  CHECK(u.values(0, 1) == 2.0);
}

TEST_CASE("numeric CSV errors") {
  std::istringstream blank("1,,3\n");
  CHECK_THROWS_AS(read_numeric_csv(blank), ParseError);
  std::istringstream ragged("1,2\n3\n");
  CHECK_THROWS_AS(read_numeric_csv(ragged), ParseError);
  std::istringstream junk("1,2\n3,x\n");
  CHECK_THROWS_AS(read_numeric_csv(junk), ParseError);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_numeric_csv(empty), ParseError);
  std::istringstream header_only("a,b\n");
  CHECK_THROWS_AS(read_numeric_csv(header_only), ParseError);
  CHECK_THROWS_AS(read_numeric_csv_file("/nonexistent/file.csv"), ParseError);
}

TEST_CASE("matrix CSV round-trip is lossless") {
  Rng rng(89);
  const MatrixXd m = lodiag::testing::gaussian_matrix(7, 5, rng) * 1e3;
  std::stringstream ss;
  write_matrix_csv(ss, m);
  const NumericTable back = read_numeric_csv(ss);
  CHECK((back.values - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("returns panel parsing") {
  std::istringstream good("date,X,Y\n2001-01,0.01,0.02\n2001-02,-0.01,0.03\n");
  const ReturnsPanel p = read_returns_panel(good);
  CHECK(p.assets == std::vector<std::string>{"X", "Y"});
  CHECK(p.dates.back() == "2001-02");
  CHECK(p.returns(1, 0) == -0.01);

  std::istringstream missing("date,X,Y\n2001-01,0.01,\n2001-02,-0.01,0.03\n");
  CHECK_THROWS_AS(read_returns_panel(missing), ParseError);
  std::istringstream short_row("date,X,Y\n2001-01,0.01\n2001-02,-0.01,0.03\n");
  CHECK_THROWS_AS(read_returns_panel(short_row), ParseError);
  std::istringstream bad_header("when,X,Y\n2001-01,0.01,0.02\n2001-02,-0.01,0.03\n");
  CHECK_THROWS_AS(read_returns_panel(bad_header), ParseError);
  std::istringstream unordered("date,X\n2001-02,0.01\n2001-01,0.02\n");
  CHECK_THROWS_AS(read_returns_panel(unordered), ParseError);
  std::istringstream one_row("date,X\n2001-02,0.01\n");
  CHECK_THROWS_AS(read_returns_panel(one_row), ParseError);
}

TEST_CASE("toy panel ingestion and backtest") {
  const ReturnsPanel panel = read_returns_panel_file(kToyPanel);
  CHECK(panel.num_assets() == 10);
  CHECK(panel.periods() == 96);
  CHECK(panel.dates.front() == "2000-01");
  for (auto kind : {EstimatorKind::Sample, EstimatorKind::Diagonal, EstimatorKind::LowRankDiagonal}) {
    BacktestConfig cfg;
    cfg.estimator = kind;
    cfg.candidate_ranks = {2, 4};
    cfg.delta_grid = {0.6, 1.2};
    const PortfolioResult res = rolling_backtest(panel, cfg);
    CHECK(res.realized_returns.size() == 24);
    CHECK(std::isfinite(res.sharpe));
    for (const auto& w : res.weights) CHECK(std::abs(w.sum() - 1.0) <= 1e-10);
  }
}

TEST_CASE("portfolio CSV and summary") {
  PortfolioResult r;
  r.dates = {"d1", "d2"};
  r.weights = {VectorXd::Constant(2, 0.5), VectorXd::Constant(2, 0.5)};
  r.realized_returns = {0.01, 0.03};
  r.mean_return = 0.02;
  r.stdev = std::sqrt(2e-4);
  r.std_error = 0.01;
  r.sharpe = r.mean_return / r.stdev;
  std::ostringstream csv;
  write_portfolio_csv(csv, r, {"X", "Y"});
  CHECK(csv.str() == "period,date,return,X,Y\n1,d1,0.01,0.5,0.5\n2,d2,0.029999999999999999,0.5,0.5\n");
  std::ostringstream sum;
  write_portfolio_summary(sum, r);
  CHECK(sum.str().rfind("statistic,value\nperiods,2\nmean,0.02\n", 0) == 0);
}

TEST_CASE("cli usage errors exit 1 with a synopsis") {
  CliRun r = run_cli({});
  CHECK(r.code == 1);
  CHECK(r.err.find("Usage") != std::string::npos);
  r = run_cli({"simulate", "--bogus"});
  CHECK(r.code == 1);
  CHECK(r.err.find("--bogus") != std::string::npos);
  r = run_cli({"frobnicate"});
  CHECK(r.code == 1);
  r = run_cli({"simulate", "--format", "xml"});
  CHECK(r.code == 1);
  r = run_cli({"estimate", "--ranks", "1"});
  CHECK(r.code == 1);
  r = run_cli({"backtest", "--panel", "/nonexistent.csv"});
  CHECK(r.code == 1);
  r = run_cli({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("estimate") != std::string::npos);
}

TEST_CASE("cli data errors exit 2") {
  TempDir dir;
  write_file(dir.file("bad.csv"), "1,2\n3,\n");
  CHECK(run_cli({"estimate", "--data", dir.file("bad.csv")}).code == 2);
  write_file(dir.file("cov.csv"), "1,0\n0,1\n");
  CHECK(run_cli({"estimate", "--cov", dir.file("cov.csv")}).code == 2);  // --n missing
  CHECK(run_cli({"simulate", "--example", "3", "--p", "12", "--reps", "1"}).code == 2);
  CHECK(run_cli({"backtest", "--panel", kToyPanel, "--window", "100"}).code == 2);
}

TEST_CASE("cli estimate writes a precision matrix that re-reads exactly") {
  TempDir dir;
  Rng rng(97);
  const MatrixXd x = lodiag::testing::gaussian_matrix(40, 6, rng);
  std::ostringstream data;
  data << "a,b,c,d,e,f\n";
  write_matrix_csv(data, x);
  write_file(dir.file("x.csv"), data.str());

  const CliRun r = run_cli({"estimate", "--data", dir.file("x.csv"), "--ranks", "1,2", "--delta", "1.0", "--out",
                            dir.file("theta.csv")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("selected_rank: ") != std::string::npos);
  CHECK(r.out.find("l_eigenvalues: ") != std::string::npos);
  CHECK(r.out.find("d_diagonal: ") != std::string::npos);

  const std::vector<int> ranks{1, 2};
  const FitResult fit = fit_rank_penalized(sample_covariance(x), ranks, 40, 1.0, FitConfig{});
  const MatrixXd theta = read_numeric_csv_file(dir.file("theta.csv")).values;
  CHECK((theta - fit.decomposition.theta.matrix()).cwiseAbs().maxCoeff() <= 1e-12);

  // Precomputed covariance gives the same estimate.
  std::ostringstream cov;
  write_matrix_csv(cov, sample_covariance(x).matrix());
  write_file(dir.file("s.csv"), cov.str());
  const CliRun c = run_cli({"estimate", "--cov", dir.file("s.csv"), "--n", "40", "--ranks", "1,2", "--out",
                            dir.file("theta2.csv")});
  REQUIRE(c.code == 0);
  const MatrixXd theta2 = read_numeric_csv_file(dir.file("theta2.csv")).values;
  CHECK((theta2 - theta).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("cli simulate is reproducible and thread-independent") {
  TempDir dir;
  const std::vector<std::string> base{"simulate", "--example", "1", "--p", "10", "--n", "30", "--reps",
                                      "3",        "--seed",    "7", "--ranks", "1,2", "--deltas", "0.8,1.2"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args);
  };
  const CliRun a = with({});
  REQUIRE(a.code == 0);
  CHECK(a.out.rfind("method,mean_kl,stderr\nS,", 0) == 0);
  CHECK(with({"--threads", "2"}).out == a.out);
  CHECK(with({"--seed", "8"}).out != a.out);

  REQUIRE(with({"--out", dir.file("t.csv")}).code == 0);
  std::ifstream in(dir.file("t.csv"));
  std::stringstream file;
  file << in.rdbuf();
  CHECK(file.str() == a.out);

  const CliRun table = with({"--format", "table"});
  CHECK(table.out.find("Example 1") != std::string::npos);
}

TEST_CASE("cli rank-recovery and backtest") {
  const CliRun rr = run_cli({"rank-recovery", "--example", "1", "--p", "10", "--n", "30", "--reps", "2", "--k", "3",
                             "--ranks", "1,2"});
  REQUIRE(rr.code == 0);
  CHECK(rr.out.rfind("index,true_l0,mean,lower,upper\n", 0) == 0);

  const CliRun bt = run_cli({"backtest", "--panel", kToyPanel, "--estimator", "diagonal"});
  REQUIRE(bt.code == 0);
  CHECK(bt.out.rfind("period,date,return,AAA,", 0) == 0);
  CHECK(bt.out.find("\nstatistic,value\nperiods,24\n") != std::string::npos);
  CHECK(bt.out.find("sharpe,") != std::string::npos);
}

}  // TEST_SUITE
