#include "rmtspca/io.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int status = -1;
  std::string out;
};

CliRun run_cli(const std::string& args) {
  const std::string cmd = std::string(RMTSPCA_CLI_PATH) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, got);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  return json::parse(in);
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rmtspca_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

// Poisson counts whose log-rates carry a rank-one signal on 15 genes.
oracle::Matrix spiked_counts(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  oracle::Matrix counts(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double score = normal(rng);
    const double depth = std::exp(0.3 * normal(rng));
    for (Eigen::Index j = 0; j < p; ++j) {
      const double signal = j < 15 ? 0.8 * score : 0.0;
      std::poisson_distribution<int> pois(depth * 3.0 * std::exp(signal));
      counts(i, j) = pois(rng);
    }
  }
  return counts;
}

}  // namespace

TEST_F(CliTest, SynthThenSpectrumMatchesPredictions) {
  const CliRun synth = run_cli("synth --scenario c --seed 3 --n 1590 --p 1995 --output-dir " + path("s"));
  ASSERT_EQ(synth.status, 0);
  const json predicted = json::parse(synth.out);
  std::vector<double> expect;
  for (const auto& s : predicted["covariance_spikes"])
    for (double x : s["predicted_outliers"]) expect.push_back(x);
  for (const auto& s : predicted["mean_spikes"])
    for (double x : s["predicted_outliers"]) expect.push_back(x);
  ASSERT_EQ(expect.size(), 2u);

  const CliRun spectrum = run_cli("spectrum --input " + path("s/data.tsv") + " --output-dir " + path("t"));
  ASSERT_EQ(spectrum.status, 0);
  const json report = json::parse(spectrum.out);
  std::vector<double> lambdas;
  for (const auto& o : report["outliers"]) lambdas.push_back(o["lambda"]);
  ASSERT_GE(lambdas.size(), 2u);
  for (double x : expect) {
    double best = 1e300;
    for (double l : lambdas) best = std::min(best, std::abs(l - x) / x);
    EXPECT_LT(best, 0.02) << "prediction " << x;
  }
  EXPECT_EQ(read_json(path("t/report.json"))["command"], "spectrum");
  EXPECT_TRUE(fs::exists(path("t/eigenvalues.tsv")));
  EXPECT_TRUE(fs::exists(path("t/density.tsv")));
}

TEST_F(CliTest, PureNoiseSpectrum) {
  rmtspca::io::write_delimited(path("noise.tsv"), oracle::gaussian(1000, 500, 9));
  const CliRun r = run_cli("spectrum --input " + path("noise.tsv") + " --output-dir " + path("o"));
  ASSERT_EQ(r.status, 0);
  const json report = json::parse(r.out);
  EXPECT_TRUE(report["outliers"].empty());
  EXPECT_LT(report["ks"]["distance"].get<double>(), 0.02);
  EXPECT_TRUE(report["overlap_bound"].is_null());
}

TEST_F(CliTest, MissingInputIsIoError) {
  const CliRun r = run_cli("spectrum --input " + path("nope.tsv") + " --output-dir " + path("o"));
  EXPECT_NE(r.status, 0);
  const json err = read_json(path("o/error.json"));
  EXPECT_EQ(err["error"]["code"], "IoError");
  EXPECT_EQ(err["error"]["module"], "io");
}

TEST_F(CliTest, ModuleErrorsKeepProvenance) {
  oracle::Matrix x = oracle::gaussian(20, 10, 1);
  x.col(3).setZero();
  rmtspca::io::write_delimited(path("z.tsv"), x);
  const CliRun r = run_cli("biwhiten --input " + path("z.tsv") + " --output-dir " + path("o"));
  EXPECT_EQ(r.status, 2);
  const json err = read_json(path("o/error.json"));
  EXPECT_EQ(err["error"]["code"], "ZeroCol");
  EXPECT_EQ(err["error"]["module"], "biwhiten");
}

TEST_F(CliTest, ConfigFileWithOverrides) {
  rmtspca::io::write_delimited(path("x.tsv"), oracle::gaussian(200, 100, 2));
  std::ofstream(path("cfg.json")) << R"({"tol": 1e-6, "max-iter": 7})";
  const CliRun r = run_cli("biwhiten --input " + path("x.tsv") + " --config " + path("cfg.json") +
                        " --max-iter 50 --output-dir " + path("o"));
  ASSERT_EQ(r.status, 0);
  const json report = read_json(path("o/report.json"));
  EXPECT_EQ(report["parameters"]["tol"], 1e-6);
  EXPECT_EQ(report["parameters"]["max-iter"], 50);

  std::ofstream(path("bad.json")) << R"({"penalty": 1.0})";
  const CliRun bad = run_cli("biwhiten --input " + path("x.tsv") + " --config " + path("bad.json") +
                          " --output-dir " + path("b"));
  EXPECT_EQ(bad.status, 2);
  EXPECT_EQ(read_json(path("b/error.json"))["error"]["code"], "FormatError");
}

TEST_F(CliTest, PipelineIsReproducible) {
  rmtspca::io::write_delimited(path("counts.tsv"), spiked_counts(400, 200, 5));
  const std::string args = "pipeline --input " + path("counts.tsv") + " --output-dir ";
  const CliRun a = run_cli(args + path("a"));
  const CliRun b = run_cli(args + path("b"));
  ASSERT_EQ(a.status, 0);
  ASSERT_EQ(b.status, 0);
  EXPECT_EQ(a.out, b.out);
  const json report = json::parse(a.out);
  EXPECT_GE(report["spca"]["outlier_count"].get<int>(), 1);
  const auto genes = report["spca"]["selected_genes"].get<std::vector<std::string>>();
  ASSERT_FALSE(genes.empty());
  int planted = 0;
  for (const auto& g : genes) planted += std::stoi(g.substr(1)) <= 15;
  EXPECT_GE(planted, 10);
  const auto loadings = rmtspca::io::read_matrix(path("a/loadings.tsv")).values;
  EXPECT_EQ(loadings.rows(), 200);
}

TEST_F(CliTest, EvalReportsIdentity) {
  const oracle::Matrix q = oracle::random_orthonormal(30, 2, 3);
  rmtspca::io::write_delimited(path("q.tsv"), q);
  rmtspca::io::write_delimited(path("w.tsv"), oracle::random_orthonormal(30, 3, 4));
  const CliRun r = run_cli("eval --loadings " + path("q.tsv") + " --reference " + path("w.tsv") +
                        " --output-dir " + path("o"));
  ASSERT_EQ(r.status, 0);
  const json report = json::parse(r.out);
  EXPECT_NEAR(report["overlap"].get<double>() + report["chordal_distance_sq"].get<double>(), 3.0, 1e-9);
  EXPECT_EQ(report["principal_angles"].size(), 2u);
}

TEST_F(CliTest, UnknownSubcommandFails) {
  EXPECT_NE(run_cli("frobnicate").status, 0);
}
