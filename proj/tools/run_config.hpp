#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rmtspca::cli {

/// Every tunable of the command line. A JSON file given with --config
/// supplies values for options that were not set on the command line.
struct RunConfig {
  std::string input;
  std::string format = "auto";
  std::string output_dir = ".";
  std::string config;
  std::uint64_t seed = 0;

  // preprocess
  std::optional<long> hvg;
  std::optional<double> target_sum;

  // biwhiten
  double tol = 1e-10;
  long max_iter = 500;

  // spectrum
  std::optional<double> margin;
  std::optional<double> eta;
  long grid_points = 400;

  // spca
  std::optional<long> k;
  std::optional<double> penalty;
  double fraction = 0.6;
  std::string ortho = "lowdin";
  std::string solver = "fista";
  double spca_tol = 1e-8;
  long spca_max_iter = 5000;

  // synth
  std::string scenario = "c";
  std::optional<long> n;
  std::optional<long> p;

  // eval
  std::string loadings;
  std::string reference;
  std::string baseline;
};

/// Registers the named options of `cfg` on `app`.
void add_options(CLI::App& app, RunConfig& cfg, const std::vector<std::string>& keys);

/// Fills options of `app` that were not given on the command line from the
/// JSON object in cfg.config. Unknown keys raise a FormatError.
void apply_config_file(const CLI::App& app, RunConfig& cfg, const std::vector<std::string>& keys);

/// Effective values of the named options, defaults included.
nlohmann::json to_json(const RunConfig& cfg, const std::vector<std::string>& keys);

}  // namespace rmtspca::cli
