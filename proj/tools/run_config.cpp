#include "run_config.hpp"

#include "rmtspca/error.hpp"

#include <fstream>
#include <functional>
#include <map>

namespace rmtspca::cli {
namespace {

struct Field {
  std::string help;
  std::function<CLI::Option*(CLI::App&, RunConfig&, const std::string&)> add;
  std::function<void(RunConfig&, const nlohmann::json&)> read;
  std::function<nlohmann::json(const RunConfig&)> write;
};

template <typename T>
Field field(T RunConfig::*member, std::string help) {
  Field f;
  f.help = std::move(help);
  f.add = [member](CLI::App& app, RunConfig& cfg, const std::string& flag) {
    return app.add_option(flag, cfg.*member);
  };
  f.read = [member](RunConfig& cfg, const nlohmann::json& j) { cfg.*member = j.get<T>(); };
  f.write = [member](const RunConfig& cfg) { return nlohmann::json(cfg.*member); };
  return f;
}

template <typename T>
Field field(std::optional<T> RunConfig::*member, std::string help) {
  Field f;
  f.help = std::move(help);
  f.add = [member](CLI::App& app, RunConfig& cfg, const std::string& flag) {
    return app.add_option(flag, cfg.*member);
  };
  f.read = [member](RunConfig& cfg, const nlohmann::json& j) {
    if (j.is_null()) {
      (cfg.*member).reset();
    } else {
      cfg.*member = j.get<T>();
    }
  };
  f.write = [member](const RunConfig& cfg) {
    return (cfg.*member) ? nlohmann::json(*(cfg.*member)) : nlohmann::json(nullptr);
  };
  return f;
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"input", field(&RunConfig::input, "Input matrix (cells in rows)")},
      {"format", field(&RunConfig::format, "Input format: auto, mtx, csv, tsv")},
      {"output-dir", field(&RunConfig::output_dir, "Directory for outputs and report.json")},
      {"seed", field(&RunConfig::seed, "Random seed")},
      {"hvg", field(&RunConfig::hvg, "Keep this many highly variable genes")},
      {"target-sum", field(&RunConfig::target_sum, "Library size after normalization (default: median)")},
      {"tol", field(&RunConfig::tol, "Biwhitening tolerance")},
      {"max-iter", field(&RunConfig::max_iter, "Biwhitening iteration cap")},
      {"margin", field(&RunConfig::margin, "Relative outlier margin above the edge (default 4 n^-2/3)")},
      {"eta", field(&RunConfig::eta, "Imaginary offset for the density solver (default 1e-6 of the grid span)")},
      {"grid-points", field(&RunConfig::grid_points, "Density grid size")},
      {"k", field(&RunConfig::k, "Number of components (default: number of outliers)")},
      {"penalty", field(&RunConfig::penalty, "Fixed L1 penalty; skips the automatic selection")},
      {"fraction", field(&RunConfig::fraction, "Selected penalty as a fraction of gamma*")},
      {"ortho", field(&RunConfig::ortho, "Orthogonalization: lowdin or gram-schmidt")},
      {"solver", field(&RunConfig::solver, "Sparse PCA plugin name")},
      {"spca-tol", field(&RunConfig::spca_tol, "Sparse PCA relative change tolerance")},
      {"spca-max-iter", field(&RunConfig::spca_max_iter, "Sparse PCA iteration cap")},
      {"scenario", field(&RunConfig::scenario, "Synthetic scenario: a, b, c or d")},
      {"n", field(&RunConfig::n, "Override the number of cells")},
      {"p", field(&RunConfig::p, "Override the number of genes")},
      {"loadings", field(&RunConfig::loadings, "Loadings to evaluate (p x k)")},
      {"reference", field(&RunConfig::reference, "Reference subspace basis (p x l)")},
      {"baseline", field(&RunConfig::baseline, "Baseline subspace basis for the noise reduction")},
  };
  return table;
}

const Field& lookup(const std::string& key) {
  const auto it = fields().find(key);
  if (it == fields().end()) {
    throw Error(Errc::FormatError, "cli", "unknown configuration key '" + key + "'");
  }
  return it->second;
}

}  // namespace

void add_options(CLI::App& app, RunConfig& cfg, const std::vector<std::string>& keys) {
  app.add_option("--config", cfg.config, "JSON file with option values");
  for (const std::string& key : keys) {
    const Field& f = lookup(key);
    f.add(app, cfg, "--" + key)->description(f.help);
  }
}

void apply_config_file(const CLI::App& app, RunConfig& cfg, const std::vector<std::string>& keys) {
  if (cfg.config.empty()) return;
  std::ifstream in(cfg.config);
  if (!in) throw Error(Errc::IoError, "cli", "cannot open config '" + cfg.config + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, "cli", "config '" + cfg.config + "': " + e.what());
  }
  if (!j.is_object()) throw Error(Errc::FormatError, "cli", "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw Error(Errc::FormatError, "cli", "option '" + key + "' does not apply to this command");
    }
    if (app.count("--" + key) > 0) continue;
    try {
      lookup(key).read(cfg, value);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::FormatError, "cli", "config key '" + key + "': " + e.what());
    }
  }
}

nlohmann::json to_json(const RunConfig& cfg, const std::vector<std::string>& keys) {
  nlohmann::json out = nlohmann::json::object();
  for (const std::string& key : keys) out[key] = lookup(key).write(cfg);
  return out;
}

}  // namespace rmtspca::cli
