#include "commands.hpp"
#include "run_config.hpp"

#include "rmtspca/error.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace {

using nlohmann::json;

void write_json(const std::string& dir, const std::string& name, const json& j) {
  try {
    std::filesystem::create_directories(dir);
    std::ofstream out(std::filesystem::path(dir) / name);
    if (out) out << j.dump(2) << '\n';
  } catch (const std::filesystem::filesystem_error&) {
    // The record still reaches stderr.
  }
}

}  // namespace

int main(int argc, char** argv) {
  using rmtspca::cli::RunConfig;
  CLI::App app{"Sparse PCA for single-cell data with a random-matrix noise model"};
  app.require_subcommand(1);

  std::map<std::string, RunConfig> configs;
  std::map<std::string, CLI::App*> subs;
  for (const auto& cmd : rmtspca::cli::commands()) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    rmtspca::cli::add_options(*sub, configs[cmd.name], cmd.keys);
    subs[cmd.name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  for (const auto& cmd : rmtspca::cli::commands()) {
    if (!subs[cmd.name]->parsed()) continue;
    RunConfig& cfg = configs[cmd.name];
    try {
      rmtspca::cli::apply_config_file(*subs[cmd.name], cfg, cmd.keys);
      json report = {{"command", cmd.name}, {"parameters", rmtspca::cli::to_json(cfg, cmd.keys)}};
      report["result"] = cmd.run(cfg);
      write_json(cfg.output_dir, "report.json", report);
      std::cout << report["result"].dump() << '\n';
      return 0;
    } catch (const rmtspca::Error& e) {
      const json record = {{"error",
                            {{"code", std::string(rmtspca::errc_name(e.code()))},
                             {"module", e.module()},
                             {"message", e.what()},
                             {"command", cmd.name}}}};
      std::cerr << record.dump() << '\n';
      write_json(cfg.output_dir, "error.json", record);
      return 2;
    } catch (const std::exception& e) {
      const json record = {{"error",
                            {{"code", "Internal"},
                             {"module", "cli"},
                             {"message", e.what()},
                             {"command", cmd.name}}}};
      std::cerr << record.dump() << '\n';
      write_json(cfg.output_dir, "error.json", record);
      return 3;
    }
  }
  return 1;
}
