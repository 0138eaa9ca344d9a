#pragma once

#include "run_config.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace rmtspca::cli {

struct Command {
  std::string name;
  std::string help;
  std::vector<std::string> keys;
  /// Runs the command and returns its report body.
  std::function<nlohmann::json(const RunConfig&)> run;
};

const std::vector<Command>& commands();

}  // namespace rmtspca::cli
