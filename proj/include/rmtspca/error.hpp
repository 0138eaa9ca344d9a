#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rmtspca {

enum class Errc {
  PreconditionViolation,
  DimensionMismatch,
  // preprocess
  ZeroRowSum,
  DomainError,
  ZeroVariance,
  ZeroNorm,
  BadK,
  // biwhiten
  ZeroRow,
  ZeroCol,
  EigenSolverFailure,
  // rmt
  BadQ,
  QuadratureFailure,
  BranchAmbiguity,
  PoleProximity,
  FixedPointDivergence,
  NoEdgeFound,
  NotASolution,
  BelowEdge,
  PoleAtOne,
  PoleAtAtom,
  SubCritical,
  EmptyOutliers,
  // spca
  NegativeThreshold,
  RankDeficient,
  PluginValidation,
  UnknownPlugin,
  // eval
  DegenerateBaseline,
  // io / cli
  IoError,
  FormatError,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the library. `module()` names the component that
/// raised it so the command line can surface it with provenance.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string module, const std::string& message)
      : std::runtime_error(message), code_(code), module_(std::move(module)) {}

  Errc code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  Errc code_;
  std::string module_;
};

}  // namespace rmtspca
