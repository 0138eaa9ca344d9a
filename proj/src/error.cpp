#include "rmtspca/error.hpp"

namespace rmtspca {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::PreconditionViolation: return "PreconditionViolation";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ZeroRowSum: return "ZeroRowSum";
    case Errc::DomainError: return "DomainError";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::ZeroNorm: return "ZeroNorm";
    case Errc::BadK: return "BadK";
    case Errc::ZeroRow: return "ZeroRow";
    case Errc::ZeroCol: return "ZeroCol";
    case Errc::EigenSolverFailure: return "EigenSolverFailure";
    case Errc::BadQ: return "BadQ";
    case Errc::QuadratureFailure: return "QuadratureFailure";
    case Errc::BranchAmbiguity: return "BranchAmbiguity";
    case Errc::PoleProximity: return "PoleProximity";
    case Errc::FixedPointDivergence: return "FixedPointDivergence";
    case Errc::NoEdgeFound: return "NoEdgeFound";
    case Errc::NotASolution: return "NotASolution";
    case Errc::BelowEdge: return "BelowEdge";
    case Errc::PoleAtOne: return "PoleAtOne";
    case Errc::PoleAtAtom: return "PoleAtAtom";
    case Errc::SubCritical: return "SubCritical";
    case Errc::EmptyOutliers: return "EmptyOutliers";
    case Errc::NegativeThreshold: return "NegativeThreshold";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::PluginValidation: return "PluginValidation";
    case Errc::UnknownPlugin: return "UnknownPlugin";
    case Errc::DegenerateBaseline: return "DegenerateBaseline";
    case Errc::IoError: return "IoError";
    case Errc::FormatError: return "FormatError";
  }
  return "Unknown";
}

}  // namespace rmtspca
