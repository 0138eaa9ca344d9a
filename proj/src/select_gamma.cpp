#include "rmtspca/spca.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rmtspca::spca {
namespace {

[[noreturn]] void fail(Errc code, const std::string& message) {
  throw Error(code, "spca", message);
}

// tr(Qhat(gamma) W); a solution that collapses to zero carries no overlap.
double overlap_at(const Matrix& s, const Matrix& w, const SparsePcaSolver& solver, double gamma) {
  try {
    const Matrix loadings = solver(s, w, w.cols(), gamma);
    validate_loadings(loadings, s.rows(), w.cols());
    return subspace_overlap(loadings, w);
  } catch (const Error& e) {
    if (e.code() == Errc::RankDeficient) return 0.0;
    throw;
  }
}

}  // namespace

double penalty_ceiling(const Matrix& s, const Matrix& v0, double step) {
  if (!(step > 0.0)) fail(Errc::PreconditionViolation, "step must be positive");
  if (s.rows() != s.cols() || v0.rows() != s.rows()) {
    fail(Errc::DimensionMismatch, "S and V0 do not match");
  }
  // Relative slack so that ceiling * step is not rounded below the maximum.
  return (v0 + 2.0 * step * (s * v0)).cwiseAbs().maxCoeff() / step * (1.0 + 1e-12);
}

GammaSelection select_gamma_from_covariance(const Matrix& s, const Matrix& w, double bound,
                                            const SparsePcaSolver& solver,
                                            const SelectOptions& options) {
  if (!(options.fraction > 0.0)) fail(Errc::PreconditionViolation, "fraction must be positive");
  if (options.scan_points < 2) fail(Errc::PreconditionViolation, "need at least two scan points");
  if (!(options.scan_floor > 0.0 && options.scan_floor < 1.0)) {
    fail(Errc::PreconditionViolation, "scan_floor must be in (0, 1)");
  }
  if (!(options.rel_tol > 0.0)) fail(Errc::PreconditionViolation, "rel_tol must be positive");
  if (s.rows() != s.cols() || w.rows() != s.rows() || w.cols() < 1) {
    fail(Errc::DimensionMismatch, "S and W do not match");
  }

  GammaSelection out;
  out.bound = bound;
  out.slack = options.slack.value_or(0.0);
  if (!(out.slack >= 0.0)) fail(Errc::PreconditionViolation, "slack must be non-negative");
  const double threshold = bound - out.slack;
  if (options.ceiling) {
    out.ceiling = *options.ceiling;
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    out.ceiling = penalty_ceiling(s, w, 1.0 / (2.0 * es.eigenvalues().maxCoeff()));
  }
  if (!(out.ceiling > 0.0)) fail(Errc::PreconditionViolation, "penalty ceiling must be positive");

  const Index n_scan = options.scan_points;
  for (Index i = 0; i < n_scan; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n_scan - 1);
    const double gamma = out.ceiling * std::pow(options.scan_floor, 1.0 - frac);
    out.scan.emplace_back(gamma, overlap_at(s, w, solver, gamma));
  }

  Index crossings = 0;
  for (std::size_t i = 1; i < out.scan.size(); ++i) {
    if ((out.scan[i - 1].second >= threshold) != (out.scan[i].second >= threshold)) ++crossings;
  }
  out.multiple_crossings = crossings > 1;

  std::size_t first_below = out.scan.size();
  for (std::size_t i = 0; i < out.scan.size(); ++i) {
    if (out.scan[i].second < threshold) {
      first_below = i;
      break;
    }
  }
  if (first_below == out.scan.size()) {
    out.bound_never_crossed = true;
    out.gamma_star = out.scan.back().first;
  } else {
    double lo = first_below == 0 ? 0.0 : out.scan[first_below - 1].first;
    double hi = out.scan[first_below].first;
    while (hi - lo > options.rel_tol * hi) {
      const double mid = 0.5 * (lo + hi);
      if (overlap_at(s, w, solver, mid) >= threshold) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    out.gamma_star = 0.5 * (lo + hi);
  }

  out.gamma_selected = options.fraction * out.gamma_star;
  Matrix loadings = solver(s, w, w.cols(), out.gamma_selected);
  validate_loadings(loadings, s.rows(), w.cols());
  out.result = summarize(std::move(loadings), w);
  return out;
}

namespace {

SelectOptions with_default_slack(SelectOptions o, const DataMatrix& x, const rmt::OutlierSet& outliers) {
  if (!o.slack) o.slack = static_cast<double>(outliers.size()) / std::sqrt(static_cast<double>(x.n()));
  return o;
}

}  // namespace

GammaSelection select_gamma(const DataMatrix& x, const rmt::OutlierSet& outliers,
                            const SparsePcaSolver& solver, const SelectOptions& options) {
  const double bound = rmt::rmt_overlap_bound(outliers, x.q());
  const Matrix s = covariance(x.values());
  const Matrix w = top_eigenvectors(s, outliers.size());
  return select_gamma_from_covariance(s, w, bound, solver, with_default_slack(options, x, outliers));
}

GammaSelection select_gamma(const DataMatrix& x, const rmt::OutlierSet& outliers,
                            const SparsePcaConfig& cfg, const SelectOptions& options) {
  const double bound = rmt::rmt_overlap_bound(outliers, x.q());
  const Matrix s = covariance(x.values());
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  if (es.info() != Eigen::Success) fail(Errc::EigenSolverFailure, "eigensolver failed");
  const Index k = outliers.size();
  if (k > s.rows()) fail(Errc::BadK, "more outliers than dimensions");
  Matrix w = es.eigenvectors().rightCols(k).rowwise().reverse();
  canonicalize_signs(w);

  SparsePcaConfig c = cfg;
  if (!c.step) c.step = 1.0 / (2.0 * es.eigenvalues().maxCoeff());
  SelectOptions o = with_default_slack(options, x, outliers);
  if (!o.ceiling) o.ceiling = penalty_ceiling(s, w, *c.step);
  return select_gamma_from_covariance(s, w, bound, fista_solver(c), o);
}

}  // namespace rmtspca::spca
