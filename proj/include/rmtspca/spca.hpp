#pragma once

#include "rmtspca/error.hpp"
#include "rmtspca/preprocess.hpp"
#include "rmtspca/rmt.hpp"
#include "rmtspca/types.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rmtspca::spca {

enum class Ortho { Lowdin, GramSchmidt };

std::string_view ortho_name(Ortho ortho) noexcept;
Ortho parse_ortho(std::string_view name);

/// Momentum sequence t_{k+1} = (p + sqrt(q + r t_k^2)) / 2.
struct Momentum {
  double p = 1.0 / 20.0;
  double q = 1.0;
  double r = 4.0;
};

struct SparsePcaConfig {
  Index k = 1;
  /// L1 penalty on the loadings (the sparsity parameter gamma).
  double penalty = 0.0;
  /// Gradient step; defaults to 1 / (2 lambda_max(S)).
  std::optional<double> step;
  Momentum momentum;
  bool accelerate = true;
  Ortho ortho = Ortho::Lowdin;
  double tol = 1e-8;
  Index max_iter = 5000;

  void validate() const;
};

struct SparsePcaResult {
  Matrix loadings;  // p x k, orthonormal columns
  double sparsity_fraction = 0.0;
  Index iterations = 0;
  bool converged = false;
  Index restarts = 0;
  /// tr(Qhat W) against the starting eigenvectors.
  double overlap_with_outliers = 0.0;
};

template <typename Derived>
MatrixX<typename Derived::Scalar> soft_threshold(const Eigen::MatrixBase<Derived>& m,
                                                 typename Derived::Scalar t) {
  using Scalar = typename Derived::Scalar;
  if (!(t >= Scalar(0))) {
    throw Error(Errc::NegativeThreshold, "spca", "soft threshold must be nonnegative");
  }
  return m.unaryExpr([t](Scalar v) {
    const Scalar shrunk = std::abs(v) - t;
    return shrunk > Scalar(0) ? (v > Scalar(0) ? shrunk : -shrunk) : Scalar(0);
  });
}

/// Squared Frobenius norm of Ua^T Ub, i.e. tr(Pa Pb) for the projectors.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar subspace_overlap(const Eigen::MatrixBase<DerivedA>& ua,
                                           const Eigen::MatrixBase<DerivedB>& ub) {
  if (ua.rows() != ub.rows()) {
    throw Error(Errc::DimensionMismatch, "spca", "subspaces live in different ambient spaces");
  }
  return (ua.transpose() * ub).squaredNorm();
}

/// Orthonormal basis for the column span of m: symmetric (Lowdin)
/// m (m^T m)^{-1/2}, or Gram-Schmidt with a positive R diagonal.
Matrix orthogonalize(const Matrix& m, Ortho mode);

/// Flip columns so each one's largest-magnitude entry is positive.
void canonicalize_signs(Matrix& loadings);

/// Sample covariance with mean subtraction and 1/(n-1) normalization.
Matrix covariance(const Matrix& x);

/// Leading k eigenvectors of a symmetric matrix, by decreasing eigenvalue.
Matrix top_eigenvectors(const Matrix& s, Index k);

/// Penalized objective tr(W^T S W) - penalty * |W|_1.
double objective(const Matrix& s, const Matrix& w, double penalty);

SparsePcaResult fista_sparse_pca(const Matrix& s, const Matrix& v0, const SparsePcaConfig& cfg);

// ---------------------------------------------------------------------------
// Plugins: any single-parameter sparse PCA can be driven by select_gamma.

using SparsePcaSolver =
    std::function<Matrix(const Matrix& s, const Matrix& v0, Index k, double penalty)>;
using SolverFactory = std::function<SparsePcaSolver(const SparsePcaConfig&)>;

class SolverRegistry {
 public:
  /// Registry holding the built-in "fista" solver.
  static SolverRegistry with_builtins();

  void add(const std::string& name, SolverFactory factory);
  bool contains(const std::string& name) const;
  SparsePcaSolver make(const std::string& name, const SparsePcaConfig& cfg) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, SolverFactory> factories_;
};

SparsePcaSolver fista_solver(const SparsePcaConfig& cfg);

/// Throws PluginValidation unless m is p x k with orthonormal columns.
void validate_loadings(const Matrix& m, Index p, Index k, double tol = 1e-8);

SparsePcaResult summarize(Matrix loadings, const Matrix& w);

// ---------------------------------------------------------------------------
// Sparsity selection from the overlap criterion.

struct GammaSelection {
  double gamma_star = 0.0;
  double gamma_selected = 0.0;
  double bound = 0.0;
  double ceiling = 0.0;
  SparsePcaResult result;
  std::vector<std::pair<double, double>> scan;  // (gamma, overlap), ascending gamma
  /// The overlap counts as below the bound once it falls under bound - slack.
  double slack = 0.0;
  bool bound_never_crossed = false;
  bool multiple_crossings = false;
};

struct SelectOptions {
  double fraction = 0.6;
  Index scan_points = 24;
  double scan_floor = 1e-4;  // first scan point, relative to the ceiling
  double rel_tol = 1e-3;
  std::optional<double> ceiling;
  /// Allowed shortfall below the bound. Exact recovery of the signal meets
  /// the bound only up to sampling noise, so select_gamma defaults to the
  /// fluctuation scale |O| / sqrt(n); select_gamma_from_covariance to 0.
  std::optional<double> slack;
};

/// Pick gamma so that tr(Qhat(gamma) W) meets the predicted bound, then
/// return the solution at fraction * gamma*. W is the span of the leading
/// |outliers| eigenvectors of the mean-centered covariance of x.
GammaSelection select_gamma(const DataMatrix& x, const rmt::OutlierSet& outliers,
                            const SparsePcaConfig& cfg, const SelectOptions& options = {});
GammaSelection select_gamma(const DataMatrix& x, const rmt::OutlierSet& outliers,
                            const SparsePcaSolver& solver, const SelectOptions& options = {});

/// Core search on a given covariance s, outlier basis w and overlap bound.
GammaSelection select_gamma_from_covariance(const Matrix& s, const Matrix& w, double bound,
                                            const SparsePcaSolver& solver,
                                            const SelectOptions& options = {});

/// Penalty that zeroes every entry at the first thresholding step.
double penalty_ceiling(const Matrix& s, const Matrix& v0, double step);

}  // namespace rmtspca::spca
