#pragma once

#include "rmtspca/preprocess.hpp"
#include "rmtspca/types.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace rmtspca {

/// Row (cell) and column (gene) scalings produced by biwhitening. The noise
/// scale `sigma` has already been folded into `c`.
struct ScalingPair {
  Vector c;
  Vector d;
  double sigma = 1.0;
  Index iterations = 0;
  bool converged = false;
  /// Largest gauge-free relative change of c, d at the last iteration.
  double last_change = 0.0;
  /// Largest |lhs - rhs| of the row/column balance equations at exit,
  /// evaluated before sigma is folded in.
  double residual = 0.0;
};

/// Discrete probability measure, used for empirical spectral densities.
struct AtomDensity {
  std::vector<std::pair<double, double>> atoms;  // (location, weight)

  static AtomDensity point(double location) { return AtomDensity{{{location, 1.0}}}; }
  /// Equal-weight atoms at `locations`, with identical locations merged.
  static AtomDensity empirical(const Vector& locations);

  std::size_t size() const noexcept { return atoms.size(); }
  double mean() const;
  void validate() const;
};

namespace biwhiten {

struct Options {
  double tol = 1e-10;
  Index max_iter = 500;
  std::optional<Vector> c0;
  std::optional<Vector> d0;
};

/// Moving-target Sinkhorn-Knopp scaling. Rows of Z = diag(c) X diag(d) and
/// its columns end up with unit variance (1/p and 1/n conventions).
ScalingPair sinkhorn_biwhiten(const DataMatrix& x, const Options& options = {});

/// Robust noise scale: sqrt(median eigenvalue / Marchenko-Pastur median),
/// computed on the smaller Gram matrix.
double estimate_sigma(const Matrix& z);

DataMatrix apply_scaling(const DataMatrix& x, const ScalingPair& scaling);

/// Equal-weight atoms at c_i^-2 and d_j^-2.
std::pair<AtomDensity, AtomDensity> empirical_factor_densities(const ScalingPair& scaling);

/// Max deviation of the 1/p row variances and 1/n column variances of z from 1.
double variance_deviation(const Matrix& z);

}  // namespace biwhiten
}  // namespace rmtspca
