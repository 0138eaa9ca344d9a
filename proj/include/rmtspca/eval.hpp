#pragma once

#include "rmtspca/types.hpp"

#include <vector>

namespace rmtspca::eval {

/// Orthonormal column basis of a subspace of R^ambient.
class Subspace {
 public:
  /// Checks orthonormality to 1e-10.
  explicit Subspace(Matrix basis);
  /// Orthonormalizes an arbitrary full-rank spanning set.
  static Subspace span_of(const Matrix& vectors);

  const Matrix& basis() const noexcept { return basis_; }
  Index dim() const noexcept { return basis_.cols(); }
  Index ambient() const noexcept { return basis_.rows(); }

 private:
  Matrix basis_;
};

/// Ascending principal angles, min(dim) of them, in [0, pi/2].
std::vector<double> principal_angles(const Subspace& a, const Subspace& b);

/// Sum of sin^2 of the principal angles plus |dim a - dim b|.
double chordal_distance_sq(const Subspace& a, const Subspace& b);

/// 1 - d^2(qhat, wfull) / d^2(w, wfull); negative when qhat is worse than w.
double noise_reduction(const Subspace& qhat, const Subspace& w, const Subspace& wfull);

}  // namespace rmtspca::eval
