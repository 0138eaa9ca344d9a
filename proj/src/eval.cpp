#include "rmtspca/eval.hpp"

#include "rmtspca/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace rmtspca::eval {
namespace {

[[noreturn]] void fail(Errc code, const std::string& message) {
  throw Error(code, "eval", message);
}

void check_ambient(const Subspace& a, const Subspace& b) {
  if (a.ambient() != b.ambient()) {
    fail(Errc::DimensionMismatch, "subspaces of R^" + std::to_string(a.ambient()) + " and R^" +
                                      std::to_string(b.ambient()));
  }
}

}  // namespace

Subspace::Subspace(Matrix basis) : basis_(std::move(basis)) {
  if (basis_.rows() < 1) fail(Errc::PreconditionViolation, "ambient dimension must be positive");
  if (basis_.cols() > basis_.rows()) fail(Errc::PreconditionViolation, "too many basis vectors");
  if (!basis_.allFinite()) fail(Errc::PreconditionViolation, "basis has non-finite entries");
  const Index k = basis_.cols();
  const double err =
      k == 0 ? 0.0 : (basis_.transpose() * basis_ - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
  if (err > 1e-10) {
    fail(Errc::PreconditionViolation, "basis is not orthonormal (error " + std::to_string(err) + ")");
  }
}

Subspace Subspace::span_of(const Matrix& vectors) {
  if (vectors.cols() == 0) return Subspace(Matrix(vectors.rows(), 0));
  Eigen::ColPivHouseholderQR<Matrix> qr(vectors);
  qr.setThreshold(1e-10);
  const Index rank = qr.rank();
  Matrix q = qr.householderQ() * Matrix::Identity(vectors.rows(), rank);
  return Subspace(std::move(q));
}

std::vector<double> principal_angles(const Subspace& a, const Subspace& b) {
  check_ambient(a, b);
  const Index m = std::min(a.dim(), b.dim());
  std::vector<double> out;
  if (m == 0) return out;
  Eigen::JacobiSVD<Matrix> svd(a.basis().transpose() * b.basis());
  const Vector& cosines = svd.singularValues();
  for (Index i = 0; i < m; ++i) out.push_back(std::acos(std::clamp(cosines(i), 0.0, 1.0)));
  std::sort(out.begin(), out.end());
  return out;
}

double chordal_distance_sq(const Subspace& a, const Subspace& b) {
  check_ambient(a, b);
  // Sum of sin^2 = |S - L L^T S|_F^2 with S the smaller basis; unlike
  // 1 - cos^2 this is accurate for nearly equal subspaces.
  const Matrix& small = a.dim() <= b.dim() ? a.basis() : b.basis();
  const Matrix& large = a.dim() <= b.dim() ? b.basis() : a.basis();
  const double sines = (small - large * (large.transpose() * small)).squaredNorm();
  return static_cast<double>(std::abs(a.dim() - b.dim())) + sines;
}

double noise_reduction(const Subspace& qhat, const Subspace& w, const Subspace& wfull) {
  check_ambient(qhat, wfull);
  check_ambient(w, wfull);
  const double baseline = chordal_distance_sq(w, wfull);
  if (baseline <= 1e-12) {
    fail(Errc::DegenerateBaseline, "W already coincides with the reference subspace");
  }
  return 1.0 - chordal_distance_sq(qhat, wfull) / baseline;
}

}  // namespace rmtspca::eval
