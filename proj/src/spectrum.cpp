#include "rmtspca/error.hpp"
#include "rmtspca/rmt.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace rmtspca::rmt {
namespace {

[[noreturn]] void fail(Errc code, const std::string& message) {
  throw Error(code, "rmt", message);
}

struct GramEigen {
  Vector values;  // descending
  Matrix vectors;
};

// Eigen-decomposition of the smaller Gram matrix scaled by 1/n.
GramEigen smaller_gram(const Matrix& x, bool with_vectors) {
  const Index n = x.rows();
  const Index p = x.cols();
  const bool covariance = p <= n;
  const Index dim = covariance ? p : n;
  Matrix gram = Matrix::Zero(dim, dim);
  if (covariance) {
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), 1.0 / double(n));
  } else {
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0 / double(n));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(
      gram, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) fail(Errc::EigenSolverFailure, "eigensolver failed");
  GramEigen out;
  out.values = solver.eigenvalues().reverse().cwiseMax(0.0);
  if (with_vectors) out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

void check_shape(const Matrix& x) {
  if (x.rows() < 2 || x.cols() < 2) fail(Errc::PreconditionViolation, "matrix must be at least 2x2");
  if (!x.allFinite()) fail(Errc::PreconditionViolation, "matrix has non-finite entries");
}

// Distribution function of the Marchenko-Pastur law for the given side.
double side_cdf(double x, const SampleSpectrum& s, double sigma2) {
  const double q = s.q();
  if (s.side == Side::Covariance) return mp_cdf(x, q, sigma2);
  // XX^T/n = q (XX^T/p), and XX^T/p follows the law at ratio 1/q.
  return mp_cdf(x / q, 1.0 / q, sigma2);
}

double side_upper_edge(const SampleSpectrum& s, double sigma2) {
  const double q = s.q();
  if (s.side == Side::Covariance) return sigma2 * mp_edge(q).second;
  return sigma2 * q * mp_edge(1.0 / q).second;
}

}  // namespace

SampleSpectrum SampleSpectrum::complement() const {
  SampleSpectrum out = *this;
  out.side = side == Side::Covariance ? Side::Complement : Side::Covariance;
  return out;
}

SampleSpectrum sample_spectrum(const Matrix& x, Side side) {
  check_shape(x);
  SampleSpectrum s;
  s.eigenvalues = smaller_gram(x, false).values;
  s.n = x.rows();
  s.p = x.cols();
  s.side = side;
  return s;
}

CovarianceEigen covariance_eigen(const Matrix& x, std::optional<Index> top) {
  check_shape(x);
  const Index n = x.rows();
  const Index p = x.cols();
  const Index dim = std::min(n, p);
  const Index keep = top ? *top : dim;
  if (keep < 1 || keep > dim) fail(Errc::PreconditionViolation, "requested eigenvector count is out of range");

  GramEigen g = smaller_gram(x, true);
  CovarianceEigen out;
  out.spectrum.eigenvalues = g.values;
  out.spectrum.n = n;
  out.spectrum.p = p;
  out.spectrum.side = Side::Covariance;
  if (p <= n) {
    out.vectors = g.vectors.leftCols(keep);
  } else {
    // v = X^T u / sqrt(n l) maps XX^T/n eigenvectors to X^T X/n eigenvectors.
    out.vectors = Matrix::Zero(p, keep);
    for (Index k = 0; k < keep; ++k) {
      Vector v = x.transpose() * g.vectors.col(k);
      const double norm = v.norm();
      if (norm > 1e-12 * std::sqrt(double(n)) * std::max(1.0, x.cwiseAbs().maxCoeff())) {
        out.vectors.col(k) = v / norm;
      }
    }
  }
  return out;
}

KsResult ks_distance(const SampleSpectrum& s, double sigma2) {
  const Index dim = s.dimension();
  if (dim < 10) fail(Errc::PreconditionViolation, "need at least 10 eigenvalues");
  std::vector<double> values(s.eigenvalues.data(), s.eigenvalues.data() + s.eigenvalues.size());
  values.insert(values.end(), static_cast<std::size_t>(s.zero_count()), 0.0);
  std::sort(values.begin(), values.end());

  const double total = static_cast<double>(values.size());
  const double edge = side_upper_edge(s, sigma2);
  KsResult out;
  for (std::size_t i = 0; i < values.size();) {
    // Tied values form one jump of the empirical distribution.
    std::size_t j = i + 1;
    while (j < values.size() && values[j] == values[i]) ++j;
    const double x = values[i];
    const double f = side_cdf(x, s, sigma2);
    // Left limit differs from f only at the atom at zero.
    const double f_left = x <= 0.0 ? 0.0 : f;
    out.distance = std::max(out.distance, std::abs(f - j / total));
    out.distance = std::max(out.distance, std::abs(f_left - i / total));
    if (x <= edge) out.bulk_count += static_cast<Index>(j - i);
    i = j;
  }
  const double root = std::sqrt(static_cast<double>(std::max<Index>(out.bulk_count, 1)));
  out.pvalue = kolmogorov_survival((root + 0.12 + 0.11 / root) * out.distance);
  return out;
}

Complex empirical_stieltjes(const SampleSpectrum& s, Complex z, Index skip_top) {
  const Index count = s.eigenvalues.size();
  if (skip_top < 0 || skip_top > count) fail(Errc::PreconditionViolation, "skip_top is out of range");
  const Index dim = s.dimension() - skip_top;
  if (dim <= 0) fail(Errc::PreconditionViolation, "no eigenvalues left");
  Complex sum(0.0, 0.0);
  for (Index i = skip_top; i < count; ++i) {
    const Complex gap = s.eigenvalues(i) - z;
    if (std::abs(gap) < 1e-12) {
      fail(Errc::PoleProximity, "z is within 1e-12 of eigenvalue " + std::to_string(i));
    }
    sum += 1.0 / gap;
  }
  if (s.zero_count() > 0) {
    if (std::abs(z) < 1e-12) fail(Errc::PoleProximity, "z is within 1e-12 of the zero eigenvalues");
    sum += static_cast<double>(s.zero_count()) / (-z);
  }
  return sum / static_cast<double>(dim);
}

double default_margin(Index n) {
  if (n < 1) fail(Errc::PreconditionViolation, "n must be positive");
  return 4.0 * std::pow(static_cast<double>(n), -2.0 / 3.0);
}

OutlierSet detect_outliers(const SampleSpectrum& s, const Matrix& vectors, double margin) {
  if (s.side != Side::Covariance) {
    fail(Errc::PreconditionViolation, "outliers are read from the covariance side");
  }
  if (!(margin >= 0.0)) fail(Errc::PreconditionViolation, "margin must be non-negative");
  OutlierSet out;
  out.edge = mp_edge(s.q()).second;
  out.margin = margin;
  const double threshold = out.edge * (1.0 + margin);
  Index k = 0;
  while (k < s.eigenvalues.size() && s.eigenvalues(k) > threshold) ++k;
  if (k > vectors.cols() || (k > 0 && vectors.rows() != s.p)) {
    fail(Errc::DimensionMismatch, "eigenvector matrix does not cover the outliers");
  }
  out.lambdas = s.eigenvalues.head(k);
  out.vectors = vectors.leftCols(k);
  return out;
}

}  // namespace rmtspca::rmt
