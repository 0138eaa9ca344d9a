#include "rmtspca/biwhiten.hpp"

#include "rmtspca/error.hpp"
#include "rmtspca/rmt.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rmtspca {
namespace {

[[noreturn]] void fail(Errc code, const std::string& message) {
  throw Error(code, "biwhiten", message);
}

double median_sorted(const Vector& v) {
  const Index n = v.size();
  return n % 2 == 1 ? v(n / 2) : 0.5 * (v(n / 2 - 1) + v(n / 2));
}

// Balance residual of the moving-target equations for Z = diag(c) X diag(d).
double balance_residual(const Matrix& x, const Vector& c, const Vector& d) {
  const Matrix z = c.asDiagonal() * x * d.asDiagonal();
  const double n = static_cast<double>(z.rows());
  const double p = static_cast<double>(z.cols());
  const auto col_sq = z.colwise().squaredNorm().array() / n;
  const auto col_mean = z.colwise().sum().array() / n;
  const auto row_sq = z.rowwise().squaredNorm().array() / p;
  const auto row_mean = z.rowwise().sum().array() / p;
  const double col_res = (col_sq - 1.0 - col_mean.square()).abs().maxCoeff();
  const double row_res = (row_sq - 1.0 - row_mean.square()).abs().maxCoeff();
  return std::max(col_res, row_res);
}

double geometric_mean(const Vector& v) { return std::exp(v.array().log().mean()); }

}  // namespace

AtomDensity AtomDensity::empirical(const Vector& locations) {
  if (locations.size() == 0) {
    throw Error(Errc::PreconditionViolation, "biwhiten", "empirical density needs atoms");
  }
  std::vector<double> sorted(locations.data(), locations.data() + locations.size());
  std::sort(sorted.begin(), sorted.end());
  const double w = 1.0 / static_cast<double>(sorted.size());
  AtomDensity out;
  for (double t : sorted) {
    if (!out.atoms.empty() && std::abs(out.atoms.back().first - t) <= 1e-12 * std::abs(t)) {
      out.atoms.back().second += w;
    } else {
      out.atoms.emplace_back(t, w);
    }
  }
  out.validate();
  return out;
}

double AtomDensity::mean() const {
  double s = 0.0;
  for (const auto& [t, w] : atoms) s += t * w;
  return s;
}

void AtomDensity::validate() const {
  if (atoms.empty()) {
    throw Error(Errc::PreconditionViolation, "biwhiten", "atom density is empty");
  }
  double total = 0.0;
  for (const auto& [t, w] : atoms) {
    if (!(t > 0.0) || !std::isfinite(t) || !(w > 0.0)) {
      throw Error(Errc::PreconditionViolation, "biwhiten",
                  "atoms need positive finite locations and positive weights");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12 * static_cast<double>(atoms.size())) {
    throw Error(Errc::PreconditionViolation, "biwhiten", "atom weights must sum to one");
  }
}

namespace biwhiten {

ScalingPair sinkhorn_biwhiten(const DataMatrix& data, const Options& options) {
  const Matrix& x = data.values();
  const Index n = x.rows();
  const Index p = x.cols();
  const Matrix u = x.cwiseAbs2();

  const Vector row_mass = u.rowwise().sum();
  const Vector col_mass = u.colwise().sum().transpose();
  for (Index i = 0; i < n; ++i) {
    if (!(row_mass(i) > 0.0)) fail(Errc::ZeroRow, "row " + std::to_string(i) + " is all zero");
  }
  for (Index j = 0; j < p; ++j) {
    if (!(col_mass(j) > 0.0)) fail(Errc::ZeroCol, "column " + std::to_string(j) + " is all zero");
  }

  Vector c = options.c0.value_or(Vector::Ones(n));
  Vector d = options.d0.value_or(Vector::Ones(p));
  if (c.size() != n || d.size() != p) {
    fail(Errc::DimensionMismatch, "initial scalings do not match the matrix shape");
  }
  if (!(c.array() > 0.0).all() || !(d.array() > 0.0).all()) {
    fail(Errc::PreconditionViolation, "initial scalings must be positive");
  }

  const double nd = static_cast<double>(n);
  const double pd = static_cast<double>(p);
  ScalingPair out;
  // c and d are only defined up to (t c, d / t); with moving targets the
  // iteration drifts along that orbit, so progress is measured after fixing
  // the geometric mean of c to one.
  double gauge = geometric_mean(c);
  for (Index it = 0; it < options.max_iter; ++it) {
    const Vector xc = d.cwiseProduct(x.transpose() * c);
    const Vector d_next =
        (nd * (1.0 + (xc / nd).array().square()) / (u.transpose() * c.cwiseAbs2()).array())
            .sqrt()
            .matrix();
    const Vector xd = c.cwiseProduct(x * d_next);
    const Vector c_next =
        (pd * (1.0 + (xd / pd).array().square()) / (u * d_next.cwiseAbs2()).array())
            .sqrt()
            .matrix();

    const double gauge_next = geometric_mean(c_next);
    const double change_c =
        ((c_next / gauge_next - c / gauge).array().abs() / (c / gauge).array()).maxCoeff();
    const double change_d =
        ((d_next * gauge_next - d * gauge).array().abs() / (d * gauge).array()).maxCoeff();
    c = c_next;
    d = d_next;
    gauge = gauge_next;
    out.iterations = it + 1;
    out.last_change = std::max(change_c, change_d);
    if (!c.allFinite() || !d.allFinite()) {
      fail(Errc::PreconditionViolation, "scaling iteration produced non-finite values");
    }
    if (out.last_change < options.tol) {
      out.converged = true;
      break;
    }
  }

  out.residual = balance_residual(x, c, d);
  const Matrix z = c.asDiagonal() * x * d.asDiagonal();
  out.sigma = estimate_sigma(z);
  out.c = c / out.sigma;
  out.d = d;
  return out;
}

double estimate_sigma(const Matrix& z) {
  const Index n = z.rows();
  const Index p = z.cols();
  Matrix gram;
  double ratio = 0.0;
  if (p <= n) {
    gram = Matrix::Zero(p, p);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(z.transpose(), 1.0 / double(n));
    ratio = double(p) / double(n);
  } else {
    gram = Matrix::Zero(n, n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(z, 1.0 / double(p));
    ratio = double(n) / double(p);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    fail(Errc::EigenSolverFailure, "eigensolver failed while estimating sigma");
  }
  const double l_med = median_sorted(solver.eigenvalues());
  const double lambda_med = rmt::mp_median(ratio);
  if (!(l_med > 0.0)) fail(Errc::PreconditionViolation, "median eigenvalue is not positive");
  return std::sqrt(l_med / lambda_med);
}

DataMatrix apply_scaling(const DataMatrix& x, const ScalingPair& s) {
  if (s.c.size() != x.n() || s.d.size() != x.p()) {
    fail(Errc::DimensionMismatch, "scaling vectors have lengths " + std::to_string(s.c.size()) +
                                      ", " + std::to_string(s.d.size()) + " for a " +
                                      std::to_string(x.n()) + "x" + std::to_string(x.p()) +
                                      " matrix");
  }
  Matrix z = s.c.asDiagonal() * x.values() * s.d.asDiagonal();
  return DataMatrix(std::move(z), Stage::Biwhitened);
}

std::pair<AtomDensity, AtomDensity> empirical_factor_densities(const ScalingPair& s) {
  if (s.c.size() == 0 || s.d.size() == 0) {
    fail(Errc::PreconditionViolation, "scaling pair is empty");
  }
  return {AtomDensity::empirical(s.c.array().square().inverse().matrix()),
          AtomDensity::empirical(s.d.array().square().inverse().matrix())};
}

double variance_deviation(const Matrix& z) {
  const double n = static_cast<double>(z.rows());
  const double p = static_cast<double>(z.cols());
  const Matrix col_centered = z.rowwise() - z.colwise().mean();
  const Matrix row_centered = z.colwise() - z.rowwise().mean();
  const double col = (col_centered.colwise().squaredNorm().array() / n - 1.0).abs().maxCoeff();
  const double row = (row_centered.rowwise().squaredNorm().array() / p - 1.0).abs().maxCoeff();
  return std::max(col, row);
}

}  // namespace biwhiten
}  // namespace rmtspca
