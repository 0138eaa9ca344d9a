#include "rmtspca/spca.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace rmtspca::spca {
namespace {

[[noreturn]] void fail(Errc code, const std::string& message) {
  throw Error(code, "spca", message);
}

double largest_eigenvalue(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(s, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) fail(Errc::EigenSolverFailure, "eigensolver failed");
  return solver.eigenvalues()(s.rows() - 1);
}

void check_square(const Matrix& s) {
  if (s.rows() != s.cols() || s.rows() == 0) fail(Errc::DimensionMismatch, "S must be square");
  if (!s.allFinite()) fail(Errc::PreconditionViolation, "S has non-finite entries");
}

}  // namespace

std::string_view ortho_name(Ortho ortho) noexcept {
  return ortho == Ortho::Lowdin ? "lowdin" : "gram-schmidt";
}

Ortho parse_ortho(std::string_view name) {
  if (name == "lowdin") return Ortho::Lowdin;
  if (name == "gram-schmidt") return Ortho::GramSchmidt;
  fail(Errc::PreconditionViolation, "unknown orthogonalization '" + std::string(name) + "'");
}

void SparsePcaConfig::validate() const {
  if (k < 1) fail(Errc::BadK, "k must be at least 1");
  if (!(penalty >= 0.0)) fail(Errc::NegativeThreshold, "penalty must be nonnegative");
  if (step && !(*step > 0.0)) fail(Errc::PreconditionViolation, "step must be positive");
  if (!(tol > 0.0)) fail(Errc::PreconditionViolation, "tol must be positive");
  if (max_iter < 1) fail(Errc::PreconditionViolation, "max_iter must be positive");
}

Matrix orthogonalize(const Matrix& m, Ortho mode) {
  if (m.cols() == 0 || m.cols() > m.rows()) {
    fail(Errc::RankDeficient, "cannot orthogonalize a " + std::to_string(m.rows()) + "x" +
                                  std::to_string(m.cols()) + " matrix");
  }
  const double scale = m.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) fail(Errc::RankDeficient, "matrix is zero");
  if (mode == Ortho::Lowdin) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    if (!(sv(sv.size() - 1) > 1e-12 * sv(0))) fail(Errc::RankDeficient, "columns are dependent");
    return svd.matrixU() * svd.matrixV().transpose();
  }
  Eigen::HouseholderQR<Matrix> qr(m);
  const Matrix r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
  const Vector diag = r.diagonal();
  if (!(diag.cwiseAbs().minCoeff() > 1e-12 * diag.cwiseAbs().maxCoeff())) {
    fail(Errc::RankDeficient, "columns are dependent");
  }
  Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
  for (Index j = 0; j < q.cols(); ++j) {
    if (diag(j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

void canonicalize_signs(Matrix& loadings) {
  for (Index j = 0; j < loadings.cols(); ++j) {
    Index at = 0;
    loadings.col(j).cwiseAbs().maxCoeff(&at);
    if (loadings(at, j) < 0.0) loadings.col(j) = -loadings.col(j);
  }
}

Matrix covariance(const Matrix& x) {
  if (x.rows() < 2) fail(Errc::PreconditionViolation, "covariance needs at least two rows");
  const Matrix centered = x.rowwise() - x.colwise().mean();
  Matrix s = Matrix::Zero(x.cols(), x.cols());
  s.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / double(x.rows() - 1));
  return s.selfadjointView<Eigen::Lower>();
}

Matrix top_eigenvectors(const Matrix& s, Index k) {
  check_square(s);
  if (k < 1 || k > s.rows()) fail(Errc::BadK, "k is out of range");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(s);
  if (solver.info() != Eigen::Success) fail(Errc::EigenSolverFailure, "eigensolver failed");
  Matrix v = solver.eigenvectors().rightCols(k).rowwise().reverse();
  canonicalize_signs(v);
  return v;
}

double objective(const Matrix& s, const Matrix& w, double penalty) {
  return (w.transpose() * s * w).trace() - penalty * w.cwiseAbs().sum();
}

SparsePcaResult fista_sparse_pca(const Matrix& s, const Matrix& v0, const SparsePcaConfig& cfg) {
  cfg.validate();
  check_square(s);
  if (v0.rows() != s.rows() || v0.cols() != cfg.k) {
    fail(Errc::DimensionMismatch, "starting loadings must be p x k");
  }
  const double step = cfg.step ? *cfg.step : 1.0 / (2.0 * largest_eigenvalue(s));
  const double threshold = cfg.penalty * step;
  const Momentum& mo = cfg.momentum;

  Matrix w = orthogonalize(v0, cfg.ortho);
  const Matrix start = w;
  Matrix y = w;
  double t = 1.0;
  double obj = objective(s, w, cfg.penalty);

  SparsePcaResult out;
  for (Index it = 0; it < cfg.max_iter; ++it) {
    const Matrix z = soft_threshold(y + 2.0 * step * (s * y), threshold);
    Matrix w_next = orthogonalize(z, cfg.ortho);
    const double change = (w_next - w).norm() / std::max(w.norm(), 1e-300);
    out.iterations = it + 1;
    if (cfg.accelerate) {
      const double obj_next = objective(s, w_next, cfg.penalty);
      if (obj_next < obj) {
        t = 1.0;
        y = w_next;
        ++out.restarts;
      } else {
        const double t_next = 0.5 * (mo.p + std::sqrt(mo.q + mo.r * t * t));
        y = w_next + ((t - 1.0) / t_next) * (w_next - w);
        t = t_next;
      }
      obj = obj_next;
    } else {
      y = w_next;
    }
    w = std::move(w_next);
    if (change < cfg.tol) {
      out.converged = true;
      break;
    }
  }
  canonicalize_signs(w);
  out.overlap_with_outliers = subspace_overlap(w, start);
  out.sparsity_fraction =
      static_cast<double>((w.array() == 0.0).count()) / static_cast<double>(w.size());
  out.loadings = std::move(w);
  return out;
}

SolverRegistry SolverRegistry::with_builtins() {
  SolverRegistry r;
  r.add("fista", [](const SparsePcaConfig& cfg) { return fista_solver(cfg); });
  return r;
}

void SolverRegistry::add(const std::string& name, SolverFactory factory) {
  if (name.empty() || !factory) fail(Errc::PreconditionViolation, "plugin needs a name and a factory");
  factories_[name] = std::move(factory);
}

bool SolverRegistry::contains(const std::string& name) const { return factories_.count(name) > 0; }

SparsePcaSolver SolverRegistry::make(const std::string& name, const SparsePcaConfig& cfg) const {
  const auto it = factories_.find(name);
  if (it == factories_.end()) fail(Errc::UnknownPlugin, "no sparse PCA plugin named '" + name + "'");
  return it->second(cfg);
}

std::vector<std::string> SolverRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, f] : factories_) out.push_back(name);
  return out;
}

SparsePcaSolver fista_solver(const SparsePcaConfig& cfg) {
  return [cfg](const Matrix& s, const Matrix& v0, Index k, double penalty) {
    SparsePcaConfig c = cfg;
    c.k = k;
    c.penalty = penalty;
    return fista_sparse_pca(s, v0, c).loadings;
  };
}

void validate_loadings(const Matrix& m, Index p, Index k, double tol) {
  if (m.rows() != p || m.cols() != k) {
    fail(Errc::PluginValidation, "plugin returned a " + std::to_string(m.rows()) + "x" +
                                     std::to_string(m.cols()) + " matrix, expected " +
                                     std::to_string(p) + "x" + std::to_string(k));
  }
  if (!m.allFinite()) fail(Errc::PluginValidation, "plugin returned non-finite loadings");
  const double err = (m.transpose() * m - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
  if (err > tol) {
    fail(Errc::PluginValidation, "plugin loadings are not orthonormal (error " +
                                     std::to_string(err) + ")");
  }
}

SparsePcaResult summarize(Matrix loadings, const Matrix& w) {
  SparsePcaResult out;
  out.overlap_with_outliers = subspace_overlap(loadings, w);
  out.sparsity_fraction = static_cast<double>((loadings.array() == 0.0).count()) /
                          static_cast<double>(std::max<Index>(loadings.size(), 1));
  out.converged = true;
  out.loadings = std::move(loadings);
  return out;
}

}  // namespace rmtspca::spca
