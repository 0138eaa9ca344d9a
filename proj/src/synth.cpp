#include "rmtspca/synth.hpp"

#include "rmtspca/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rmtspca::synth {
namespace {

[[noreturn]] void fail(Errc code, const std::string& message) {
  throw Error(code, "synth", message);
}

void check_unit(const Vector& v, Index length, const std::string& what) {
  if (v.size() != length) fail(Errc::DimensionMismatch, what + " has the wrong length");
  if (std::abs(v.norm() - 1.0) > 1e-8) fail(Errc::PreconditionViolation, what + " must have unit norm");
}

Matrix standard_normal(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  // Column-major fill keeps the stream layout independent of Eigen internals.
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

Vector uniform_unit(Index length, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Vector v(length);
  for (Index i = 0; i < length; ++i) v(i) = uniform(rng);
  return v.normalized();
}

Index negative_count(const Matrix& k) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(k, Eigen::EigenvaluesOnly);
  return (es.eigenvalues().array() < 0.0).count();
}

}  // namespace

void SyntheticModel::validate() const {
  if (n < 2 || p < 2) fail(Errc::PreconditionViolation, "n and p must be at least 2");
  if (a_diag.size() != n || b_diag.size() != p) {
    fail(Errc::DimensionMismatch, "diagonals of A and B must have lengths n and p");
  }
  if (!(a_diag.array() > 0.0).all() || !(b_diag.array() > 0.0).all()) {
    fail(Errc::PreconditionViolation, "A and B must be positive");
  }
  for (const CovSpike& s : cov_spikes) {
    if (!(s.strength >= 0.0)) fail(Errc::PreconditionViolation, "spike strength must be nonnegative");
    check_unit(s.u, p, "covariance spike direction");
  }
  for (const MeanSpike& s : mean_spikes) {
    if (!(s.theta >= 0.0)) fail(Errc::PreconditionViolation, "mean spike theta must be nonnegative");
    check_unit(s.left, n, "mean spike left vector");
    check_unit(s.right, p, "mean spike right vector");
  }
}

std::mt19937_64 make_engine(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::pair<DataMatrix, GroundTruth> generate(const SyntheticModel& model) {
  model.validate();
  const Index n = model.n;
  const Index p = model.p;
  const Index r = static_cast<Index>(model.cov_spikes.size());
  auto rng = make_engine(model.seed, Stream::Noise);

  // Y B^{1/2} + Xi C^{1/2} U^T has rows distributed as N(0, B + Q), like Y (B + Q)^{1/2}.
  Matrix x = standard_normal(n, p, rng);
  x *= model.b_diag.cwiseSqrt().asDiagonal();
  if (r > 0) {
    const Matrix xi = standard_normal(n, r, rng);
    Matrix u(p, r);
    Vector w(r);
    for (Index j = 0; j < r; ++j) {
      u.col(j) = model.cov_spikes[static_cast<std::size_t>(j)].u;
      w(j) = model.cov_spikes[static_cast<std::size_t>(j)].strength;
    }
    x.noalias() += xi * w.cwiseSqrt().asDiagonal() * u.transpose();
  }
  x = model.a_diag.cwiseSqrt().asDiagonal() * x;
  for (const MeanSpike& s : model.mean_spikes) {
    x.noalias() += std::sqrt(s.theta * static_cast<double>(n)) * s.left * s.right.transpose();
  }

  GroundTruth truth;
  Matrix span(p, r + static_cast<Index>(model.mean_spikes.size()));
  Matrix u(p, r);
  Vector w(r);
  for (Index j = 0; j < r; ++j) {
    u.col(j) = model.cov_spikes[static_cast<std::size_t>(j)].u;
    w(j) = model.cov_spikes[static_cast<std::size_t>(j)].strength;
    span.col(j) = u.col(j);
  }
  for (std::size_t j = 0; j < model.mean_spikes.size(); ++j) {
    span.col(r + static_cast<Index>(j)) = model.mean_spikes[j].right;
    truth.planted_thetas.push_back(model.mean_spikes[j].theta);
  }
  if (span.cols() > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(span);
    qr.setThreshold(1e-10);
    const Index rank = qr.rank();
    truth.signal_basis = (qr.householderQ() * Matrix::Identity(p, span.cols())).leftCols(rank);
  } else {
    truth.signal_basis = Matrix(p, 0);
  }
  if (r > 0) truth.planted_alphas = lowrank_update_eigenvalues(model.b_diag, u, w);
  return {DataMatrix(std::move(x), Stage::LogTransformed), std::move(truth)};
}

std::vector<double> lowrank_update_eigenvalues(const Vector& b_diag, const Matrix& vectors,
                                               const Vector& weights) {
  const Index p = b_diag.size();
  const Index r = weights.size();
  if (vectors.rows() != p || vectors.cols() != r) {
    fail(Errc::DimensionMismatch, "update vectors must be p x r");
  }
  if (!(weights.array() > 0.0).all()) fail(Errc::PreconditionViolation, "weights must be positive");
  if (r == 0) return {};

  const Matrix vw = vectors * weights.cwiseSqrt().asDiagonal();
  // Eigenvalues of the update above alpha, net of those of diag(b): negative
  // inertia of I + C^{1/2} V^T (B - alpha)^{-1} V C^{1/2}.
  auto count_above = [&](double alpha) {
    const Vector inv = (b_diag.array() - alpha).inverse().matrix();
    const Matrix k = Matrix::Identity(r, r) + vw.transpose() * inv.asDiagonal() * vw;
    return negative_count(k);
  };

  std::vector<double> levels(b_diag.data(), b_diag.data() + p);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  const double top = levels.back() + vw.squaredNorm() + 1.0;
  levels.push_back(top);

  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
    const double lo = levels[i];
    const double hi = levels[i + 1];
    const double eps = 1e-13 * std::max(1.0, std::abs(hi));
    const double a = lo + eps;
    const double b = i + 2 == levels.size() ? hi : hi - eps;
    const Index count_a = count_above(a);
    const Index count_b = count_above(b);
    for (Index j = 0; j < count_a - count_b; ++j) {
      // The (j + 1)-th largest eigenvalue in (a, b): count_above(x) > count_b + j below it.
      double l = a;
      double h = b;
      for (int it = 0; it < 200 && h - l > 1e-15 * std::max(1.0, std::abs(h)); ++it) {
        const double mid = 0.5 * (l + h);
        if (count_above(mid) > count_b + j) {
          l = mid;
        } else {
          h = mid;
        }
      }
      out.push_back(0.5 * (l + h));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

MixtureVariant parse_mixture_variant(std::string_view name) {
  if (name == "a") return MixtureVariant::IndependentGeneralA;
  if (name == "b") return MixtureVariant::CorrelatedGeneralA;
  if (name == "c") return MixtureVariant::IndependentIdentityA;
  if (name == "d") return MixtureVariant::CorrelatedIdentityA;
  fail(Errc::PreconditionViolation, "unknown scenario variant '" + std::string(name) + "'");
}

std::string_view mixture_variant_name(MixtureVariant variant) noexcept {
  switch (variant) {
    case MixtureVariant::IndependentGeneralA: return "a";
    case MixtureVariant::CorrelatedGeneralA: return "b";
    case MixtureVariant::IndependentIdentityA: return "c";
    case MixtureVariant::CorrelatedIdentityA: return "d";
  }
  return "?";
}

SyntheticModel mixture_scenario(MixtureVariant variant, std::uint64_t seed,
                               const MixtureParameters& pr) {
  const bool general_a = variant == MixtureVariant::IndependentGeneralA ||
                         variant == MixtureVariant::CorrelatedGeneralA;
  const bool correlated = variant == MixtureVariant::CorrelatedGeneralA ||
                          variant == MixtureVariant::CorrelatedIdentityA;
  if (pr.n < 2 || pr.p < 2) fail(Errc::PreconditionViolation, "n and p must be at least 2");

  SyntheticModel m;
  m.n = pr.n;
  m.p = pr.p;
  m.seed = seed;
  m.b_diag = Vector::Ones(pr.p);
  m.b_diag.head(static_cast<Index>(std::lround(pr.b_high_fraction * double(pr.p)))).setConstant(pr.b_high);
  m.a_diag = Vector::Ones(pr.n);
  if (general_a) {
    m.a_diag.setConstant(pr.a_low);
    m.a_diag.head(static_cast<Index>(std::lround(pr.a_high_fraction * double(pr.n)))).setConstant(pr.a_high);
  }

  Vector u1 = Vector::Zero(pr.p);
  u1(0) = 0.24;
  u1(1) = 0.97;
  m.cov_spikes.push_back({pr.cov_strength, u1.normalized()});

  auto rng = make_engine(seed, Stream::Scenario);
  Vector u2;
  if (correlated) {
    u2 = Vector::Zero(pr.p);
    u2(0) = 0.92;
    u2(1) = 0.39;
    u2.normalize();
  } else {
    u2 = uniform_unit(pr.p, rng);
  }
  const Vector u3 = uniform_unit(pr.n, rng);
  const double theta = pr.mean_scale * pr.mean_scale * m.a_diag.mean() * m.b_diag.mean();
  m.mean_spikes.push_back({theta, u3, u2});
  return m;
}

}  // namespace rmtspca::synth
