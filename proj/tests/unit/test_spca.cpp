#include "rmtspca/error.hpp"
#include "rmtspca/rmt.hpp"
#include "rmtspca/spca.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rmtspca;
using namespace rmtspca::spca;

namespace {

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::PreconditionViolation;
}

Matrix random_psd(Index p, std::uint64_t seed) {
  const Matrix g = oracle::gaussian(2 * p, p, seed);
  return g.transpose() * g / double(2 * p);
}

Matrix exact_top(const Matrix& s, Index k) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  return es.eigenvectors().rightCols(k);
}

double orthonormality_error(const Matrix& w) {
  return (w.transpose() * w - Matrix::Identity(w.cols(), w.cols())).cwiseAbs().maxCoeff();
}

struct SparseSpike {
  Matrix x;
  std::vector<Index> support;
};

// Covariance I + (alpha - 1) u u^T with u spread evenly over `nonzeros` genes.
SparseSpike sparse_spike(Index n, Index p, Index nonzeros, double alpha, std::uint64_t seed) {
  SparseSpike out;
  Vector u = Vector::Zero(p);
  for (Index j = 0; j < nonzeros; ++j) {
    const Index at = 3 + 7 * j;
    u(at) = 1.0 / std::sqrt(double(nonzeros));
    out.support.push_back(at);
  }
  const Matrix y = oracle::gaussian(n, p, seed);
  out.x = y + (std::sqrt(alpha) - 1.0) * (y * u) * u.transpose();
  return out;
}

double exact_top_value(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

TEST(SoftThreshold, Examples) {
  Vector v(3);
  v << 0.5, -0.1, -0.7;
  const Vector out = soft_threshold(v, 0.2);
  EXPECT_DOUBLE_EQ(out(0), 0.3);
  EXPECT_EQ(out(1), 0.0);
  EXPECT_DOUBLE_EQ(out(2), -0.5);
  EXPECT_EQ(soft_threshold(v, 0.0), v);
  EXPECT_EQ(code_of([&] { soft_threshold(v, -0.1); }), Errc::NegativeThreshold);
}

TEST(SoftThreshold, MonotoneInThreshold) {
  const Matrix m = oracle::gaussian(30, 4, 1);
  for (double t1 : {0.0, 0.1, 0.5}) {
    for (double t2 : {t1, t1 + 0.2, t1 + 1.0}) {
      const Matrix a = soft_threshold(m, t1), b = soft_threshold(m, t2);
      EXPECT_TRUE((b.cwiseAbs().array() <= a.cwiseAbs().array()).all());
    }
  }
}

TEST(Orthogonalize, FixedPointAndSingleColumn) {
  const Matrix q = oracle::random_orthonormal(10, 3, 2);
  for (Ortho mode : {Ortho::Lowdin, Ortho::GramSchmidt}) {
    Matrix expect = q;
    if (mode == Ortho::GramSchmidt) {
      // Gram-Schmidt keeps orthonormal input up to column signs.
      for (Index j = 0; j < 3; ++j) {
        const Matrix out = orthogonalize(q, mode);
        if (out.col(j).dot(q.col(j)) < 0) expect.col(j) *= -1.0;
      }
    }
    EXPECT_LT((orthogonalize(q, mode) - expect).cwiseAbs().maxCoeff(), 1e-12);
    Vector v(3);
    v << 3, 0, 4;
    EXPECT_LT((orthogonalize(v, mode) - v / 5.0).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Orthogonalize, LowdinIsClosestOrthonormal) {
  const Matrix m = oracle::gaussian(12, 3, 3);
  const Matrix w = orthogonalize(m, Ortho::Lowdin);
  EXPECT_LT(orthonormality_error(w), 1e-12);
  // M (M^T M)^{-1/2} computed from the small eigendecomposition
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.transpose() * m);
  const Matrix ref = m * es.operatorInverseSqrt();
  EXPECT_LT((w - ref).cwiseAbs().maxCoeff(), 1e-12);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix other = oracle::random_orthonormal(12, 3, 100 + trial);
    EXPECT_LE((m - w).norm(), (m - other).norm());
  }
}

TEST(Orthogonalize, RankDeficient) {
  Matrix m = oracle::gaussian(8, 3, 4);
  m.col(1).setZero();
  EXPECT_EQ(code_of([&] { orthogonalize(m, Ortho::Lowdin); }), Errc::RankDeficient);
  EXPECT_EQ(code_of([&] { orthogonalize(m, Ortho::GramSchmidt); }), Errc::RankDeficient);
  EXPECT_EQ(code_of([] { orthogonalize(Matrix::Zero(5, 1), Ortho::Lowdin); }), Errc::RankDeficient);
}

TEST(SubspaceOverlap, Examples) {
  const Matrix q = oracle::random_orthonormal(9, 3, 5);
  EXPECT_NEAR(subspace_overlap(q, q), 3.0, 1e-12);
  Matrix e(2, 1), f(2, 1), g(2, 1);
  e << 1, 0;
  f << 0, 1;
  g << std::sqrt(0.5), std::sqrt(0.5);
  EXPECT_EQ(subspace_overlap(e, f), 0.0);
  EXPECT_NEAR(subspace_overlap(e, g), 0.5, 1e-15);
  const Matrix r = oracle::random_orthonormal(9, 2, 6);
  EXPECT_NEAR(subspace_overlap(q, r), oracle::projector_overlap(q, r), 1e-12);
  EXPECT_EQ(code_of([&] { subspace_overlap(q, e); }), Errc::DimensionMismatch);
}

TEST(Covariance, CenteredUnbiased) {
  const Matrix x = oracle::gaussian(15, 4, 7);
  const Matrix s = covariance(x);
  for (Index a = 0; a < 4; ++a) {
    for (Index b = 0; b < 4; ++b) {
      double ref = 0.0;
      const double ma = x.col(a).mean(), mb = x.col(b).mean();
      for (Index i = 0; i < 15; ++i) ref += (x(i, a) - ma) * (x(i, b) - mb);
      EXPECT_NEAR(s(a, b), ref / 14.0, 1e-13);
    }
  }
}

TEST(CanonicalizeSigns, LargestEntryPositive) {
  Matrix w(3, 2);
  w << 0.1, 0.9, -0.8, -0.2, 0.3, 0.1;
  canonicalize_signs(w);
  EXPECT_GT(w(1, 0), 0.0);
  EXPECT_GT(w(0, 1), 0.0);
}

TEST(Fista, UnpenalizedReachesTopEigenspace) {
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix s = random_psd(60, 10 + trial);
    SparsePcaConfig cfg;
    cfg.k = 3;
    cfg.tol = 1e-13;
    cfg.max_iter = 200000;
    const Matrix v0 = oracle::random_orthonormal(60, 3, 50 + trial);
    const SparsePcaResult r = fista_sparse_pca(s, v0, cfg);
    EXPECT_NEAR(subspace_overlap(r.loadings, exact_top(s, 3)), 3.0, 1e-6);
    EXPECT_LT(orthonormality_error(r.loadings), 1e-8);
    EXPECT_EQ(r.sparsity_fraction, 0.0);
  }
}

TEST(Fista, ObjectiveAscentWithoutMomentum) {
  const Matrix s = random_psd(40, 20);
  const Matrix v0 = oracle::random_orthonormal(40, 2, 21);
  for (Ortho mode : {Ortho::Lowdin, Ortho::GramSchmidt}) {
    SparsePcaConfig cfg;
    cfg.k = 2;
    cfg.accelerate = false;
    cfg.ortho = mode;
    cfg.tol = 1e-300;
    double prev = objective(s, v0, 0.0);
    for (Index it = 1; it <= 60; ++it) {
      cfg.max_iter = it;
      const double cur = objective(s, fista_sparse_pca(s, v0, cfg).loadings, 0.0);
      EXPECT_GE(cur, prev - 1e-12);
      prev = cur;
    }
  }
}

TEST(Fista, LoadingsOrthonormalForAnyPenalty) {
  const Matrix s = random_psd(50, 30);
  const Matrix v0 = exact_top(s, 2);
  const double ceiling = penalty_ceiling(s, v0, 1.0 / (2.0 * s.eigenvalues().real().maxCoeff()));
  for (double frac : {0.0, 0.01, 0.1, 0.3, 0.6}) {
    for (Ortho mode : {Ortho::Lowdin, Ortho::GramSchmidt}) {
      SparsePcaConfig cfg;
      cfg.k = 2;
      cfg.penalty = frac * ceiling;
      cfg.ortho = mode;
      try {
        const SparsePcaResult r = fista_sparse_pca(s, v0, cfg);
        EXPECT_LT(orthonormality_error(r.loadings), 1e-8);
        EXPECT_GE(r.sparsity_fraction, 0.0);
        EXPECT_LE(r.sparsity_fraction, 1.0);
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::RankDeficient);
      }
    }
  }
}

TEST(Fista, HugePenaltyIsRankDeficient) {
  const Matrix s = random_psd(20, 31);
  SparsePcaConfig cfg;
  cfg.penalty = 1e12;
  EXPECT_EQ(code_of([&] { fista_sparse_pca(s, exact_top(s, 1), cfg); }), Errc::RankDeficient);
}

TEST(Fista, ConfigValidation) {
  SparsePcaConfig cfg;
  cfg.k = 0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::BadK);
  cfg = {};
  cfg.step = 0.0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::PreconditionViolation);
  cfg = {};
  cfg.penalty = -1.0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::NegativeThreshold);
  const Matrix s = random_psd(10, 32);
  EXPECT_EQ(code_of([&] { fista_sparse_pca(s, Matrix::Identity(10, 2), SparsePcaConfig{}); }),
            Errc::DimensionMismatch);
  EXPECT_EQ(parse_ortho("gram-schmidt"), Ortho::GramSchmidt);
  EXPECT_EQ(ortho_name(Ortho::Lowdin), "lowdin");
}

TEST(Fista, RecoversPlantedSupport) {
  int exact = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SparseSpike sp = sparse_spike(2000, 1000, 10, 10.0, 300 + seed);
    const Matrix s = covariance(sp.x);
    const Matrix w = top_eigenvectors(s, 1);
    // Moderate penalty: a tenth of the level that zeroes the first step.
    SparsePcaConfig cfg;
    cfg.penalty = 0.1 * penalty_ceiling(s, w, 1.0 / (2.0 * exact_top_value(s)));
    const SparsePcaResult r = fista_sparse_pca(s, w, cfg);
    std::vector<Index> found;
    for (Index j = 0; j < 1000; ++j) {
      if (r.loadings(j, 0) != 0.0) found.push_back(j);
    }
    if (found == sp.support) ++exact;
  }
  EXPECT_GE(exact, 9);
}

TEST(SelectGamma, EmptyOutliers) {
  const DataMatrix x(oracle::gaussian(50, 10, 40), Stage::Biwhitened);
  EXPECT_EQ(code_of([&] { select_gamma(x, rmt::OutlierSet{}, SparsePcaConfig{}); }),
            Errc::EmptyOutliers);
}

TEST(SelectGamma, PlantedSpikeCrossesBound) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const SparseSpike sp = sparse_spike(2000, 1000, 10, 10.0, 300 + seed);
    const rmt::CovarianceEigen e = rmt::covariance_eigen(sp.x, 5);
    const rmt::OutlierSet o = rmt::detect_outliers(e.spectrum, e.vectors, rmt::default_margin(2000));
    ASSERT_EQ(o.size(), 1);
    const GammaSelection g = select_gamma(DataMatrix(sp.x, Stage::Biwhitened), o, SparsePcaConfig{});
    EXPECT_FALSE(g.bound_never_crossed);
    EXPECT_DOUBLE_EQ(g.slack, 1.0 / std::sqrt(2000.0));
    EXPECT_NEAR(g.scan.front().second, 1.0, 1e-4);
    EXPECT_LT(g.scan.back().second, g.bound);
    EXPECT_NEAR(g.gamma_selected, 0.6 * g.gamma_star, 1e-12 * g.gamma_star);
    for (const auto& [gamma, overlap] : g.scan) {
      if (gamma < g.gamma_star * (1.0 - 1e-3)) EXPECT_GE(overlap, g.bound - g.slack);
    }
  }
}

TEST(SelectGamma, FractionOneReturnsCrossing) {
  const SparseSpike sp = sparse_spike(1000, 300, 10, 10.0, 41);
  const Matrix s = covariance(sp.x);
  const Matrix w = top_eigenvectors(s, 1);
  const double bound = 0.8;
  SelectOptions opts;
  opts.fraction = 1.0;
  const GammaSelection g = select_gamma_from_covariance(s, w, bound, fista_solver({}), opts);
  EXPECT_FALSE(g.bound_never_crossed);
  EXPECT_EQ(g.gamma_selected, g.gamma_star);
  // gamma* is the first penalty below the bound; just under it the overlap
  // still meets the bound (the curve may jump there).
  EXPECT_LT(g.result.overlap_with_outliers, bound);
  const Matrix before = fista_solver({})(s, w, 1, g.gamma_star * (1.0 - 2e-3));
  EXPECT_GE(subspace_overlap(before, w), bound);
  // Scan starts near full overlap and falls below the bound.
  EXPECT_NEAR(g.scan.front().second, 1.0, 1e-4);
  EXPECT_LT(g.scan.back().second, bound);
}

TEST(SelectGamma, ConstantPluginNeverCrosses) {
  const SparseSpike sp = sparse_spike(500, 100, 5, 10.0, 42);
  const Matrix s = covariance(sp.x);
  const Matrix w = top_eigenvectors(s, 1);
  const SparsePcaSolver constant = [](const Matrix&, const Matrix& v0, Index, double) { return v0; };
  const GammaSelection g = select_gamma_from_covariance(s, w, 0.8, constant);
  EXPECT_TRUE(g.bound_never_crossed);
}

TEST(SelectGamma, NonOrthonormalPluginRejected) {
  const SparseSpike sp = sparse_spike(500, 100, 5, 10.0, 43);
  const Matrix s = covariance(sp.x);
  const Matrix w = top_eigenvectors(s, 1);
  const SparsePcaSolver bad = [](const Matrix&, const Matrix& v0, Index, double) {
    return Matrix(2.0 * v0);
  };
  EXPECT_EQ(code_of([&] { select_gamma_from_covariance(s, w, 0.8, bad); }), Errc::PluginValidation);
}

TEST(SolverRegistry, BuiltinFistaMatchesDirectCall) {
  const Matrix s = random_psd(30, 44);
  const Matrix v0 = exact_top(s, 2);
  SparsePcaConfig cfg;
  cfg.k = 2;
  cfg.penalty = 0.05;
  const auto registry = SolverRegistry::with_builtins();
  ASSERT_TRUE(registry.contains("fista"));
  const Matrix via_plugin = registry.make("fista", cfg)(s, v0, 2, 0.05);
  EXPECT_EQ(via_plugin, fista_sparse_pca(s, v0, cfg).loadings);
  EXPECT_EQ(code_of([&] { registry.make("gpower", cfg); }), Errc::UnknownPlugin);
}

TEST(PenaltyCeiling, ZeroesFirstStep) {
  const Matrix s = random_psd(25, 45);
  const Matrix v0 = exact_top(s, 2);
  const double step = 0.1;
  const double ceiling = penalty_ceiling(s, v0, step);
  const Matrix grad = v0 + 2.0 * step * s * v0;
  EXPECT_TRUE(soft_threshold(grad, ceiling * step).isZero(0.0));
  EXPECT_FALSE(soft_threshold(grad, 0.99 * ceiling * step).isZero(0.0));
}
