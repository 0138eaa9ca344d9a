#pragma once

#include "rmtspca/biwhiten.hpp"
#include "rmtspca/types.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace rmtspca::rmt {

// ---------------------------------------------------------------------------
// Marchenko-Pastur law at aspect ratio q = p/n for S = X^T X / n.

/// (lower, upper) edges ((1 - sqrt q)^2, (1 + sqrt q)^2).
std::pair<double, double> mp_edge(double q);

/// Continuous part of the law; for q > 1 it integrates to 1/q.
double mp_density(double x, double q, double sigma2 = 1.0);

/// Distribution function, including the (1 - 1/q) atom at zero when q > 1.
double mp_cdf(double x, double q, double sigma2 = 1.0);

double mp_quantile(double u, double q, double sigma2 = 1.0);
double mp_median(double q);

// ---------------------------------------------------------------------------
// Sample spectra.

/// Which Gram matrix a spectrum belongs to: S = X^T X / n (p x p) or its
/// complement XX^T / n (n x n).
enum class Side { Covariance, Complement };

/// Eigenvalues of one Gram matrix, sorted descending. Only the min(n, p)
/// eigenvalues shared by both sides are stored; the remaining
/// `zero_count()` eigenvalues of the larger side are exactly zero.
struct SampleSpectrum {
  Vector eigenvalues;
  Index n = 0;
  Index p = 0;
  Side side = Side::Covariance;

  double q() const noexcept { return static_cast<double>(p) / static_cast<double>(n); }
  Index dimension() const noexcept { return side == Side::Covariance ? p : n; }
  Index zero_count() const noexcept { return dimension() - eigenvalues.size(); }
  /// The same spectrum seen from the other Gram matrix.
  SampleSpectrum complement() const;
};

/// Eigenvalues of the requested side, computed on the smaller Gram matrix.
SampleSpectrum sample_spectrum(const Matrix& x, Side side = Side::Covariance);

/// Leading eigenpairs of S = X^T X / n. `vectors` is p x min(n, p) (or
/// p x top when `top` is given), columns matching `spectrum.eigenvalues`.
struct CovarianceEigen {
  SampleSpectrum spectrum;
  Matrix vectors;
};
CovarianceEigen covariance_eigen(const Matrix& x, std::optional<Index> top = {});

struct KsResult {
  double distance = 0.0;
  /// Asymptotic Kolmogorov p-value using the bulk eigenvalue count. The
  /// eigenvalues are not independent, so treat this as a heuristic.
  double pvalue = 0.0;
  Index bulk_count = 0;
};

/// Kolmogorov-Smirnov distance between the spectrum (zeros included) and
/// the Marchenko-Pastur law of the same side.
KsResult ks_distance(const SampleSpectrum& spectrum, double sigma2 = 1.0);

double kolmogorov_survival(double lambda);

// ---------------------------------------------------------------------------
// Stieltjes transforms.

/// Closed-form transform of the complementary Gram matrix XX^T/n for white
/// noise, on the branch that decays at infinity.
Complex stieltjes_mp_closed(Complex z, double q);
double stieltjes_mp_closed(double z, double q);

/// Plug-in transform (1/dim) sum 1/(l_i - z) of the spectrum's own side,
/// leaving out the `skip_top` largest eigenvalues.
Complex empirical_stieltjes(const SampleSpectrum& spectrum, Complex z, Index skip_top = 0);

// ---------------------------------------------------------------------------
// Separable covariance model X = A^{1/2} Y B^{1/2}.

struct SeparableOptions {
  double tol = 1e-12;
  double damping = 0.5;
  Index max_iter = 20000;
  /// Newton polish on F(z, g2) = 0 when damping alone stalls.
  bool newton_fallback = true;
};

struct SeparablePoint {
  Complex g1;
  Complex g2;
  Complex m;             // transform of S = X^T X / n
  Complex m_complement;  // transform of XX^T / n
  Index iterations = 0;
  bool converged = false;
};

SeparablePoint solve_separable_point(const AtomDensity& rho_a, const AtomDensity& rho_b, double q,
                                     Complex z, const SeparableOptions& options = {},
                                     std::optional<Complex> g2_start = {});

struct StieltjesSolution {
  Vector grid;
  std::vector<Complex> m;
  std::vector<Complex> g1;
  std::vector<Complex> g2;
  double eta = 0.0;
  Vector density;
  std::vector<bool> support_mask;  // true inside the detected support
  std::vector<bool> converged;

  bool complete() const;
};

/// Default imaginary offset for a grid: 1e-6 of its span.
double default_eta(const Vector& grid);

StieltjesSolution solve_separable_density(const AtomDensity& rho_a, const AtomDensity& rho_b,
                                          double q, const Vector& grid,
                                          std::optional<double> eta = {},
                                          const SeparableOptions& options = {});

/// F(x, g2) = g2 + int t rho_A(t) / (x - t q h(g2)) dt with
/// h(g2) = int t rho_B(t) / (1 + t g2) dt; F = 0 defines g2(x) for real x.
double separable_f(double x, double g2, const AtomDensity& rho_a, const AtomDensity& rho_b,
                   double q);
/// dF/dg2 at a root of F; positive exactly outside the support.
double separable_df(double x, double g2, const AtomDensity& rho_a, const AtomDensity& rho_b,
                    double q);

/// Support edges found by following g2 = -1/alpha along every branch of
/// F = 0 and locating the sign changes of dF/dg2. When either density has
/// more than 32 atoms only the outermost (largest) edge is located.
struct SupportEdges {
  std::vector<double> edges;  // strictly decreasing
  std::vector<double> g2_at_edges;
};

SupportEdges support_edges(const AtomDensity& rho_a, const AtomDensity& rho_b, double q);

bool outside_support_check(double x, double g2, const AtomDensity& rho_a,
                           const AtomDensity& rho_b, double q);

// ---------------------------------------------------------------------------
// Outliers and spikes of biwhitened data.

struct OutlierSet {
  Vector lambdas;  // descending
  Matrix vectors;  // p x k
  double edge = 0.0;
  double margin = 0.0;

  Index size() const noexcept { return lambdas.size(); }
  bool empty() const noexcept { return lambdas.size() == 0; }
};

/// Relative buffer above the edge at the Tracy-Widom scale, 4 n^{-2/3}.
double default_margin(Index n);

OutlierSet detect_outliers(const SampleSpectrum& spectrum, const Matrix& vectors, double margin);

/// Population eigenvalue alpha = -1/m_(lambda) behind an outlier lambda,
/// with m_ the transform of XX^T/n; inverts psi.
double signal_from_outlier(double lambda, double q);

/// psi(alpha) = alpha + q alpha / (alpha - 1): outlier location of a spike.
double psi(double alpha, double q);
double psi_prime(double alpha, double q);
/// General form psi(alpha) = alpha + q alpha int t rho_B(t) / (alpha - t) dt.
double psi(double alpha, const AtomDensity& rho_b, double q);
double psi_prime(double alpha, const AtomDensity& rho_b, double q);

/// Predicted squared overlap between an outlier eigenvector and its spike.
double overlap_prediction(double alpha, double q);

/// Sum of predicted overlaps over all outliers: the target for tr(Q W).
double rmt_overlap_bound(const OutlierSet& outliers, double q);

/// Outliers produced by a covariance spike alpha (solutions of
/// g2(lambda) = -1/alpha outside the support), ascending.
std::vector<double> separable_spike_solve(double alpha, const AtomDensity& rho_a,
                                          const AtomDensity& rho_b, double q);

/// Outliers produced by a mean spike of squared singular value theta * n
/// (solutions of lambda m(lambda) m_(lambda) = 1/theta), ascending.
std::vector<double> info_plus_noise_solve(double theta, const AtomDensity& rho_a,
                                          const AtomDensity& rho_b, double q);

/// Population spike created by a mean spike under rotational invariance:
/// the alpha above supp rho_B with m_B(alpha) = -1/theta, if any.
std::optional<double> alpha_from_theta(double theta, const AtomDensity& rho_b);

}  // namespace rmtspca::rmt
