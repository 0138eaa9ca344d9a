#pragma once

#include "rmtspca/preprocess.hpp"
#include "rmtspca/types.hpp"

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace rmtspca::synth {

/// Adds strength * u u^T to the gene covariance B.
struct CovSpike {
  double strength = 0.0;
  Vector u;  // unit norm, length p
};

/// Adds sqrt(theta * n) * left right^T to the mean of X.
struct MeanSpike {
  double theta = 0.0;
  Vector left;   // unit norm, length n
  Vector right;  // unit norm, length p
};

enum class Noise { Gaussian };

/// X = A^{1/2} Y (B + Q)^{1/2} + P with diagonal A, B, low-rank Q and P.
struct SyntheticModel {
  Index n = 0;
  Index p = 0;
  Vector a_diag;
  Vector b_diag;
  std::vector<CovSpike> cov_spikes;
  std::vector<MeanSpike> mean_spikes;
  Noise noise = Noise::Gaussian;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  Matrix signal_basis;  // orthonormal span of the cov-spike u and mean-spike right vectors
  std::vector<double> planted_alphas;  // eigenvalues of B + Q created by the spikes
  std::vector<double> planted_thetas;
};

/// Independent random streams derived from one seed.
enum class Stream : std::uint64_t { Noise = 1, Scenario = 2, User = 3 };
std::mt19937_64 make_engine(std::uint64_t seed, Stream stream);

std::pair<DataMatrix, GroundTruth> generate(const SyntheticModel& model);

/// Eigenvalues of diag(b) + sum_j w_j v_j v_j^T (w_j > 0) that are not
/// eigenvalues of diag(b), ascending. Found by bisection on the inertia of
/// the small secular matrix, so p can be large.
std::vector<double> lowrank_update_eigenvalues(const Vector& b_diag, const Matrix& vectors,
                                               const Vector& weights);

enum class MixtureVariant { IndependentGeneralA, CorrelatedGeneralA, IndependentIdentityA, CorrelatedIdentityA };
MixtureVariant parse_mixture_variant(std::string_view name);  // "a" .. "d"
std::string_view mixture_variant_name(MixtureVariant variant) noexcept;

struct MixtureParameters {
  Index n = 3180;
  Index p = 3990;
  double b_high = 12.0;
  double b_high_fraction = 0.6;
  double a_high = 8.0;
  double a_low = 0.1;
  double a_high_fraction = 0.3;
  double cov_strength = 45.0;
  /// Mean-spike singular value in units of sqrt(n) times the rms noise
  /// level sqrt(mean(A) mean(B)).
  double mean_scale = 2.5;
};

/// Mixture of a covariance spike on a two-gene direction and a rank-one
/// mean. High-valued entries of A and B occupy the leading indices.
SyntheticModel mixture_scenario(MixtureVariant variant, std::uint64_t seed,
                               const MixtureParameters& params = {});

}  // namespace rmtspca::synth
