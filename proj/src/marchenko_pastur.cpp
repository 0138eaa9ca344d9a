#include "rmtspca/error.hpp"
#include "rmtspca/rmt.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

namespace rmtspca::rmt {
namespace {

[[noreturn]] void fail(Errc code, const std::string& message) {
  throw Error(code, "rmt", message);
}

void check_q(double q) {
  if (!(q > 0.0) || !std::isfinite(q)) fail(Errc::BadQ, "aspect ratio must be positive");
}

void check_sigma2(double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    fail(Errc::PreconditionViolation, "sigma^2 must be positive");
  }
}

// Mass of the continuous part on [lower, x] for unit sigma, x inside the support.
// With x = mid - half cos(theta) the square-root edges disappear from the integrand;
// it is analytic in theta, so a shallow subdivision depth suffices.
double continuous_mass(double x, double q) {
  const auto [lo, hi] = mp_edge(q);
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double top = std::acos(std::clamp((mid - x) / half, -1.0, 1.0));
  auto integrand = [&](double theta) {
    const double s = std::sin(theta);
    // lo + half (1 - cos theta), written without cancellation near theta = 0
    const double h = std::sin(0.5 * theta);
    const double t = lo + 2.0 * half * h * h;
    if (t <= 0.0) {
      // Only reachable at theta = 0 when q = 1, where the limit is 2 / pi.
      return 2.0 / std::numbers::pi;
    }
    return half * half * s * s / (2.0 * std::numbers::pi * q * t);
  };
  double error = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, 0.0, top, 8, 1e-14, &error);
  if (!std::isfinite(v)) fail(Errc::QuadratureFailure, "quadrature returned a non-finite value");
  return v;
}

}  // namespace

std::pair<double, double> mp_edge(double q) {
  check_q(q);
  const double r = std::sqrt(q);
  return {(1.0 - r) * (1.0 - r), (1.0 + r) * (1.0 + r)};
}

double mp_density(double x, double q, double sigma2) {
  check_q(q);
  check_sigma2(sigma2);
  const double y = x / sigma2;
  const auto [lo, hi] = mp_edge(q);
  if (!(y > lo) || !(y < hi)) return 0.0;
  return std::sqrt((hi - y) * (y - lo)) / (2.0 * std::numbers::pi * q * y) / sigma2;
}

double mp_cdf(double x, double q, double sigma2) {
  check_q(q);
  check_sigma2(sigma2);
  const double y = x / sigma2;
  if (y < 0.0) return 0.0;
  const double atom = q > 1.0 ? 1.0 - 1.0 / q : 0.0;
  const auto [lo, hi] = mp_edge(q);
  if (y >= hi) return 1.0;
  if (y <= lo) return atom;
  return std::min(1.0, atom + continuous_mass(y, q));
}

double mp_quantile(double u, double q, double sigma2) {
  check_q(q);
  check_sigma2(sigma2);
  if (!(u >= 0.0 && u <= 1.0)) fail(Errc::PreconditionViolation, "quantile level must be in [0, 1]");
  const double atom = q > 1.0 ? 1.0 - 1.0 / q : 0.0;
  const auto [lo, hi] = mp_edge(q);
  if (u <= atom) return q > 1.0 ? 0.0 : lo * sigma2;
  if (u >= 1.0) return hi * sigma2;
  auto f = [&](double y) { return (atom + (y <= lo ? 0.0 : continuous_mass(y, q))) - u; };
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t max_iter = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, atom - u, 1.0 - u, tol, max_iter);
  return 0.5 * (a + b) * sigma2;
}

double mp_median(double q) { return mp_quantile(0.5, q, 1.0); }

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.0) {
    // Theta-function form, accurate where the alternating series is slow.
    const double pi = std::numbers::pi;
    double s = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(-odd * odd * pi * pi / (8.0 * lambda * lambda));
      s += term;
      if (term < 1e-18) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

Complex stieltjes_mp_closed(Complex z, double q) {
  check_q(q);
  if (z == Complex(0.0, 0.0)) fail(Errc::PreconditionViolation, "z must be nonzero");
  const auto [lo, hi] = mp_edge(q);
  if (z.imag() == 0.0 && z.real() > lo && z.real() < hi) {
    fail(Errc::BranchAmbiguity, "real z lies inside the support; give it an imaginary part");
  }
  // +0.0 imaginary parts keep real z below the support on the decaying branch.
  const Complex a = z - lo + Complex(0.0, 0.0);
  const Complex b = z - hi + Complex(0.0, 0.0);
  return (q - 1.0 - z + std::sqrt(a) * std::sqrt(b)) / (2.0 * z);
}

double stieltjes_mp_closed(double z, double q) {
  return stieltjes_mp_closed(Complex(z, 0.0), q).real();
}

}  // namespace rmtspca::rmt
