#include "rmtspca/error.hpp"
#include "rmtspca/rmt.hpp"
#include "separable_detail.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

namespace rmtspca::rmt {
namespace {

[[noreturn]] void fail(Errc code, const std::string& message) {
  throw Error(code, "rmt", message);
}

void check_q(double q) {
  if (!(q > 0.0) || !std::isfinite(q)) fail(Errc::BadQ, "aspect ratio must be positive");
}

void check_atom_pole(double alpha, const detail::Atoms& b) {
  const double gap = (b.t - alpha).abs().minCoeff();
  if (gap <= 1e-12 * std::max(1.0, std::abs(alpha))) {
    fail(Errc::PoleAtAtom, "alpha = " + std::to_string(alpha) + " sits on an atom of rho_B");
  }
}

// Real g2 at a point x outside the support, on the physical branch.
bool physical_g2(double x, const AtomDensity& rho_a, const AtomDensity& rho_b,
                 const detail::Atoms& a, const detail::Atoms& b, double q, double& g2) {
  SeparableOptions opts;
  opts.tol = 1e-13;
  const SeparablePoint s =
      solve_separable_point(rho_a, rho_b, q, Complex(x, 1e-10 * std::max(1.0, x)), opts);
  if (!s.converged) return false;
  double g = s.g2.real();
  if (!detail::polish_g2(x, g, a, b, q)) return false;
  g2 = g;
  return true;
}

// lambda m(lambda) m_(lambda) at a real point outside the support, from a real g2.
double d_transform(double x, double g2, const detail::Atoms& a, const detail::Atoms& b, double q) {
  const double m = (b.w / (-x * (1.0 + b.t * g2))).sum();
  const double c = q * detail::h_of(b, g2);
  const double mc = -(a.w / (x - a.t * c)).sum();
  return x * m * mc;
}

}  // namespace

double signal_from_outlier(double lambda, double q) {
  check_q(q);
  const double edge = mp_edge(q).second;
  if (!(lambda >= edge)) {
    fail(Errc::BelowEdge, "lambda = " + std::to_string(lambda) + " lies below the edge " +
                              std::to_string(edge));
  }
  return -1.0 / stieltjes_mp_closed(lambda, q);
}

double psi(double alpha, double q) {
  check_q(q);
  if (alpha == 1.0) fail(Errc::PoleAtOne, "psi has a pole at alpha = 1");
  return alpha + q * alpha / (alpha - 1.0);
}

double psi_prime(double alpha, double q) {
  check_q(q);
  if (alpha == 1.0) fail(Errc::PoleAtOne, "psi has a pole at alpha = 1");
  return 1.0 - q / ((alpha - 1.0) * (alpha - 1.0));
}

double psi(double alpha, const AtomDensity& rho_b, double q) {
  check_q(q);
  const detail::Atoms b(rho_b);
  check_atom_pole(alpha, b);
  return alpha + q * alpha * (b.w * b.t / (alpha - b.t)).sum();
}

double psi_prime(double alpha, const AtomDensity& rho_b, double q) {
  check_q(q);
  const detail::Atoms b(rho_b);
  check_atom_pole(alpha, b);
  return 1.0 - q * (b.w * b.t.square() / (alpha - b.t).square()).sum();
}

double overlap_prediction(double alpha, double q) {
  check_q(q);
  const double a1 = alpha - 1.0;
  if (!(a1 >= std::sqrt(q) * (1.0 - 1e-12))) {
    fail(Errc::SubCritical, "alpha = " + std::to_string(alpha) + " is not above 1 + sqrt(q)");
  }
  return std::clamp((a1 * a1 - q) / (a1 * (a1 + q)), 0.0, 1.0);
}

double rmt_overlap_bound(const OutlierSet& outliers, double q) {
  check_q(q);
  if (outliers.empty()) fail(Errc::EmptyOutliers, "no outliers to bound the overlap with");
  double total = 0.0;
  for (Index i = 0; i < outliers.size(); ++i) {
    const double alpha = signal_from_outlier(outliers.lambdas(i), q);
    // An outlier barely above the edge carries no recoverable signal.
    if (alpha - 1.0 > std::sqrt(q)) total += overlap_prediction(alpha, q);
  }
  return total;
}

std::vector<double> separable_spike_solve(double alpha, const AtomDensity& rho_a,
                                          const AtomDensity& rho_b, double q) {
  check_q(q);
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    fail(Errc::PreconditionViolation, "alpha must be positive");
  }
  const detail::Atoms a(rho_a);
  const detail::Atoms b(rho_b);
  check_atom_pole(alpha, b);
  const double g2 = -1.0 / alpha;

  std::vector<double> out;
  for (double x : detail::branch_roots(g2, a, b, q)) {
    if (!(x > 0.0) || !(detail::df_of(x, g2, a, b, q) > 1e-10)) continue;
    double physical = 0.0;
    if (physical_g2(x, rho_a, rho_b, a, b, q, physical) &&
        std::abs(physical - g2) > 1e-6 * std::max(1.0, std::abs(g2))) {
      continue;
    }
    out.push_back(x);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> info_plus_noise_solve(double theta, const AtomDensity& rho_a,
                                          const AtomDensity& rho_b, double q) {
  check_q(q);
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    fail(Errc::PreconditionViolation, "theta must be positive");
  }
  const detail::Atoms a(rho_a);
  const detail::Atoms b(rho_b);
  const SupportEdges edges = support_edges(rho_a, rho_b, q);
  const double target = 1.0 / theta;

  // Gaps above the lowest support interval: (edge below, edge above).
  std::vector<std::pair<double, double>> gaps;
  const double inf = std::numeric_limits<double>::infinity();
  gaps.emplace_back(edges.edges.front(), inf);
  for (std::size_t i = 1; i + 1 < edges.edges.size(); i += 2) {
    gaps.emplace_back(edges.edges[i + 1], edges.edges[i]);
  }

  std::vector<double> out;
  for (const auto& [lo, hi] : gaps) {
    double upper = hi;
    if (std::isinf(hi)) {
      // Far above the support lambda m m_ behaves like 1 / lambda.
      upper = std::max(2.0 * lo, lo + 4.0 * theta * a.max() * b.max() * (1.0 + q));
    }
    const double width = upper - lo;
    constexpr int kPoints = 400;
    std::vector<double> xs;
    for (int i = 0; i < kPoints; ++i) {
      const double s = std::pow(10.0, -9.0 + 9.0 * i / (kPoints - 1.0));
      xs.push_back(std::isinf(hi) ? lo + width * s
                                  : lo + width * (i + 0.5) / static_cast<double>(kPoints));
    }
    // Walk down from the far end, continuing g2 from the previous point.
    std::vector<double> g2s(xs.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> fs(xs.size(), std::numeric_limits<double>::quiet_NaN());
    double g2 = 0.0;
    bool have = false;
    for (std::size_t k = xs.size(); k-- > 0;) {
      const double x = xs[k];
      bool ok = have && detail::polish_g2(x, g2, a, b, q);
      if (!ok) ok = physical_g2(x, rho_a, rho_b, a, b, q, g2);
      if (!ok || !(detail::df_of(x, g2, a, b, q) > 0.0)) {
        have = false;
        continue;
      }
      have = true;
      g2s[k] = g2;
      fs[k] = d_transform(x, g2, a, b, q) - target;
    }
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
      if (!std::isfinite(fs[k]) || !std::isfinite(fs[k + 1])) continue;
      if ((fs[k] > 0.0) == (fs[k + 1] > 0.0)) continue;
      double g_track = g2s[k + 1];
      auto f = [&](double x) {
        double g = g_track;
        if (!detail::polish_g2(x, g, a, b, q)) return std::numeric_limits<double>::quiet_NaN();
        g_track = g;
        return d_transform(x, g, a, b, q) - target;
      };
      boost::math::tools::eps_tolerance<double> tol(48);
      std::uintmax_t max_iter = 200;
      try {
        const auto [r0, r1] =
            boost::math::tools::toms748_solve(f, xs[k], xs[k + 1], fs[k], fs[k + 1], tol, max_iter);
        out.push_back(0.5 * (r0 + r1));
      } catch (const boost::math::evaluation_error&) {
        continue;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<double> alpha_from_theta(double theta, const AtomDensity& rho_b) {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    fail(Errc::PreconditionViolation, "theta must be positive");
  }
  const detail::Atoms b(rho_b);
  const double top = b.max();
  // sum w / (alpha - t) = 1 / theta falls monotonically from +inf to 0 above top.
  auto f = [&](double alpha) { return (b.w / (alpha - b.t)).sum() - 1.0 / theta; };
  double lo = top + 1e-12 * std::max(1.0, top);
  double hi = top + 2.0 * theta;
  const double flo = f(lo);
  const double fhi = f(hi);
  if (!(flo > 0.0) || !(fhi < 0.0)) return std::nullopt;
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t max_iter = 300;
  const auto [r0, r1] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, max_iter);
  return 0.5 * (r0 + r1);
}

}  // namespace rmtspca::rmt
