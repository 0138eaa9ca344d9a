#include "rmtspca/error.hpp"
#include "rmtspca/rmt.hpp"
#include "separable_detail.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

namespace rmtspca::rmt {
namespace detail {
namespace {

double solve_bracket(const std::function<double(double)>& f, double lo, double hi, double flo,
                     double fhi) {
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t max_iter = 300;
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, max_iter);
  return 0.5 * (a + b);
}

}  // namespace

Atoms::Atoms(const AtomDensity& rho) {
  rho.validate();
  const Index k = static_cast<Index>(rho.size());
  t.resize(k);
  w.resize(k);
  for (Index i = 0; i < k; ++i) {
    t(i) = rho.atoms[static_cast<std::size_t>(i)].first;
    w(i) = rho.atoms[static_cast<std::size_t>(i)].second;
  }
}

double h_of(const Atoms& b, double g2) { return (b.w * b.t / (1.0 + b.t * g2)).sum(); }

double f_of(double x, double g2, const Atoms& a, const Atoms& b, double q) {
  const double c = q * h_of(b, g2);
  return g2 + (a.w * a.t / (x - a.t * c)).sum();
}

double df_of(double x, double g2, const Atoms& a, const Atoms& b, double q) {
  const double c = q * h_of(b, g2);
  const double sa = (a.w * a.t.square() / (x - a.t * c).square()).sum();
  const double sb = (b.w * b.t.square() / (1.0 + b.t * g2).square()).sum();
  return 1.0 - q * sa * sb;
}

namespace {

// Root of phi on the interval right of the largest pole, when g2 < 0.
double right_root(double g2, double c, const Atoms& a, double top_pole) {
  auto phi = [&](double x) { return g2 + (a.w * a.t / (x - a.t * c)).sum(); };
  const double mean = (a.w * a.t).sum();
  const double far = top_pole + 2.0 * mean / std::abs(g2);
  double delta = 1e-12 * std::max(std::abs(top_pole), far - top_pole);
  double lo = top_pole + delta;
  double flo = phi(lo);
  for (int k = 0; k < 6 && !(flo > 0.0); ++k) {
    delta *= 1e-3;
    lo = top_pole + delta;
    flo = phi(lo);
  }
  const double fhi = phi(far);
  if (!(flo > 0.0) || !(fhi < 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return solve_bracket(phi, lo, far, flo, fhi);
}

}  // namespace

std::vector<double> branch_roots(double g2, const Atoms& a, const Atoms& b, double q) {
  const double c = q * h_of(b, g2);
  const double mean = (a.w * a.t).sum();
  std::vector<double> roots;
  if (c == 0.0) {
    if (g2 != 0.0) roots.push_back(-mean / g2);
    return roots;
  }
  std::vector<std::pair<double, double>> poles;  // (pole, weight * t)
  for (Index i = 0; i < a.t.size(); ++i) poles.emplace_back(a.t(i) * c, a.w(i) * a.t(i));
  std::sort(poles.begin(), poles.end());
  auto phi = [&](double x) { return g2 + (a.w * a.t / (x - a.t * c)).sum(); };

  const std::size_t k = poles.size();
  if (g2 > 0.0) {
    const double hi_pole = poles.front().first;
    const double lo = hi_pole - 2.0 * mean / g2;
    double delta = 1e-12 * std::max(std::abs(hi_pole), hi_pole - lo);
    double hi = hi_pole - delta;
    double fhi = phi(hi);
    for (int r = 0; r < 6 && !(fhi < 0.0); ++r) {
      delta *= 1e-3;
      hi = hi_pole - delta;
      fhi = phi(hi);
    }
    const double flo = phi(lo);
    if (flo > 0.0 && fhi < 0.0) roots.push_back(solve_bracket(phi, lo, hi, flo, fhi));
  }
  for (std::size_t i = 0; i + 1 < k; ++i) {
    const double p0 = poles[i].first;
    const double p1 = poles[i + 1].first;
    double delta = 1e-12 * (p1 - p0);
    double lo = p0 + delta;
    double hi = p1 - delta;
    double flo = phi(lo);
    double fhi = phi(hi);
    for (int r = 0; r < 6 && !(flo > 0.0 && fhi < 0.0); ++r) {
      delta *= 1e-3;
      lo = p0 + delta;
      hi = p1 - delta;
      flo = phi(lo);
      fhi = phi(hi);
    }
    if (flo > 0.0 && fhi < 0.0) roots.push_back(solve_bracket(phi, lo, hi, flo, fhi));
  }
  if (g2 < 0.0) {
    const double x = right_root(g2, c, a, poles.back().first);
    if (std::isfinite(x)) roots.push_back(x);
  }
  return roots;
}

bool polish_g2(double x, double& g2, const Atoms& a, const Atoms& b, double q) {
  double g = g2;
  for (int it = 0; it < 100; ++it) {
    const double f = f_of(x, g, a, b, q);
    const double d = df_of(x, g, a, b, q);
    if (!std::isfinite(f) || !std::isfinite(d) || d == 0.0) return false;
    const double step = f / d;
    g -= step;
    if (std::abs(step) <= 1e-14 * std::max(1.0, std::abs(g))) {
      g2 = g;
      return true;
    }
  }
  return false;
}

}  // namespace detail

namespace {

[[noreturn]] void fail(Errc code, const std::string& message) {
  throw Error(code, "rmt", message);
}

void check_q(double q) {
  if (!(q > 0.0) || !std::isfinite(q)) fail(Errc::BadQ, "aspect ratio must be positive");
}

struct Evaluation {
  Complex g1;
  Complex next;
};

Evaluation step(const detail::Atoms& a, const detail::Atoms& b, double q, Complex z, Complex g2) {
  Complex g1(0.0, 0.0);
  for (Index j = 0; j < b.t.size(); ++j) g1 += b.w(j) * b.t(j) / (-z * (1.0 + b.t(j) * g2));
  g1 *= q;
  Complex next(0.0, 0.0);
  for (Index i = 0; i < a.t.size(); ++i) next += a.w(i) * a.t(i) / (-z * (1.0 + a.t(i) * g1));
  return {g1, next};
}

// Newton on g2 - R(g2) = 0 where R is one sweep of the fixed-point map.
bool newton(const detail::Atoms& a, const detail::Atoms& b, double q, Complex z, Complex& g2,
            double tol, Index& iterations) {
  Complex g = g2;
  for (int it = 0; it < 200; ++it) {
    ++iterations;
    Complex g1(0.0, 0.0);
    Complex dg1(0.0, 0.0);
    for (Index j = 0; j < b.t.size(); ++j) {
      const Complex den = 1.0 + b.t(j) * g;
      g1 += b.w(j) * b.t(j) / (-z * den);
      dg1 += b.w(j) * b.t(j) * b.t(j) / (z * den * den);
    }
    g1 *= q;
    dg1 *= q;
    Complex r(0.0, 0.0);
    Complex dr(0.0, 0.0);
    for (Index i = 0; i < a.t.size(); ++i) {
      const Complex den = 1.0 + a.t(i) * g1;
      r += a.w(i) * a.t(i) / (-z * den);
      dr += a.w(i) * a.t(i) * a.t(i) / (z * den * den);
    }
    const Complex jac = 1.0 - dr * dg1;
    if (std::abs(jac) == 0.0) return false;
    const Complex delta = (g - r) / jac;
    g -= delta;
    if (!std::isfinite(g.real()) || !std::isfinite(g.imag())) return false;
    if (std::abs(delta) < tol * std::max(1.0, std::abs(g))) {
      g2 = g;
      return true;
    }
  }
  return false;
}

SeparablePoint finish(const detail::Atoms& a, const detail::Atoms& b, double q, Complex z,
                      Complex g2) {
  SeparablePoint out;
  out.g2 = g2;
  Complex g1(0.0, 0.0);
  Complex m(0.0, 0.0);
  for (Index j = 0; j < b.t.size(); ++j) {
    const Complex den = -z * (1.0 + b.t(j) * g2);
    g1 += b.w(j) * b.t(j) / den;
    m += b.w(j) / den;
  }
  out.g1 = q * g1;
  out.m = m;
  Complex mc(0.0, 0.0);
  for (Index i = 0; i < a.t.size(); ++i) mc += a.w(i) / (-z * (1.0 + a.t(i) * out.g1));
  out.m_complement = mc;
  return out;
}

// Physical solutions have transforms in the same half plane as z.
bool physical(const SeparablePoint& s, Complex z) {
  if (z.imag() == 0.0) return true;
  const double sign = z.imag() > 0.0 ? 1.0 : -1.0;
  const double slack = 1e-8 * std::max(1.0, std::abs(s.m));
  return sign * s.m.imag() >= -slack && sign * s.m_complement.imag() >= -slack;
}

}  // namespace

SeparablePoint solve_separable_point(const AtomDensity& rho_a, const AtomDensity& rho_b, double q,
                                     Complex z, const SeparableOptions& options,
                                     std::optional<Complex> g2_start) {
  check_q(q);
  if (std::abs(z) == 0.0) fail(Errc::PreconditionViolation, "z must be nonzero");
  if (!(options.damping > 0.0 && options.damping <= 1.0)) {
    fail(Errc::PreconditionViolation, "damping must be in (0, 1]");
  }
  const detail::Atoms a(rho_a);
  const detail::Atoms b(rho_b);
  Complex g2 = g2_start.value_or(-1.0 / z);
  const double w = options.damping;
  const Index newton_after = std::min<Index>(options.max_iter, 500);

  Index it = 0;
  bool converged = false;
  bool tried_newton = false;
  while (it < options.max_iter) {
    const Evaluation e = step(a, b, q, z, g2);
    const Complex next = (1.0 - w) * g2 + w * e.next;
    ++it;
    const double change = std::abs(next - g2);
    g2 = next;
    if (!std::isfinite(g2.real()) || !std::isfinite(g2.imag())) break;
    if (change < options.tol * std::max(1.0, std::abs(g2))) {
      converged = true;
      break;
    }
    if (options.newton_fallback && !tried_newton && it >= newton_after) {
      tried_newton = true;
      Complex trial = g2;
      Index extra = 0;
      if (newton(a, b, q, z, trial, options.tol, extra) && physical(finish(a, b, q, z, trial), z)) {
        it += extra;
        g2 = trial;
        converged = true;
        break;
      }
      it += extra;
    }
  }
  SeparablePoint out = finish(a, b, q, z, g2);
  out.iterations = it;
  out.converged = converged && std::isfinite(out.m.real()) && std::isfinite(out.m.imag());
  return out;
}

bool StieltjesSolution::complete() const {
  return std::all_of(converged.begin(), converged.end(), [](bool c) { return c; });
}

double default_eta(const Vector& grid) {
  if (grid.size() < 2) fail(Errc::PreconditionViolation, "grid needs at least two points");
  return 1e-6 * (grid.maxCoeff() - grid.minCoeff());
}

StieltjesSolution solve_separable_density(const AtomDensity& rho_a, const AtomDensity& rho_b,
                                          double q, const Vector& grid, std::optional<double> eta,
                                          const SeparableOptions& options) {
  check_q(q);
  if (grid.size() < 2) fail(Errc::PreconditionViolation, "grid needs at least two points");
  for (Index i = 1; i < grid.size(); ++i) {
    if (!(grid(i) > grid(i - 1))) fail(Errc::PreconditionViolation, "grid must be increasing");
  }
  StieltjesSolution out;
  out.grid = grid;
  out.eta = eta.value_or(default_eta(grid));
  if (!(out.eta > 0.0)) fail(Errc::PreconditionViolation, "eta must be positive");

  const Index k = grid.size();
  out.density = Vector::Zero(k);
  for (Index i = 0; i < k; ++i) {
    const Complex z(grid(i), out.eta);
    const SeparablePoint s = solve_separable_point(rho_a, rho_b, q, z, options);
    out.m.push_back(s.m);
    out.g1.push_back(s.g1);
    out.g2.push_back(s.g2);
    out.converged.push_back(s.converged);
    out.density(i) = s.m.imag() / std::numbers::pi;
  }
  const double peak = out.density.maxCoeff();
  for (Index i = 0; i < k; ++i) out.support_mask.push_back(out.density(i) > 1e-4 * peak);
  return out;
}

double separable_f(double x, double g2, const AtomDensity& rho_a, const AtomDensity& rho_b,
                   double q) {
  check_q(q);
  return detail::f_of(x, g2, detail::Atoms(rho_a), detail::Atoms(rho_b), q);
}

double separable_df(double x, double g2, const AtomDensity& rho_a, const AtomDensity& rho_b,
                    double q) {
  check_q(q);
  return detail::df_of(x, g2, detail::Atoms(rho_a), detail::Atoms(rho_b), q);
}

bool outside_support_check(double x, double g2, const AtomDensity& rho_a,
                           const AtomDensity& rho_b, double q) {
  check_q(q);
  const detail::Atoms a(rho_a);
  const detail::Atoms b(rho_b);
  const double f = detail::f_of(x, g2, a, b, q);
  if (!(std::abs(f) <= 1e-10 * std::max(1.0, std::abs(g2)))) {
    fail(Errc::NotASolution, "F(x, g2) = " + std::to_string(f) + " is not zero");
  }
  return detail::df_of(x, g2, a, b, q) > 1e-10;
}

namespace {

constexpr Index kEdgeGrid = 801;
constexpr double kEdgeSpan = 30.0;
constexpr std::size_t kFullSearchAtoms = 32;

// alpha = -1/g2 over one interval between the atoms of rho_B, indexed by tau.
struct AlphaInterval {
  double lo;
  double hi;
  double scale;

  double at(double tau) const {
    if (std::isinf(hi)) return lo + scale * std::exp(tau);
    if (std::isinf(lo)) return hi - scale * std::exp(tau);
    return lo + (hi - lo) / (1.0 + std::exp(-tau));
  }
};

struct BranchPoint {
  std::vector<double> roots;
  std::vector<double> d;
};

BranchPoint branch_point(double alpha, const detail::Atoms& a, const detail::Atoms& b, double q,
                         bool top_only) {
  BranchPoint bp;
  const double g2 = -1.0 / alpha;
  if (top_only) {
    const double c = q * detail::h_of(b, g2);
    const double top_pole = c > 0.0 ? a.max() * c : a.min() * c;
    const double x = detail::right_root(g2, c, a, top_pole);
    if (std::isfinite(x)) bp.roots.push_back(x);
  } else {
    bp.roots = detail::branch_roots(g2, a, b, q);
  }
  for (double x : bp.roots) bp.d.push_back(detail::df_of(x, g2, a, b, q));
  return bp;
}

}  // namespace

SupportEdges support_edges(const AtomDensity& rho_a, const AtomDensity& rho_b, double q) {
  check_q(q);
  const detail::Atoms a(rho_a);
  const detail::Atoms b(rho_b);
  const bool full = rho_a.size() <= kFullSearchAtoms && rho_b.size() <= kFullSearchAtoms;
  const double inf = std::numeric_limits<double>::infinity();
  const double scale = b.max();

  std::vector<AlphaInterval> intervals;
  intervals.push_back({b.max(), inf, scale});
  if (full) {
    std::vector<double> cuts{0.0};
    for (Index j = 0; j < b.t.size(); ++j) cuts.push_back(b.t(j));
    std::sort(cuts.begin(), cuts.end());
    intervals.push_back({-inf, 0.0, scale});
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      intervals.push_back({cuts[i], cuts[i + 1], scale});
    }
  }

  std::vector<std::pair<double, double>> found;  // (edge, g2)
  const double dtau = 2.0 * kEdgeSpan / static_cast<double>(kEdgeGrid - 1);
  for (const AlphaInterval& iv : intervals) {
    BranchPoint prev = branch_point(iv.at(-kEdgeSpan), a, b, q, !full);
    for (Index k = 1; k < kEdgeGrid; ++k) {
      const double t0 = -kEdgeSpan + dtau * static_cast<double>(k - 1);
      const double t1 = t0 + dtau;
      BranchPoint cur = branch_point(iv.at(t1), a, b, q, !full);
      if (cur.roots.size() == prev.roots.size()) {
        for (std::size_t r = 0; r < cur.roots.size(); ++r) {
          if ((prev.d[r] > 0.0) == (cur.d[r] > 0.0)) continue;
          double lo = t0;
          double hi = t1;
          const bool lo_positive = prev.d[r] > 0.0;
          bool ok = true;
          for (int it = 0; it < 100 && ok; ++it) {
            const double mid = 0.5 * (lo + hi);
            const BranchPoint bm = branch_point(iv.at(mid), a, b, q, !full);
            if (bm.roots.size() != cur.roots.size()) {
              ok = false;
              break;
            }
            if ((bm.d[r] > 0.0) == lo_positive) {
              lo = mid;
            } else {
              hi = mid;
            }
          }
          if (!ok) continue;
          const double alpha = iv.at(0.5 * (lo + hi));
          const BranchPoint be = branch_point(alpha, a, b, q, !full);
          if (be.roots.size() != cur.roots.size()) continue;
          const double x = be.roots[r];
          if (x > 1e-12 * scale) found.emplace_back(x, -1.0 / alpha);
        }
      }
      prev = std::move(cur);
    }
  }
  if (found.empty()) fail(Errc::NoEdgeFound, "no support edge found");

  std::sort(found.begin(), found.end(), [](auto l, auto r) { return l.first > r.first; });
  SupportEdges out;
  for (const auto& [x, g2] : found) {
    if (!out.edges.empty() && std::abs(out.edges.back() - x) <= 1e-9 * std::max(1.0, x)) continue;
    out.edges.push_back(x);
    out.g2_at_edges.push_back(g2);
  }
  if (!full) {
    // Only the outermost edge is located for densities with many atoms.
    out.edges.resize(1);
    out.g2_at_edges.resize(1);
  }
  return out;
}

}  // namespace rmtspca::rmt
