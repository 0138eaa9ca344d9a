#pragma once

#include "rmtspca/biwhiten.hpp"
#include "rmtspca/types.hpp"

#include <vector>

namespace rmtspca::rmt::detail {

struct Atoms {
  Eigen::ArrayXd t;
  Eigen::ArrayXd w;

  explicit Atoms(const AtomDensity& rho);
  double max() const { return t.maxCoeff(); }
  double min() const { return t.minCoeff(); }
};

/// h(g2) = sum w t / (1 + t g2).
double h_of(const Atoms& b, double g2);
double f_of(double x, double g2, const Atoms& a, const Atoms& b, double q);
double df_of(double x, double g2, const Atoms& a, const Atoms& b, double q);

/// Real roots x of F(x, g2) = 0 for fixed g2, ascending: one per gap
/// between the poles t_a q h(g2), plus the outer ones allowed by sign(g2).
std::vector<double> branch_roots(double g2, const Atoms& a, const Atoms& b, double q);

/// Root of F(x, .) = 0 in g2 near `g2`, by Newton on the real axis.
bool polish_g2(double x, double& g2, const Atoms& a, const Atoms& b, double q);

}  // namespace rmtspca::rmt::detail
