#pragma once

// Independent reference computations shared by the unit and acceptance tests.
// Deliberately naive: direct density sums, trapezoid rules, sorting.

#include "ebpca/npmle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace ebpca::oracle {

// Mean log-density of x under sum_j w_j N(mu a_j, s2). No log-sum-exp, so
// keep inputs small and well scaled.
inline double loglik_1d(const Vector& x, double mu, double s2, const Vector& atoms,
                        const Vector& w) {
  double total = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    double f = 0.0;
    for (Index j = 0; j < atoms.size(); ++j) {
      const double r = x(i) - mu * atoms(j);
      f += w(j) * std::exp(-0.5 * r * r / s2) / std::sqrt(2.0 * std::numbers::pi * s2);
    }
    total += std::log(f);
  }
  return total / static_cast<double>(x.size());
}

// W1 between two univariate discrete laws: integral of |F_a - F_b|.
inline double wasserstein1(const DiscretePrior& a, const DiscretePrior& b) {
  std::vector<std::pair<double, double>> ev;  // (position, signed mass)
  for (Index j = 0; j < a.size(); ++j) ev.emplace_back(a.atoms(j, 0), a.weights(j));
  for (Index j = 0; j < b.size(); ++j) ev.emplace_back(b.atoms(j, 0), -b.weights(j));
  std::sort(ev.begin(), ev.end());
  double cdf = 0.0, total = 0.0;
  for (std::size_t i = 0; i + 1 < ev.size(); ++i) {
    cdf += ev[i].second;
    total += std::abs(cdf) * (ev[i + 1].first - ev[i].first);
  }
  return total;
}

// E[tanh(mu^2 + mu Z)], Z ~ N(0,1), trapezoid rule on [-14, 14].
inline double two_point_overlap(double mu) {
  const int m = 40001;
  const double lo = -14.0, h = 28.0 / (m - 1);
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    const double z = lo + i * h;
    const double w = (i == 0 || i == m - 1) ? 0.5 : 1.0;
    total += w * std::tanh(mu * mu + mu * z) * std::exp(-0.5 * z * z);
  }
  return total * h / std::sqrt(2.0 * std::numbers::pi);
}

// Kolmogorov–Smirnov distance of a sample to N(0, 1).
inline double ks_standard_normal(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double F = 0.5 * std::erfc(-xs[i] / std::numbers::sqrt2);
    ks = std::max({ks, std::abs(F - i / n), std::abs(F - (i + 1) / n)});
  }
  return ks;
}

inline DiscretePrior symmetric_two_point() {
  DiscretePrior p;
  p.atoms.resize(2, 1);
  p.atoms << -1.0, 1.0;
  p.weights = Vector::Constant(2, 0.5);
  return p;
}

}  // namespace ebpca::oracle
