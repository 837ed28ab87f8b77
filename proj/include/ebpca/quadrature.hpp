#pragma once

#include "ebpca/common.hpp"

namespace ebpca::quadrature {

struct Rule {
  Vector nodes;
  Vector weights;
};

/// Gauss–Hermite rule for E[f(Z)], Z ~ N(0,1): sum_i w_i f(x_i), weights sum
/// to one. Rules are computed once per size (Golub–Welsch) and cached.
const Rule& gauss_hermite(int n);

/// Gauss–Legendre rule on [-1, 1].
const Rule& gauss_legendre(int n);

}  // namespace ebpca::quadrature
