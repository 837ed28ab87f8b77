#include "ebpca/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace ebpca::quadrature {
namespace {

// Golub–Welsch: nodes are eigenvalues of the symmetric Jacobi matrix, weights
// mu0 * (first eigenvector component)^2.
Rule golub_welsch(const Vector& diag, const Vector& offdiag, double mu0) {
  const Index n = diag.size();
  Matrix jacobi = Matrix::Zero(n, n);
  jacobi.diagonal() = diag;
  for (Index i = 0; i + 1 < n; ++i) {
    jacobi(i, i + 1) = offdiag(i);
    jacobi(i + 1, i) = offdiag(i);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi);
  Rule rule;
  rule.nodes = es.eigenvalues();
  rule.weights = mu0 * es.eigenvectors().row(0).transpose().array().square();
  rule.weights /= rule.weights.sum();
  rule.weights *= mu0;
  return rule;
}

std::mutex cache_mutex;

}  // namespace

const Rule& gauss_hermite(int n) {
  require(n >= 1, ErrorKind::kValidation, "quadrature size must be positive");
  static std::map<int, Rule> cache;
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  // Probabilists' Hermite recurrence: x He_k = He_{k+1} + k He_{k-1}.
  Vector diag = Vector::Zero(n);
  Vector off(std::max(n - 1, 0));
  for (int i = 0; i + 1 < n; ++i) off(i) = std::sqrt(static_cast<double>(i + 1));
  return cache.emplace(n, golub_welsch(diag, off, 1.0)).first->second;
}

const Rule& gauss_legendre(int n) {
  require(n >= 1, ErrorKind::kValidation, "quadrature size must be positive");
  static std::map<int, Rule> cache;
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Vector diag = Vector::Zero(n);
  Vector off(std::max(n - 1, 0));
  for (int i = 0; i + 1 < n; ++i) {
    const double k = i + 1;
    off(i) = k / std::sqrt(4.0 * k * k - 1.0);
  }
  return cache.emplace(n, golub_welsch(diag, off, 2.0)).first->second;
}

}  // namespace ebpca::quadrature
