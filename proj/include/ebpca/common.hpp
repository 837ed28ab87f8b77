#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ebpca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

enum class ErrorKind {
  kValidation,
  kDimension,
  kSubcritical,
  kDegenerateNoise,
  kAmbiguousRank,
  kRank,
  kChannel,
  kUndefinedAlignment,
  kUnsupported,
  kNothingToDenoise,
  kIo,
  kConfig,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` lets callers (the CLI in
/// particular) map failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

using Rng = std::mt19937_64;

/// Derives an independent generator for a named purpose from a base seed.
/// Streams with different ids never share state, so e.g. support subsampling
/// does not shift the draws used for the noise matrix.
Rng make_stream(std::uint64_t seed, std::uint64_t stream_id);

namespace streams {
inline constexpr std::uint64_t kPriorU = 1;
inline constexpr std::uint64_t kPriorV = 2;
inline constexpr std::uint64_t kNoise = 3;
inline constexpr std::uint64_t kSupport = 4;
inline constexpr std::uint64_t kMonteCarlo = 5;
inline constexpr std::uint64_t kLanczos = 6;
}  // namespace streams

std::uint64_t splitmix64(std::uint64_t x);

/// Fills `out` with i.i.d. standard normals.
void fill_normal(Rng& rng, double* out, Index count);

/// log(sum(exp(v))) without overflow.
double log_sum_exp(const Eigen::Ref<const Vector>& v);

/// Symmetric eigenvalue floor: returns V max(D, floor) V^T.
Matrix floor_eigenvalues(const Matrix& sym, double floor);

/// Symmetric PSD square root (negative eigenvalues clipped to zero).
Matrix psd_sqrt(const Matrix& sym);

/// FNV-1a 64 over the raw bytes of a matrix (column-major), used to certify
/// that several methods consumed the same data.
std::uint64_t hash_matrix(const Matrix& m);

}  // namespace ebpca
