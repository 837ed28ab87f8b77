#include "ebpca/common.hpp"

#include <cmath>
#include <cstring>

namespace ebpca {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kSubcritical: return "sub-critical";
    case ErrorKind::kDegenerateNoise: return "degenerate-noise";
    case ErrorKind::kAmbiguousRank: return "ambiguous-rank";
    case ErrorKind::kRank: return "rank";
    case ErrorKind::kChannel: return "channel";
    case ErrorKind::kUndefinedAlignment: return "undefined-alignment";
    case ErrorKind::kUnsupported: return "unsupported";
    case ErrorKind::kNothingToDenoise: return "nothing-to-denoise";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kConfig: return "config";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(to_string(kind)) + " error: " + what);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng make_stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{splitmix64(seed), splitmix64(seed ^ 0xa5a5a5a5ULL),
                    splitmix64(stream_id * 0x632be59bd9b4e019ULL + 17),
                    splitmix64(seed + stream_id)};
  return Rng(seq);
}

void fill_normal(Rng& rng, double* out, Index count) {
  // Marsaglia polar method; written out so results do not depend on the
  // standard library's normal_distribution implementation.
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Index i = 0;
  while (i < count) {
    double a, b, r;
    do {
      a = unif(rng);
      b = unif(rng);
      r = a * a + b * b;
    } while (r >= 1.0 || r == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(r) / r);
    out[i++] = a * scale;
    if (i < count) out[i++] = b * scale;
  }
}

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

Matrix floor_eigenvalues(const Matrix& sym, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sym + sym.transpose()));
  Vector d = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Matrix psd_sqrt(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sym + sym.transpose()));
  Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

std::uint64_t hash_matrix(const Matrix& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::int64_t rows = m.rows(), cols = m.cols();
  mix(&rows, sizeof rows);
  mix(&cols, sizeof cols);
  mix(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  return h;
}

}  // namespace ebpca
