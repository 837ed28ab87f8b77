#pragma once

// Matrix files: plain CSV (rows = samples) and a small binary container
// ("EBPM", u32 rows, u32 cols, little-endian, then row-major float64).

#include "ebpca/common.hpp"

#include <string>

namespace ebpca {

enum class MatrixFormat { kAuto, kCsv, kBinary };

MatrixFormat parse_format(const std::string& name);

/// kAuto picks binary when the file starts with the magic bytes.
Matrix read_matrix(const std::string& path, MatrixFormat format = MatrixFormat::kAuto);
Matrix read_csv(const std::string& path);
Matrix read_binary(const std::string& path);

/// Values are written with 17 significant digits, so a write/read round trip
/// is exact and repeated runs produce identical bytes.
void write_csv(const std::string& path, const Matrix& m);
void write_binary(const std::string& path, const Matrix& m);

/// Centers and scales each row to mean 0, variance 1. Rows with zero
/// variance are only centered; their count is returned.
Index standardize_rows(Matrix& m);

}  // namespace ebpca
