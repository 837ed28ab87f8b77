#include "ebpca/matrix_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace ebpca {

namespace {

constexpr std::array<char, 4> kMagic{'E', 'B', 'P', 'M'};

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32_le(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

double parse_double(std::string_view tok, const std::string& path, std::size_t line) {
  while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
  while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r')) tok.remove_suffix(1);
  double v = 0.0;
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    fail(ErrorKind::kIo, path + ":" + std::to_string(line) + ": not a finite number: '" +
                             std::string(tok) + "'");
  }
  return v;
}

}  // namespace

MatrixFormat parse_format(const std::string& name) {
  if (name == "csv") return MatrixFormat::kCsv;
  if (name == "bin") return MatrixFormat::kBinary;
  if (name == "auto") return MatrixFormat::kAuto;
  fail(ErrorKind::kConfig, "unknown matrix format '" + name + "' (expected csv or bin)");
}

Matrix read_matrix(const std::string& path, MatrixFormat format) {
  if (format == MatrixFormat::kAuto) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "'");
    std::array<char, 4> head{};
    in.read(head.data(), 4);
    format = (in.gcount() == 4 && head == kMagic) ? MatrixFormat::kBinary : MatrixFormat::kCsv;
  }
  return format == MatrixFormat::kBinary ? read_binary(path) : read_csv(path);
}

Matrix read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "'");
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t count = 0, start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view tok(line.data() + start,
                                 (comma == std::string::npos ? line.size() : comma) - start);
      values.push_back(parse_double(tok, path, lineno));
      ++count;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (rows == 0) cols = count;
    else if (count != cols) {
      fail(ErrorKind::kIo, path + ":" + std::to_string(lineno) + ": ragged row (" +
                               std::to_string(count) + " fields, expected " + std::to_string(cols) + ")");
    }
    ++rows;
  }
  if (rows == 0) fail(ErrorKind::kIo, "'" + path + "' contains no data");
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = values[i * cols + j];
  return m;
}

Matrix read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "'");
  unsigned char header[16];
  in.read(reinterpret_cast<char*>(header), 16);
  if (in.gcount() != 16) fail(ErrorKind::kIo, "'" + path + "' is too short for a matrix header");
  if (std::memcmp(header, kMagic.data(), 4) != 0) fail(ErrorKind::kIo, "'" + path + "' lacks the EBPM magic");
  const std::uint32_t rows = read_u32_le(header + 4);
  const std::uint32_t cols = read_u32_le(header + 8);
  if (rows == 0 || cols == 0) fail(ErrorKind::kIo, "'" + path + "' declares an empty matrix");
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> raw(count * 8);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    fail(ErrorKind::kIo, "'" + path + "' is truncated");
  }
  if (in.peek() != std::char_traits<char>::eof()) fail(ErrorKind::kIo, "'" + path + "' has trailing bytes");
  Matrix m(rows, cols);
  for (std::size_t idx = 0; idx < count; ++idx) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | raw[idx * 8 + static_cast<std::size_t>(b)];
    const double v = std::bit_cast<double>(bits);
    if (!std::isfinite(v)) fail(ErrorKind::kIo, "'" + path + "' contains non-finite values");
    m(static_cast<Index>(idx / cols), static_cast<Index>(idx % cols)) = v;
  }
  return m;
}

void write_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path + "'");
  char buf[64];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out.put(',');
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, m(i, j), std::chars_format::general, 17);
      out.write(buf, ptr - buf);
    }
    out.put('\n');
  }
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path + "'");
}

void write_binary(const std::string& path, const Matrix& m) {
  require(m.rows() <= 0xffffffffLL && m.cols() <= 0xffffffffLL, ErrorKind::kIo,
          "matrix too large for the binary format");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path + "'");
  out.write(kMagic.data(), 4);
  put_u32_le(out, static_cast<std::uint32_t>(m.rows()));
  put_u32_le(out, static_cast<std::uint32_t>(m.cols()));
  put_u32_le(out, 0);  // reserved
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(m(i, j));
      unsigned char b[8];
      for (int q = 0; q < 8; ++q) {
        b[q] = static_cast<unsigned char>(bits & 0xff);
        bits >>= 8;
      }
      out.write(reinterpret_cast<const char*>(b), 8);
    }
  }
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path + "'");
}

Index standardize_rows(Matrix& m) {
  Index constant = 0;
  const double cols = static_cast<double>(m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    const double mean = m.row(i).mean();
    m.row(i).array() -= mean;
    const double var = m.row(i).squaredNorm() / cols;
    if (var > 0.0) m.row(i) /= std::sqrt(var);
    else ++constant;
  }
  return constant;
}

}  // namespace ebpca
