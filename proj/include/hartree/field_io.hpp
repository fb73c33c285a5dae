#pragma once

// Fixed binary field format and CSV emission.
//
// Field files are little-endian: 8 magic bytes "HARTFLD1", then the grid
// header (n and L, each an 8-byte float), then the samples as interleaved
// real/imag 8-byte floats in row-major order.  The layout is deliberately
// trivial so independent readers can check it byte for byte.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hartree/grid.hpp"

namespace hartree {

static_assert(std::endian::native == std::endian::little,
              "field files are little-endian; big-endian hosts unsupported");

inline constexpr char field_magic[8] = {'H', 'A', 'R', 'T', 'F', 'L', 'D', '1'};

inline void write_field(const std::filesystem::path& path,
                        const ComplexField& f) {
  if (f.space() != Space::position)
    throw std::invalid_argument("write_field: position-space field required");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_field: cannot open " + path.string());
  out.write(field_magic, 8);
  const double n = static_cast<double>(f.grid().n());
  const double L = f.grid().half_width();
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&L), 8);
  std::vector<double> buf(2 * f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    buf[2 * i] = f[i].real();
    buf[2 * i + 1] = f[i].imag();
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * 8));
  if (!out) throw std::runtime_error("write_field: short write " + path.string());
}

inline ComplexField read_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_field: cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, field_magic, 8) != 0)
    throw std::runtime_error("read_field: bad magic in " + path.string());
  double n_raw = 0.0, L = 0.0;
  in.read(reinterpret_cast<char*>(&n_raw), 8);
  in.read(reinterpret_cast<char*>(&L), 8);
  const int n = static_cast<int>(n_raw);
  if (!in || n < 2 || static_cast<double>(n) != n_raw || !(L > 0.0))
    throw std::runtime_error("read_field: bad grid header in " + path.string());
  ComplexField f(GridSpec(n, L), Space::position);
  std::vector<double> buf(2 * f.size());
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * 8));
  if (!in) throw std::runtime_error("read_field: truncated " + path.string());
  char extra;
  if (in.read(&extra, 1))
    throw std::runtime_error("read_field: trailing bytes in " + path.string());
  for (std::size_t i = 0; i < f.size(); ++i)
    f[i] = cplx(buf[2 * i], buf[2 * i + 1]);
  return f;
}

// CSV with a fixed shortest-round-trip numeric format, so identical inputs
// produce byte-identical files.
inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path.string());
  for (std::size_t c = 0; c < header.size(); ++c)
    out << (c ? "," : "") << header[c];
  out << "\n";
  char buf[40];
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw std::invalid_argument("write_csv: ragged row");
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", row[c]);
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_csv: short write " + path.string());
}

}  // namespace hartree
