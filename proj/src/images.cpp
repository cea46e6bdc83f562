#include "bubbledyn/images.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace bubbledyn {

void write_pgm16(const std::string& path, int rows, int cols,
                 const float* meters) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_pgm16: cannot open " + path);
  f << "P5\n" << cols << " " << rows << "\n65535\n";
  for (int i = 0; i < rows * cols; ++i) {
    double units = std::round(double(meters[i]) / 1e-5);
    uint16_t v = static_cast<uint16_t>(std::clamp(units, 0.0, 65535.0));
    // Big-endian per PGM convention.
    char b[2] = {char(v >> 8), char(v & 0xff)};
    f.write(b, 2);
  }
}

void write_depth_pgm(const std::string& prefix, const DepthMapPair& m) {
  write_pgm16(prefix + "_left.pgm", m.rows, m.cols, m.data.data());
  write_pgm16(prefix + "_right.pgm", m.rows, m.cols,
              m.data.data() + size_t(m.rows) * m.cols);
}

size_t BitMask::count() const {
  size_t n = 0;
  for (uint8_t b : bits) n += b != 0;
  return n;
}

void write_pbm(const std::string& path, const BitMask& m) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_pbm: cannot open " + path);
  f << "P4\n" << m.cols << " " << m.rows << "\n";
  int bytes_per_row = (m.cols + 7) / 8;
  std::vector<uint8_t> row(bytes_per_row);
  for (int r = 0; r < m.rows; ++r) {
    std::fill(row.begin(), row.end(), 0);
    for (int c = 0; c < m.cols; ++c)
      if (m.at(r, c)) row[c / 8] |= uint8_t(0x80 >> (c % 8));
    f.write(reinterpret_cast<const char*>(row.data()), bytes_per_row);
  }
}

BitMask read_pbm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_pbm: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P4") throw std::runtime_error("read_pbm: not a raw PBM");
  int cols = 0, rows = 0;
  f >> cols >> rows;
  f.get();  // single whitespace after header
  BitMask m(rows, cols);
  int bytes_per_row = (cols + 7) / 8;
  std::vector<uint8_t> row(bytes_per_row);
  for (int r = 0; r < rows; ++r) {
    f.read(reinterpret_cast<char*>(row.data()), bytes_per_row);
    for (int c = 0; c < cols; ++c)
      m.at(r, c) = (row[c / 8] >> (7 - c % 8)) & 1;
  }
  if (!f) throw std::runtime_error("read_pbm: truncated " + path);
  return m;
}

}  // namespace bubbledyn
