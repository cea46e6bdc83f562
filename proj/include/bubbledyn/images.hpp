#pragma once

#include <string>
#include <vector>

#include "bubbledyn/depth_map.hpp"

namespace bubbledyn {

// 16-bit PGM export of one depth channel; 1 unit = 0.01 mm.
void write_pgm16(const std::string& path, int rows, int cols,
                 const float* meters);
void write_depth_pgm(const std::string& prefix, const DepthMapPair& m);

struct BitMask {
  int rows = 0, cols = 0;
  std::vector<uint8_t> bits;  // 0/1 per pixel, row-major

  BitMask() = default;
  BitMask(int r, int c) : rows(r), cols(c), bits(size_t(r) * c, 0) {}
  uint8_t& at(int r, int c) { return bits[size_t(r) * cols + c]; }
  uint8_t at(int r, int c) const { return bits[size_t(r) * cols + c]; }
  size_t count() const;
};

void write_pbm(const std::string& path, const BitMask& m);
BitMask read_pbm(const std::string& path);

}  // namespace bubbledyn
