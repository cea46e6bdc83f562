#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bubbledyn {

// Binary tensor container: magic "BTNS", version u8, rank u8, dims as u32
// little-endian, then row-major float32 little-endian payload.
struct TensorData {
  std::vector<uint32_t> dims;
  std::vector<float> data;

  size_t count() const {
    size_t n = 1;
    for (uint32_t d : dims) n *= d;
    return n;
  }
};

struct TensorFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void tensor_write(const std::string& path, const std::vector<uint32_t>& dims,
                  const std::vector<float>& data);
TensorData tensor_read(const std::string& path);

}  // namespace bubbledyn
