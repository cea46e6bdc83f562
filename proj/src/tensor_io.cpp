#include "bubbledyn/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace bubbledyn {

namespace {

constexpr char kMagic[4] = {'B', 'T', 'N', 'S'};
constexpr uint8_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "tensor i/o assumes a little-endian host");

}  // namespace

void tensor_write(const std::string& path, const std::vector<uint32_t>& dims,
                  const std::vector<float>& data) {
  size_t n = 1;
  for (uint32_t d : dims) n *= d;
  if (n != data.size())
    throw TensorFormatError("tensor_write: dims do not match data length");
  if (dims.size() > 255) throw TensorFormatError("tensor_write: rank > 255");

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw TensorFormatError("tensor_write: cannot open " + path);
  f.write(kMagic, 4);
  uint8_t ver = kVersion, rank = static_cast<uint8_t>(dims.size());
  f.write(reinterpret_cast<const char*>(&ver), 1);
  f.write(reinterpret_cast<const char*>(&rank), 1);
  f.write(reinterpret_cast<const char*>(dims.data()),
          static_cast<std::streamsize>(dims.size() * 4));
  f.write(reinterpret_cast<const char*>(data.data()),
          static_cast<std::streamsize>(data.size() * 4));
  if (!f) throw TensorFormatError("tensor_write: write failed for " + path);
}

TensorData tensor_read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw TensorFormatError("tensor_read: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw TensorFormatError("tensor_read: bad magic in " + path);
  uint8_t ver = 0, rank = 0;
  f.read(reinterpret_cast<char*>(&ver), 1);
  f.read(reinterpret_cast<char*>(&rank), 1);
  if (!f || ver != kVersion)
    throw TensorFormatError("tensor_read: unsupported version in " + path);

  TensorData t;
  t.dims.resize(rank);
  f.read(reinterpret_cast<char*>(t.dims.data()), rank * 4);
  if (!f) throw TensorFormatError("tensor_read: truncated dims in " + path);
  size_t n = t.count();
  t.data.resize(n);
  f.read(reinterpret_cast<char*>(t.data.data()),
         static_cast<std::streamsize>(n * 4));
  if (static_cast<size_t>(f.gcount()) != n * 4)
    throw TensorFormatError("tensor_read: truncated payload in " + path);
  return t;
}

}  // namespace bubbledyn
