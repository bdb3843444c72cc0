#include "freqpad/data/npy.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>

#include "freqpad/error.hpp"

namespace freqpad::data {

namespace {
constexpr char kMagic[] = "\x93NUMPY";
}

void write_npy(const std::filesystem::path& path, const Tensor<float>& tensor) {
  const Shape s = tensor.shape();
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + std::to_string(s.n) + ", " +
                       std::to_string(s.c) + ", " + std::to_string(s.h) + ", " + std::to_string(s.w) + "), }";
  // magic(6) + version(2) + length(2) + header + '\n' must be a multiple of 64.
  const std::size_t total = 10 + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header.push_back('\n');
  const auto len = static_cast<std::uint16_t>(header.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), "write_npy: cannot open " + path.string());
  out.write(kMagic, 6);
  out.put('\x01');
  out.put('\x00');
  out.put(static_cast<char>(len & 0xff));
  out.put(static_cast<char>(len >> 8));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(tensor.data()), static_cast<std::streamsize>(tensor.size() * sizeof(float)));
  require(static_cast<bool>(out), "write_npy: write failed for " + path.string());
}

NpyArray read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "read_npy: cannot open " + path.string());
  char pre[10];
  in.read(pre, 10);
  require(in && std::memcmp(pre, kMagic, 6) == 0 && pre[6] == 1, "read_npy: not an NPY v1 file");
  const std::size_t len = static_cast<unsigned char>(pre[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(pre[9])) << 8);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  require(header.find("'descr': '<f4'") != std::string::npos && header.find("'fortran_order': False") != std::string::npos,
          "read_npy: only C-order little-endian float32 is supported");
  std::smatch m;
  require(std::regex_search(header, m, std::regex(R"('shape': \(([^)]*)\))")), "read_npy: missing shape");
  NpyArray out;
  std::size_t count = 1;
  const std::string dims = m[1];
  const std::regex number(R"(\d+)");
  for (std::sregex_iterator it(dims.begin(), dims.end(), number), end; it != end; ++it) {
    out.shape.push_back(std::stoull(it->str()));
    count *= out.shape.back();
  }
  out.values.resize(count);
  in.read(reinterpret_cast<char*>(out.values.data()), static_cast<std::streamsize>(count * sizeof(float)));
  require(static_cast<bool>(in), "read_npy: truncated data");
  return out;
}

}  // namespace freqpad::data
