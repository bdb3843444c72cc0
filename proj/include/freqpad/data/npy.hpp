#pragma once

#include <filesystem>
#include <vector>

#include "freqpad/tensor.hpp"

namespace freqpad::data {

// NPY v1.0, little-endian float32, C order, shape (N, C, H, W).
void write_npy(const std::filesystem::path& path, const Tensor<float>& tensor);

struct NpyArray {
  std::vector<std::size_t> shape;
  std::vector<float> values;
};
// Reads what write_npy writes ('<f4', C order); anything else is rejected.
NpyArray read_npy(const std::filesystem::path& path);

}  // namespace freqpad::data
