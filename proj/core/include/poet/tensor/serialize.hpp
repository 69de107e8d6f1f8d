#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "poet/tensor/tensor.hpp"

namespace poet {

// Named-tensor container file.
//
// Layout (all integers little-endian):
//   magic    8 bytes  "POETTNSR"
//   version  u32      currently 1
//   meta     u64 length + UTF-8 bytes (free-form, typically JSON)
//   count    u64
//   records  count x { name: u64 length + UTF-8 bytes,
//                      dtype: u8 (0 = f64, 1 = f32),
//                      rank: u32, dims: rank x u64,
//                      payload: elementwise little-endian f64/f32 }
struct TensorContainer {
  std::string meta;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

void save_container(const std::filesystem::path& path, const TensorContainer& c);
TensorContainer load_container(const std::filesystem::path& path);

}  // namespace poet
