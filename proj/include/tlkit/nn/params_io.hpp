#pragma once

#include <filesystem>
#include <string>

#include "tlkit/nn/cbam.hpp"

namespace tlkit::nn {

// Blob layout: one line of JSON describing the block, a newline, then every
// parameter as a little-endian IEEE-754 double in flatten() order.
//
//   {"format":"tlkit-cbam","version":1,"channels":8,"reduction":4,"kernel_size":7,
//    "tensors":[{"name":"mlp_w1","shape":[2,8]},{"name":"mlp_w2","shape":[8,2]},
//               {"name":"spatial_kernel","shape":[2,7,7]}]}

std::string encode_params(const CbamParams& p);
/// Throws FormatError on a bad header, a shape mismatch or a short payload.
CbamParams decode_params(const std::string& blob);

void save_params(const std::filesystem::path& file, const CbamParams& p);
CbamParams load_params(const std::filesystem::path& file);

}  // namespace tlkit::nn
