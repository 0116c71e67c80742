#pragma once

#include <filesystem>

#include "nadsnet/tensor.hpp"

namespace nadsnet {

// NDT1 container: magic "NDT1", u32-LE rank (3), u32-LE dims (H, W, C),
// then H*W*C raw little-endian f32 values, row-major channels-last.
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace nadsnet
