#pragma once

#include <string>

#include "gms/metrics.hpp"
#include "gms/tensor.hpp"

namespace gms {

// Binary netpbm interchange: P6 (images) and P5 (masks/grayscale), maxval
// 255. Images quantize to 8 bits on save; masks round-trip exactly with
// foreground stored as 255.

void write_ppm(const std::string& path, const Tensor<float>& image);     // [3,H,W] in [0,1]
Tensor<float> read_ppm(const std::string& path);

void write_pgm_mask(const std::string& path, const Mask& mask);          // {0,255}
Mask read_pgm_mask(const std::string& path);                             // values must be {0,255}

void write_pgm_gray(const std::string& path, const Tensor<float>& gray); // [H,W] in [0,1]

}  // namespace gms
