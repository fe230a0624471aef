#pragma once

#include <string>

#include "frvs/tensor.hpp"

namespace frvs::io {

// 8-bit PNG; tensors are C x H x W in [0,1], C = 1 or 3.
// Save quantizes with round-half-up; load divides by 255.
void save_png(const Tensor& image, const std::string& path);
Tensor load_png(const std::string& path);

// Grayscale PFM ("Pf"), little-endian, 1 x H x W.
void save_pfm(const Tensor& map, const std::string& path);
Tensor load_pfm(const std::string& path);

// Middlebury .flo: magic float 202021.25 ("PIEH"), i32 width/height,
// interleaved (u,v) float32 per pixel. Tensor layout is 2 x H x W.
void save_flo(const Tensor& flow, const std::string& path);
Tensor load_flo(const std::string& path);

}  // namespace frvs::io
