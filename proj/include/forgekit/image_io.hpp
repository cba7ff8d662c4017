#pragma once

#include <string>

#include "forgekit/tensor.hpp"

namespace fk {

// PNG I/O on [0,1] float planes. RGB tensors are [3,H,W], grayscale [1,H,W].
// All throw std::runtime_error on I/O failure.
void write_png_rgb(const std::string& path, const Tensor& img);
void write_png_gray(const std::string& path, const Tensor& img);
Tensor read_png_rgb(const std::string& path);
Tensor read_png_gray(const std::string& path);

// raw 32-bit little-endian floats, row-major; depth maps are [1,H,W]
void write_depth_bin(const std::string& path, const Tensor& depth);
Tensor read_depth_bin(const std::string& path, int height, int width);

// write-to-temp + rename so partially written files never appear
void atomic_write_bytes(const std::string& path, const std::string& bytes);
std::string read_bytes(const std::string& path);

}  // namespace fk
