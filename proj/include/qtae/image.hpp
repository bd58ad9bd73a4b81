#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "qtae/tensor.hpp"

namespace qtae {

/// Images are [C, H, W] float tensors with values in [0, 1]; C is 1 or 3.
using Image = Tensor<float>;

std::uint8_t to_byte(float v);

/// Binary PPM (P6). Single-channel images are written as grey RGB.
void write_ppm(const std::filesystem::path& path, const Image& image);
/// Reads P6 (RGB) or P5 (grey). `channels` forces 1 or 3 output channels; 0 keeps the file's.
Image read_ppm(const std::filesystem::path& path, std::size_t channels = 0);

/// Tiles equally sized images into `rows` x `cols`, row-major.
Image tile_grid(const std::vector<Image>& frames, std::size_t rows, std::size_t cols);

/// [C,H,W] -> interleaved H*W*C bytes, and back.
std::vector<std::uint8_t> to_interleaved_bytes(const Image& image);
Image from_interleaved_bytes(const std::uint8_t* bytes, std::size_t channels, std::size_t height, std::size_t width);

/// Zero-pads (or crops) to height x width, keeping the content centred.
Image center_canvas(const Image& image, std::size_t height, std::size_t width);

}  // namespace qtae
