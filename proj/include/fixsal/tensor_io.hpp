#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fixsal/tensor.hpp"

namespace fixsal {

// ".egct" container:
//   "EGCT" | u8 version (1) | u8 dtype (0 = f32 LE) | u16 rank (LE)
//   | rank x u32 dims (LE) | row-major f32 LE payload
inline constexpr char kTensorMagic[4] = {'E', 'G', 'C', 'T'};
inline constexpr std::uint8_t kTensorVersion = 1;
inline constexpr std::uint8_t kTensorDtypeF32 = 0;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

/// Binary PGM ("P5", maxval 255). Values are clamped to [0,1] and scaled by 255.
void write_pgm(const std::filesystem::path& path, const Tensor& image);
/// Returns an HxW tensor with values in [0,1].
Tensor read_pgm(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace fixsal
