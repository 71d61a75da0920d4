#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "unimatch/field.hpp"
#include "unimatch/matching.hpp"

namespace unimatch {

using Bytes = std::vector<std::uint8_t>;

/// A field plus one validity flag per pixel (1 = valid).
struct FieldWithMask {
  DenseField field;
  std::vector<std::uint8_t> valid;
};

// Middlebury .flo: float32 magic 202021.25, int32 width, int32 height, then
// interleaved float32 (u, v), all little endian.
Bytes encode_flo(const DenseField& flow);
DenseField decode_flo(std::span<const std::uint8_t> bytes);

// KITTI flow PNG: 16-bit RGB, u = (R - 2^15) / 64, v = (G - 2^15) / 64, B = valid.
Bytes encode_kitti_flow(const DenseField& flow, std::span<const std::uint8_t> valid = {});
FieldWithMask decode_kitti_flow(std::span<const std::uint8_t> bytes);

// KITTI disparity PNG: 16-bit gray, d = value / 256, 0 = invalid.
Bytes encode_kitti_disparity(const DenseField& disparity, std::span<const std::uint8_t> valid = {});
FieldWithMask decode_kitti_disparity(std::span<const std::uint8_t> bytes);

// Depth PNG: 16-bit gray millimetres, 0 = invalid.
Bytes encode_depth_png(const DenseField& depth, std::span<const std::uint8_t> valid = {});
FieldWithMask decode_depth_png(std::span<const std::uint8_t> bytes);

// PFM "Pf" (one channel), negative scale = little endian, rows bottom-up.
Bytes encode_pfm(const DenseField& field);
DenseField decode_pfm(std::span<const std::uint8_t> bytes, FieldKind kind);

/// 8-bit PNG (gray, RGB, with or without alpha) as [H x W x 3] in [-1, 1].
Tensor decode_image(std::span<const std::uint8_t> bytes);
/// [H x W x 3] in [-1, 1] to 8-bit RGB PNG.
Bytes encode_image(const Tensor& image);
/// One byte per pixel, 0 -> 0 and nonzero -> 255, as an 8-bit gray PNG.
Bytes encode_mask(std::span<const std::uint8_t> mask, std::size_t height, std::size_t width);
std::vector<std::uint8_t> decode_mask(std::span<const std::uint8_t> bytes, std::size_t* height = nullptr,
                                      std::size_t* width = nullptr);

/// Whitespace-separated numbers, `#` comments: K1 (9) E1 (16) K2 (9) E2 (16),
/// row-major, optionally followed by d_min d_max [num_candidates].
CameraSetup parse_cameras(const std::string& text);
std::string format_cameras(const CameraSetup& cam);

Bytes read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

/// Chooses the codec from the extension: .flo and .png for flow, .pfm and
/// .png (KITTI) for disparity, .pfm and .png (millimetres) for depth.
FieldWithMask read_field(const std::string& path, FieldKind kind);
void write_field(const std::string& path, const DenseField& field,
                 std::span<const std::uint8_t> valid = {});

}  // namespace unimatch
