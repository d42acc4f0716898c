#pragma once

#include <filesystem>

#include "phagoq/imgcore/raster.hpp"

namespace phagoq::io {

enum class SampleFormat { U8, U16, F32 };
enum class Compression { None, Deflate };

// Reads a single-channel TIFF (8/16-bit unsigned or 32-bit float, any
// libtiff-supported compression) or PNG (8/16-bit gray). Integer samples are
// scaled to [0,1] by the type maximum; float samples are clamped to [0,1].
Frame read_frame(const std::filesystem::path& path);

void write_tiff(const std::filesystem::path& path, const Raster<float>& frame, SampleFormat format,
                Compression compression = Compression::Deflate);
void write_png(const std::filesystem::path& path, const Raster<float>& frame);

// Instance label images, stored as 16-bit TIFF.
Raster<std::int32_t> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const Raster<std::int32_t>& labels);

// round(v * 255) with halves away from zero.
std::uint8_t quantize_u8(float v);
std::uint16_t quantize_u16(float v);

}  // namespace phagoq::io
