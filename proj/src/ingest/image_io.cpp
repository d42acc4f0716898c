#include "phagoq/ingest/image_io.hpp"

#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace phagoq::io {
namespace fs = std::filesystem;

namespace {

thread_local std::string g_tiff_error;

void tiff_error_handler(const char* module, const char* fmt, va_list ap) {
  char buf[512];
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  g_tiff_error = (module != nullptr ? std::string(module) + ": " : std::string()) + buf;
}

void tiff_warning_handler(const char*, const char*, va_list) {}

void install_tiff_handlers() {
  static std::once_flag once;
  std::call_once(once, [] {
    TIFFSetErrorHandler(tiff_error_handler);
    TIFFSetWarningHandler(tiff_warning_handler);
  });
}

struct TiffCloser {
  void operator()(TIFF* t) const { TIFFClose(t); }
};
using TiffPtr = std::unique_ptr<TIFF, TiffCloser>;

TiffPtr open_tiff(const fs::path& path, const char* mode) {
  install_tiff_handlers();
  g_tiff_error.clear();
  TIFF* t = TIFFOpen(path.c_str(), mode);
  if (t == nullptr) {
    throw IoError("cannot open TIFF '" + path.string() + "'" + (g_tiff_error.empty() ? "" : ": " + g_tiff_error));
  }
  return TiffPtr(t);
}

[[noreturn]] void tiff_fail(const fs::path& path, const std::string& what) {
  throw IoError("TIFF '" + path.string() + "': " + what + (g_tiff_error.empty() ? "" : " (" + g_tiff_error + ")"));
}

bool has_png_signature(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

// Raw samples of a single-channel TIFF, kept in double so all three sample
// types share the conversion code.
struct TiffImage {
  int width = 0;
  int height = 0;
  int bits = 0;
  bool is_float = false;
  std::vector<double> samples;
};

TiffImage read_tiff_samples(const fs::path& path) {
  TiffPtr tif = open_tiff(path, "r");
  uint32_t w = 0, h = 0;
  uint16_t bps = 0, spp = 1, fmt = SAMPLEFORMAT_UINT, planar = PLANARCONFIG_CONTIG;
  if (!TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w) || !TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h)) {
    tiff_fail(path, "missing image dimensions");
  }
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bps);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &fmt);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &planar);
  if (w == 0 || h == 0) tiff_fail(path, "empty image");
  if (spp != 1) tiff_fail(path, "expected one sample per pixel, found " + std::to_string(spp));
  if (TIFFIsTiled(tif.get())) tiff_fail(path, "tiled TIFF is not supported");

  TiffImage img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.bits = bps;
  img.is_float = fmt == SAMPLEFORMAT_IEEEFP;
  const bool ok = (fmt == SAMPLEFORMAT_UINT && (bps == 8 || bps == 16)) || (img.is_float && bps == 32);
  if (!ok) tiff_fail(path, "unsupported sample type (" + std::to_string(bps) + "-bit, format " + std::to_string(fmt) + ")");

  img.samples.resize(static_cast<std::size_t>(w) * h);
  std::vector<unsigned char> buf(static_cast<std::size_t>(TIFFScanlineSize(tif.get())));
  for (uint32_t y = 0; y < h; ++y) {
    if (TIFFReadScanline(tif.get(), buf.data(), y, 0) < 0) tiff_fail(path, "read error at row " + std::to_string(y));
    double* dst = img.samples.data() + static_cast<std::size_t>(y) * w;
    if (bps == 8) {
      for (uint32_t x = 0; x < w; ++x) dst[x] = buf[x];
    } else if (bps == 16) {
      for (uint32_t x = 0; x < w; ++x) {
        uint16_t v;
        std::memcpy(&v, buf.data() + 2 * x, 2);
        dst[x] = v;
      }
    } else {
      for (uint32_t x = 0; x < w; ++x) {
        float v;
        std::memcpy(&v, buf.data() + 4 * x, 4);
        dst[x] = v;
      }
    }
  }
  return img;
}

void write_tiff_raw(const fs::path& path, int w, int h, int bps, uint16_t sample_format, Compression compression,
                    const std::function<void(int, unsigned char*)>& fill_row) {
  TiffPtr tif = open_tiff(path, "w");
  TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<uint32_t>(w));
  TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<uint32_t>(h));
  TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, static_cast<uint16_t>(bps));
  TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, static_cast<uint16_t>(1));
  TIFFSetField(tif.get(), TIFFTAG_SAMPLEFORMAT, sample_format);
  TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
  TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(tif.get(), TIFFTAG_COMPRESSION,
               compression == Compression::Deflate ? COMPRESSION_ADOBE_DEFLATE : COMPRESSION_NONE);
  TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, TIFFDefaultStripSize(tif.get(), 0));
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * (bps / 8));
  for (int y = 0; y < h; ++y) {
    fill_row(y, buf.data());
    if (TIFFWriteScanline(tif.get(), buf.data(), static_cast<uint32_t>(y), 0) < 0) {
      tiff_fail(path, "write error at row " + std::to_string(y));
    }
  }
}

struct PngReadState {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadState() { png_destroy_read_struct(&png, info != nullptr ? &info : nullptr, nullptr); }
};

struct PngWriteState {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriteState() { png_destroy_write_struct(&png, info != nullptr ? &info : nullptr); }
};

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

[[noreturn]] void png_error_fn(png_structp, png_const_charp msg) { throw IoError(std::string("PNG: ") + msg); }
void png_warning_fn(png_structp, png_const_charp) {}

Frame read_png(const fs::path& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open PNG '" + path.string() + "'");
  PngReadState st;
  st.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  if (st.png == nullptr) throw IoError("libpng initialisation failed");
  st.info = png_create_info_struct(st.png);
  if (st.info == nullptr) throw IoError("libpng initialisation failed");
  try {
    png_init_io(st.png, fp.get());
    png_read_info(st.png, st.info);
    const png_uint_32 w = png_get_image_width(st.png, st.info);
    const png_uint_32 h = png_get_image_height(st.png, st.info);
    const int depth = png_get_bit_depth(st.png, st.info);
    const int color = png_get_color_type(st.png, st.info);
    if (color != PNG_COLOR_TYPE_GRAY) throw IoError("only single-channel grayscale PNG is supported");
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(st.png);
    if (depth == 16) png_set_swap(st.png);  // host order on little-endian
    png_read_update_info(st.png, st.info);
    const int out_depth = depth == 16 ? 16 : 8;
    std::vector<unsigned char> row(png_get_rowbytes(st.png, st.info));
    Frame f(static_cast<int>(w), static_cast<int>(h));
    f.bit_depth_origin = out_depth == 16 ? BitDepth::U16 : BitDepth::U8;
    for (png_uint_32 y = 0; y < h; ++y) {
      png_read_row(st.png, row.data(), nullptr);
      auto dst = f.row(static_cast<int>(y));
      if (out_depth == 8) {
        for (png_uint_32 x = 0; x < w; ++x) dst[x] = static_cast<float>(row[x] / 255.0);
      } else {
        for (png_uint_32 x = 0; x < w; ++x) {
          uint16_t v;
          std::memcpy(&v, row.data() + 2 * x, 2);
          dst[x] = static_cast<float>(v / 65535.0);
        }
      }
    }
    return f;
  } catch (const IoError& e) {
    throw IoError("PNG '" + path.string() + "': " + e.what());
  }
}

}  // namespace

std::uint8_t quantize_u8(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::round(c * 255.0));
}

std::uint16_t quantize_u16(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint16_t>(std::round(c * 65535.0));
}

Frame read_frame(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such file '" + path.string() + "'");
  if (has_png_signature(path)) return read_png(path);
  TiffImage img = read_tiff_samples(path);
  Frame f(img.width, img.height);
  auto px = f.pixels();
  if (img.is_float) {
    for (std::size_t i = 0; i < px.size(); ++i) {
      const double v = img.samples[i];
      if (!std::isfinite(v)) tiff_fail(path, "non-finite sample");
      px[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    f.bit_depth_origin = BitDepth::U16;
  } else {
    const double scale = img.bits == 8 ? 255.0 : 65535.0;
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(img.samples[i] / scale);
    f.bit_depth_origin = img.bits == 8 ? BitDepth::U8 : BitDepth::U16;
  }
  return f;
}

void write_tiff(const fs::path& path, const Raster<float>& frame, SampleFormat format, Compression compression) {
  const int w = frame.width();
  switch (format) {
    case SampleFormat::U8:
      write_tiff_raw(path, w, frame.height(), 8, SAMPLEFORMAT_UINT, compression, [&](int y, unsigned char* buf) {
        auto src = frame.row(y);
        for (int x = 0; x < w; ++x) buf[x] = quantize_u8(src[x]);
      });
      break;
    case SampleFormat::U16:
      write_tiff_raw(path, w, frame.height(), 16, SAMPLEFORMAT_UINT, compression, [&](int y, unsigned char* buf) {
        auto src = frame.row(y);
        for (int x = 0; x < w; ++x) {
          const uint16_t v = quantize_u16(src[x]);
          std::memcpy(buf + 2 * x, &v, 2);
        }
      });
      break;
    case SampleFormat::F32:
      write_tiff_raw(path, w, frame.height(), 32, SAMPLEFORMAT_IEEEFP, compression, [&](int y, unsigned char* buf) {
        std::memcpy(buf, frame.row(y).data(), 4 * static_cast<std::size_t>(w));
      });
      break;
  }
}

void write_png(const fs::path& path, const Raster<float>& frame) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot create PNG '" + path.string() + "'");
  PngWriteState st;
  st.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  if (st.png == nullptr) throw IoError("libpng initialisation failed");
  st.info = png_create_info_struct(st.png);
  if (st.info == nullptr) throw IoError("libpng initialisation failed");
  png_init_io(st.png, fp.get());
  png_set_IHDR(st.png, st.info, static_cast<png_uint_32>(frame.width()), static_cast<png_uint_32>(frame.height()), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(st.png, st.info);
  std::vector<unsigned char> row(static_cast<std::size_t>(frame.width()));
  for (int y = 0; y < frame.height(); ++y) {
    auto src = frame.row(y);
    for (int x = 0; x < frame.width(); ++x) row[x] = quantize_u8(src[x]);
    png_write_row(st.png, row.data());
  }
  png_write_end(st.png, nullptr);
}

Raster<std::int32_t> read_labels(const fs::path& path) {
  TiffImage img = read_tiff_samples(path);
  if (img.is_float) tiff_fail(path, "label image must hold integer samples");
  Raster<std::int32_t> out(img.width, img.height);
  auto px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::int32_t>(img.samples[i]);
  return out;
}

void write_labels(const fs::path& path, const Raster<std::int32_t>& labels) {
  const int w = labels.width();
  for (std::int32_t v : labels.pixels()) {
    if (v < 0 || v > 65535) throw InvalidArgument("label value out of 16-bit range: " + std::to_string(v));
  }
  write_tiff_raw(path, w, labels.height(), 16, SAMPLEFORMAT_UINT, Compression::Deflate,
                 [&](int y, unsigned char* buf) {
                   auto src = labels.row(y);
                   for (int x = 0; x < w; ++x) {
                     const uint16_t v = static_cast<uint16_t>(src[x]);
                     std::memcpy(buf + 2 * x, &v, 2);
                   }
                 });
}

}  // namespace phagoq::io
