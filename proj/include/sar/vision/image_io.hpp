#pragma once

#include <png.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "sar/error.hpp"
#include "sar/vision/frame.hpp"

namespace sar::vision {

namespace detail {

inline void skip_pnm_space(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

inline int read_pnm_int(std::istream& in) {
  skip_pnm_space(in);
  int value = -1;
  if (!(in >> value)) throw Error(ErrorKind::Format, "malformed PGM header");
  return value;
}

}  // namespace detail

/// Binary PGM (P5, maxval 255).
inline GrayFrame decode_pgm(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '5') {
    throw Error(ErrorKind::Format, "not a binary PGM (P5) image");
  }
  const int width = detail::read_pnm_int(in);
  const int height = detail::read_pnm_int(in);
  const int maxval = detail::read_pnm_int(in);
  if (maxval != 255) throw Error(ErrorKind::Format, "PGM maxval must be 255");
  if (width < 1 || height < 1 || width > kMaxFrameDim || height > kMaxFrameDim) {
    throw Error(ErrorKind::Size, "PGM dimensions out of range");
  }
  in.get();  // single whitespace byte before the raster
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(pixels.size())) {
    throw Error(ErrorKind::Format, "truncated PGM raster");
  }
  return GrayFrame(width, height, std::move(pixels));
}

inline std::string encode_pgm(const GrayFrame& frame) {
  std::string out = "P5\n" + std::to_string(frame.width()) + " " + std::to_string(frame.height()) +
                    "\n255\n";
  const auto px = frame.pixels();
  out.append(reinterpret_cast<const char*>(px.data()), px.size());
  return out;
}

namespace detail {

struct PngReadState {
  const std::string* bytes = nullptr;
  std::size_t offset = 0;
};

inline void png_read_from_string(png_structp png, png_bytep out, png_size_t count) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->offset + count > state->bytes->size()) {
    png_error(png, "truncated PNG stream");
  }
  std::memcpy(out, state->bytes->data() + state->offset, count);
  state->offset += count;
}

}  // namespace detail

/// 8-bit grayscale PNG only; palette, colour, alpha and 16-bit images are rejected.
inline GrayFrame decode_png(const std::string& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw Error(ErrorKind::Format, "not a PNG image");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw Error(ErrorKind::Format, "libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorKind::Format, "libpng initialisation failed");
  }
  detail::PngReadState state{&bytes, 0};
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
  // libpng reports errors through longjmp; every object with a destructor is
  // constructed above this point.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::Format, "corrupt PNG stream");
  }
  png_set_read_fn(png, &state, detail::png_read_from_string);
  png_read_info(png, info);
  png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::Format, "PNG must be 8-bit grayscale");
  }
  if (width < 1 || height < 1 || width > kMaxFrameDim || height > kMaxFrameDim) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::Size, "PNG dimensions out of range");
  }
  pixels.resize(static_cast<std::size_t>(width) * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * width;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return GrayFrame(static_cast<int>(width), static_cast<int>(height), std::move(pixels));
}

inline std::string encode_png(const GrayFrame& frame) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  std::string out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::Format, "PNG encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), n);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(frame.width()), static_cast<png_uint_32>(frame.height()),
               8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < frame.height(); ++y) {
    png_write_row(png, const_cast<png_bytep>(frame.pixels().data() + static_cast<std::size_t>(y) * frame.width()));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Sniffs the magic bytes; anything other than P5 PGM or PNG is a format error.
inline GrayFrame decode_image(const std::string& bytes) {
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes);
  if (bytes.size() >= 8 && static_cast<unsigned char>(bytes[0]) == 0x89 && bytes[1] == 'P') {
    return decode_png(bytes);
  }
  throw Error(ErrorKind::Format, "unsupported image format");
}

inline GrayFrame load_frame(const std::filesystem::path& path) {
  try {
    return decode_image(read_file_bytes(path));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Format) throw;
    throw Error(ErrorKind::Format, e.message() + ": " + path.string());
  }
}

inline void save_pgm(const GrayFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::NotFound, "cannot write " + path.string());
  const std::string bytes = encode_pgm(frame);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace sar::vision
