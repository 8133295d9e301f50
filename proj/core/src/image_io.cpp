// SPDX-License-Identifier: Apache-2.0
#include "fsd/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>

#include "fsd/error.hpp"

namespace fsd {

std::uint8_t to_code(double intensity) noexcept {
  const double scaled = std::floor(intensity * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

class NetpbmHeaderReader {
 public:
  explicit NetpbmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }

  void skip_whitespace_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto ch = bytes_[pos_];
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(ch)) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  int read_uint(const char* what) {
    skip_whitespace_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) throw DecodeError(std::string("netpbm ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw DecodeError(std::string("netpbm: expected ") + what, pos_);
    return static_cast<int>(value);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw DecodeError("netpbm: expected whitespace after maxval", pos_);
    }
    ++pos_;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

bool has_png_signature(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t length) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->pos + length > state->bytes.size()) {
    png_error(png, "truncated PNG stream");
  }
  std::copy_n(state->bytes.data() + state->pos, length, out);
  state->pos += length;
}

struct PngHeader {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int channels = 0;
  std::size_t rowbytes = 0;
};

// libpng reports errors through longjmp. Both helpers below keep only trivially
// destructible locals in the frame that calls setjmp.
bool png_read_header(png_structp png, png_infop info, PngHeader* header, char* message) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_info(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth == 16) {
    std::snprintf(message, 128, "16-bit PNG is not supported");
    return false;
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  header->width = png_get_image_width(png, info);
  header->height = png_get_image_height(png, info);
  header->channels = png_get_channels(png, info);
  header->rowbytes = png_get_rowbytes(png, info);
  return true;
}

bool png_read_rows(png_structp png, png_infop info, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_image(png, rows);
  png_read_end(png, info);
  return true;
}

void png_error_to_buffer(png_structp png, png_const_charp msg) {
  auto* buffer = static_cast<char*>(png_get_error_ptr(png));
  std::snprintf(buffer, 128, "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_ignore(png_structp, png_const_charp) {}

class PngReader {
 public:
  explicit PngReader(char* message)
      : png_(png_create_read_struct(PNG_LIBPNG_VER_STRING, message, png_error_to_buffer,
                                    png_warning_ignore)) {
    if (png_ == nullptr) throw Error("libpng: cannot allocate read struct");
    info_ = png_create_info_struct(png_);
    if (info_ == nullptr) {
      png_destroy_read_struct(&png_, nullptr, nullptr);
      throw Error("libpng: cannot allocate info struct");
    }
  }
  ~PngReader() { png_destroy_read_struct(&png_, &info_, nullptr); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  png_structp png() const { return png_; }
  png_infop info() const { return info_; }

 private:
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

Image decode_png(std::span<const std::uint8_t> bytes) {
  char message[128] = "malformed PNG";
  PngReader reader(message);
  PngReadState state{bytes, 8};
  png_set_read_fn(reader.png(), &state, png_read_from_span);
  png_set_sig_bytes(reader.png(), 8);

  PngHeader header;
  if (!png_read_header(reader.png(), reader.info(), &header, message)) {
    throw DecodeError(std::string("png: ") + message, state.pos);
  }
  if (header.channels != 1 && header.channels != 3) {
    throw DecodeError("png: unsupported channel layout", state.pos);
  }

  std::vector<std::uint8_t> pixels(header.rowbytes * header.height);
  std::vector<png_bytep> rows(header.height);
  for (png_uint_32 y = 0; y < header.height; ++y) rows[y] = pixels.data() + y * header.rowbytes;
  if (!png_read_rows(reader.png(), reader.info(), rows.data())) {
    throw DecodeError(std::string("png: ") + message, state.pos);
  }

  const int h = static_cast<int>(header.height);
  const int w = static_cast<int>(header.width);
  std::vector<double> data(static_cast<std::size_t>(h) * w * header.channels);
  std::size_t k = 0;
  for (int y = 0; y < h; ++y) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * header.channels; ++i) {
      data[k++] = rows[y][i] / 255.0;
    }
  }
  return Image(h, w, header.channels, std::move(data));
}

void write_png(const Image& img, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> codes(img.size());
  std::transform(img.data().begin(), img.data().end(), codes.begin(), to_code);
  if (png_image_write_to_file(&image, path.string().c_str(), 0, codes.data(), 0, nullptr) == 0) {
    const std::string why = image.message;
    png_image_free(&image);
    throw IoError("cannot write PNG '" + path.string() + "': " + why);
  }
}

}  // namespace

Image decode_netpbm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw DecodeError("netpbm: expected magic P5 or P6", 0);
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  NetpbmHeaderReader reader(bytes);
  const int width = reader.read_uint("width");
  const int height = reader.read_uint("height");
  const std::size_t maxval_pos = reader.pos();
  const int maxval = reader.read_uint("maxval");
  if (maxval != 255) throw DecodeError("netpbm: only maxval 255 is supported", maxval_pos);
  reader.single_whitespace();
  if (width <= 0 || height <= 0) throw DecodeError("netpbm: zero dimension", maxval_pos);

  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  const std::size_t start = reader.pos();
  if (bytes.size() - start < count) {
    throw DecodeError("netpbm: truncated payload, expected " + std::to_string(count) + " bytes",
                      bytes.size());
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = bytes[start + i] / 255.0;
  return Image(height, width, channels, std::move(data));
}

std::vector<std::uint8_t> encode_netpbm(const Image& img) {
  const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(img.width()) + " " + std::to_string(img.height()) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.size());
  for (double v : img.data()) out.push_back(to_code(v));
  return out;
}

Image load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file '" + path.string() + "'");
  const auto bytes = read_file(path);
  if (has_png_signature(bytes)) return decode_png(bytes);
  return decode_netpbm(bytes);
}

void save_image(const Image& img, const std::filesystem::path& path) {
  if (img.empty()) throw DomainError("save_image: empty image");
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") {
    write_png(img, path);
  } else {
    write_file(path, encode_netpbm(img));
  }
}

}  // namespace fsd
