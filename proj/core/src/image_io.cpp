#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

#include "v2tex/dataset_io.hpp"
#include "v2tex/error.hpp"

namespace v2tex {

namespace {

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ----- PGM ------------------------------------------------------------------

class PgmHeaderReader {
 public:
  PgmHeaderReader(const std::string& bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

  long next_int() {
    skip_space_and_comments();
    std::size_t start = pos_;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) throw FormatError("malformed PGM header: " + path_.string());
    if (pos_ - start > 9) throw FormatError("PGM header value too large: " + path_.string());
    return std::stol(bytes_.substr(start, pos_ - start));
  }

  // Binary rasters start after exactly one whitespace byte following maxval.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw FormatError("malformed PGM header: " + path_.string());
    }
    return pos_ + 1;
  }

  std::size_t pos() const { return pos_; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 2;
};

Image decode_pgm(const std::string& bytes, const fs::path& path) {
  const bool ascii = bytes[1] == '2';
  PgmHeaderReader header(bytes, path);
  const long width = header.next_int();
  const long height = header.next_int();
  const long maxval = header.next_int();
  if (width < 1 || height < 1) throw FormatError("zero-dimension image: " + path.string());
  if (maxval < 1 || maxval > 65535) throw FormatError("unsupported PGM maxval: " + path.string());

  const auto count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<double> pixels(count);
  const auto scale = static_cast<double>(maxval);

  if (ascii) {
    for (std::size_t i = 0; i < count; ++i) {
      long v = header.next_int();
      if (v > maxval) throw FormatError("PGM sample exceeds maxval: " + path.string());
      pixels[i] = static_cast<double>(v) / scale;
    }
  } else {
    const std::size_t offset = header.raster_offset();
    const std::size_t bytes_per_sample = maxval < 256 ? 1 : 2;
    if (bytes.size() < offset + count * bytes_per_sample) {
      throw FormatError("truncated PGM raster: " + path.string());
    }
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
    for (std::size_t i = 0; i < count; ++i) {
      unsigned v = bytes_per_sample == 1 ? raw[i] : (unsigned{raw[2 * i]} << 8) | raw[2 * i + 1];
      if (v > static_cast<unsigned>(maxval)) {
        throw FormatError("PGM sample exceeds maxval: " + path.string());
      }
      pixels[i] = static_cast<double>(v) / scale;
    }
  }
  return Image(static_cast<int>(height), static_cast<int>(width), std::move(pixels));
}

// ----- PNG ------------------------------------------------------------------

struct PngRaster {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<unsigned char> data;
  std::vector<png_bytep> rows;
  char message[256] = {};
};

void png_error_handler(png_structp png, png_const_charp msg) {
  auto* raster = static_cast<PngRaster*>(png_get_error_ptr(png));
  std::snprintf(raster->message, sizeof(raster->message), "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

// All state that must survive a longjmp lives in `out`; this frame holds
// only trivially destructible locals.
bool read_png_raster(std::FILE* file, PngRaster* out) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, out, png_error_handler, png_warning_handler);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out->width = png_get_image_width(png, info);
  out->height = png_get_image_height(png, info);
  out->channels = png_get_channels(png, info);
  out->bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out->data.resize(rowbytes * out->height);
  out->rows.resize(out->height);
  for (png_uint_32 y = 0; y < out->height; ++y) out->rows[y] = out->data.data() + y * rowbytes;
  png_read_image(png, out->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

Image decode_png(const fs::path& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw IoError("cannot open image file: " + path.string());
  PngRaster raster;
  if (!read_png_raster(file.get(), &raster)) {
    throw FormatError("failed to decode PNG " + path.string() + ": " + raster.message);
  }
  if (raster.width == 0 || raster.height == 0) {
    throw FormatError("zero-dimension image: " + path.string());
  }
  if (raster.channels != 1 && raster.channels != 3) {
    throw FormatError("unsupported PNG channel layout: " + path.string());
  }

  const bool wide = raster.bit_depth == 16;
  const double scale = wide ? 65535.0 : 255.0;
  auto sample = [&](png_uint_32 y, std::size_t i) -> double {
    const unsigned char* row = raster.rows[y];
    return wide ? static_cast<double>((unsigned{row[2 * i]} << 8) | row[2 * i + 1])
                : static_cast<double>(row[i]);
  };

  Image image(static_cast<int>(raster.height), static_cast<int>(raster.width));
  for (png_uint_32 y = 0; y < raster.height; ++y) {
    for (png_uint_32 x = 0; x < raster.width; ++x) {
      double value;
      if (raster.channels == 1) {
        value = sample(y, x) / scale;
      } else {
        value = (kLumaR * sample(y, 3 * x) + kLumaG * sample(y, 3 * x + 1) +
                 kLumaB * sample(y, 3 * x + 2)) /
                scale;
      }
      image(static_cast<int>(y), static_cast<int>(x)) = value;
    }
  }
  return image;
}

}  // namespace

Image load_grayscale(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("image file not found: " + path.string());
  std::string bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '5')) {
    return decode_pgm(bytes, path);
  }
  static constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(std::begin(kPngSignature), std::end(kPngSignature),
                                      reinterpret_cast<const unsigned char*>(bytes.data()))) {
    return decode_png(path);
  }
  throw FormatError("unsupported image format (expected PGM P2/P5 or PNG): " + path.string());
}

std::size_t save_pgm16(const Image& image, const fs::path& path) {
  if (image.empty()) throw ValidationError("cannot save an empty image");
  std::string out = "P5\n" + std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n65535\n";
  const std::size_t header = out.size();
  out.resize(header + 2 * image.size());
  std::size_t clamped = 0;
  auto pixels = image.pixels();
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    double v = pixels[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      ++clamped;
      v = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
    }
    const auto q = static_cast<unsigned>(std::lround(v * 65535.0));
    out[header + 2 * i] = static_cast<char>(q >> 8);
    out[header + 2 * i + 1] = static_cast<char>(q & 0xff);
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write image file: " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("failed writing image file: " + path.string());
  return clamped;
}

}  // namespace v2tex
