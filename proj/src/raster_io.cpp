#include "orthosplat/raster_io.hpp"

#include <bit>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <png.h>

#include "orthosplat/error.hpp"

namespace orthosplat::io {

namespace {

struct FileCloser {
  void operator()(std::FILE *f) const {
    if (f)
      std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path &path, const char *mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f)
    throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
  return f;
}

int png_color_type(int channels) {
  switch (channels) {
  case 1:
    return PNG_COLOR_TYPE_GRAY;
  case 3:
    return PNG_COLOR_TYPE_RGB;
  case 4:
    return PNG_COLOR_TYPE_RGB_ALPHA;
  default:
    throw InvalidInput("PNG export supports 1, 3 or 4 channels, got " + std::to_string(channels));
  }
}

// libpng reports errors through longjmp, so these helpers keep no C++ objects with destructors
// alive between setjmp and the libpng calls.
bool png_write_rows(std::FILE *fp, int width, int height, int channels, int bit_depth,
                    png_bytep *rows, char *message, std::size_t message_size) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    std::snprintf(message, message_size, "png_create_write_struct failed");
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::snprintf(message, message_size, "libpng write error");
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, bit_depth, png_color_type(channels), PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16 && std::endian::native == std::endian::little)
    png_set_swap(png);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

struct PngHeader {
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0, channels = 0;
};

/// Two-phase read: `rows == nullptr` fills the header only.
bool png_read(std::FILE *fp, PngHeader *header, png_bytep *rows, char *message,
              std::size_t message_size) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    std::snprintf(message, message_size, "png_create_read_struct failed");
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::snprintf(message, message_size, "malformed PNG stream");
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  header->width = png_get_image_width(png, info);
  header->height = png_get_image_height(png, info);
  header->bit_depth = png_get_bit_depth(png, info);
  header->color_type = png_get_color_type(png, info);
  if (header->color_type == PNG_COLOR_TYPE_PALETTE)
    png_set_palette_to_rgb(png);
  if (header->color_type == PNG_COLOR_TYPE_GRAY && header->bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (header->bit_depth == 16 && std::endian::native == std::endian::little)
    png_set_swap(png);
  png_read_update_info(png, info);
  header->channels = png_get_channels(png, info);
  header->bit_depth = png_get_bit_depth(png, info);
  if (rows)
    png_read_image(png, rows);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

template <typename T>
void write_png_impl(const std::filesystem::path &path, const Image<T> &image, int bit_depth) {
  if (image.width() < 1 || image.height() < 1)
    throw InvalidInput("cannot write an empty PNG to '" + path.string() + "'");
  png_color_type(image.channels());
  auto fp = open_file(path, "wb");
  std::vector<png_bytep> rows(image.height());
  auto *base = const_cast<T *>(image.data().data());
  for (int y = 0; y < image.height(); ++y)
    rows[y] = reinterpret_cast<png_bytep>(base + static_cast<std::size_t>(y) * image.width() *
                                                     image.channels());
  char message[256] = {};
  if (!png_write_rows(fp.get(), image.width(), image.height(), image.channels(), bit_depth,
                      rows.data(), message, sizeof message))
    throw IoError("writing '" + path.string() + "': " + message);
}

template <typename T>
Image<T> read_png_impl(const std::filesystem::path &path, int bit_depth) {
  char message[256] = {};
  PngHeader header;
  {
    auto fp = open_file(path, "rb");
    if (!png_read(fp.get(), &header, nullptr, message, sizeof message))
      throw IoError("reading '" + path.string() + "': " + message);
  }
  if (header.bit_depth != bit_depth)
    throw SchemaError("'" + path.string() + "' is a " + std::to_string(header.bit_depth) +
                      "-bit PNG, expected " + std::to_string(bit_depth) + "-bit");
  Image<T> image(static_cast<int>(header.width), static_cast<int>(header.height),
                 header.channels);
  std::vector<png_bytep> rows(image.height());
  for (int y = 0; y < image.height(); ++y)
    rows[y] = reinterpret_cast<png_bytep>(image.data().data() + static_cast<std::size_t>(y) *
                                                                    image.width() *
                                                                    image.channels());
  auto fp = open_file(path, "rb");
  if (!png_read(fp.get(), &header, rows.data(), message, sizeof message))
    throw IoError("reading '" + path.string() + "': " + message);
  return image;
}

} // namespace

void write_png(const std::filesystem::path &path, const ImageU8 &image) {
  write_png_impl(path, image, 8);
}

void write_png16(const std::filesystem::path &path, const ImageU16 &image) {
  write_png_impl(path, image, 16);
}

ImageU8 read_png(const std::filesystem::path &path) { return read_png_impl<std::uint8_t>(path, 8); }

ImageU16 read_png16(const std::filesystem::path &path) {
  return read_png_impl<std::uint16_t>(path, 16);
}

void write_pfm(const std::filesystem::path &path, const Image<float> &image) {
  if (image.channels() != 1 && image.channels() != 3)
    throw InvalidInput("PFM supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  out << (image.channels() == 3 ? "PF" : "Pf") << '\n'
      << image.width() << ' ' << image.height() << '\n'
      << (std::endian::native == std::endian::little ? "-1.0" : "1.0") << '\n';
  const std::size_t row_len = static_cast<std::size_t>(image.width()) * image.channels();
  for (int y = image.height() - 1; y >= 0; --y)
    out.write(reinterpret_cast<const char *>(image.data().data() + y * row_len),
              static_cast<std::streamsize>(row_len * sizeof(float)));
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

Image<float> read_pfm(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path.string() + "'");
  auto fail = [&](const std::string &what) -> SchemaError {
    const auto offset = in ? static_cast<long long>(in.tellg()) : -1LL;
    return SchemaError("'" + path.string() + "': " + what + " at byte offset " +
                       std::to_string(offset));
  };
  std::string magic;
  in >> magic;
  int channels = 0;
  if (magic == "Pf")
    channels = 1;
  else if (magic == "PF")
    channels = 3;
  else
    throw fail("bad PFM magic '" + magic + "'");
  long long width = 0, height = 0;
  double scale = 0.0;
  if (!(in >> width >> height))
    throw fail("missing PFM dimensions");
  if (width < 1 || height < 1 || width > (1 << 20) || height > (1 << 20))
    throw fail("implausible PFM dimensions");
  if (!(in >> scale) || scale == 0.0)
    throw fail("missing or zero PFM scale");
  in.get(); // single whitespace byte before the raster
  const bool file_little = scale < 0.0;
  const bool swap = file_little != (std::endian::native == std::endian::little);

  Image<float> image(static_cast<int>(width), static_cast<int>(height), channels);
  const std::size_t row_len = static_cast<std::size_t>(width) * channels;
  std::vector<std::uint32_t> row(row_len);
  for (long long y = height - 1; y >= 0; --y) {
    if (!in.read(reinterpret_cast<char *>(row.data()),
                 static_cast<std::streamsize>(row_len * sizeof(float))))
      throw SchemaError("'" + path.string() + "': truncated PFM raster (row " +
                        std::to_string(height - 1 - y) + " of " + std::to_string(height) + ")");
    for (std::size_t i = 0; i < row_len; ++i) {
      std::uint32_t bits = row[i];
      if (swap)
        bits = __builtin_bswap32(bits);
      image.data()[static_cast<std::size_t>(y) * row_len + i] = std::bit_cast<float>(bits);
    }
  }
  return image;
}

} // namespace orthosplat::io
