#include "gsurf/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace gsurf {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

uint8_t quantize(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<uint8_t>(std::lround(v * 255.0));
}

}  // namespace

void write_png(const std::string& path, const Image& img) {
  check(img.channels == 1 || img.channels == 3, "write_png: channels must be 1 or 3");
  check(img.width > 0 && img.height > 0, "write_png: empty image");

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  check(fp != nullptr, "write_png: cannot open " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  check(png != nullptr, "write_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("write_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("write_png: libpng error writing " + path);
  }

  png_init_io(png, fp.get());
  const int color_type = img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, img.width, img.height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (img.channels == 3) {
    png_set_sRGB_gAMA_and_cHRM(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
  }
  png_write_info(png, info);

  std::vector<uint8_t> row(static_cast<std::size_t>(img.width) * img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        row[static_cast<std::size_t>(x) * img.channels + c] = quantize(img.at(x, y, c));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  check(fp != nullptr, "read_png: cannot open " + path);

  uint8_t header[8];
  check(std::fread(header, 1, 8, fp.get()) == 8 && !png_sig_cmp(header, 0, 8),
        "read_png: not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  check(png != nullptr, "read_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("read_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("read_png: libpng error reading " + path);
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);

  // Normalize everything to 8-bit gray or RGB.
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = static_cast<int>(png_get_channels(png, info));
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("read_png: unsupported channel count in " + path);
  }

  std::vector<uint8_t> raw(static_cast<std::size_t>(width) * height * channels);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = raw.data() + static_cast<std::size_t>(y) * width * channels;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(width, height, channels);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    img.data[i] = raw[i] / 255.0;
  }
  return img;
}

void write_pfm(const std::string& path, const Image& img) {
  check(img.channels == 1 || img.channels == 3, "write_pfm: channels must be 1 or 3");
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "write_pfm: cannot open " + path);
  out << (img.channels == 3 ? "PF" : "Pf") << "\n"
      << img.width << " " << img.height << "\n"
      << "-1.0\n";
  // PFM rows run bottom-to-top.
  std::vector<float> row(static_cast<std::size_t>(img.width) * img.channels);
  for (int y = img.height - 1; y >= 0; --y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        row[static_cast<std::size_t>(x) * img.channels + c] =
            static_cast<float>(img.at(x, y, c));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  check(out.good(), "write_pfm: write failed for " + path);
}

Image read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "read_pfm: cannot open " + path);
  std::string tag;
  in >> tag;
  check(tag == "PF" || tag == "Pf", "read_pfm: bad magic in " + path);
  const int channels = tag == "PF" ? 3 : 1;
  int width = 0, height = 0;
  double scale = 0.0;
  in >> width >> height >> scale;
  check(width > 0 && height > 0, "read_pfm: bad dimensions in " + path);
  check(scale < 0.0, "read_pfm: big-endian PFM not supported: " + path);
  in.get();  // single whitespace after header

  Image img(width, height, channels);
  std::vector<float> row(static_cast<std::size_t>(width) * channels);
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    check(in.good(), "read_pfm: truncated file " + path);
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        img.at(x, y, c) = row[static_cast<std::size_t>(x) * channels + c];
      }
    }
  }
  return img;
}

}  // namespace gsurf
