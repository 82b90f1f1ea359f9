#include "drseg/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace drseg {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

std::string lower_ext(const std::filesystem::path& path) {
  std::string e = path.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

RasterImage from_bytes(int height, int width, int channels, const std::vector<unsigned char>& bytes) {
  RasterImage img(height, width, channels,
                  channels == 1 ? ColorSpace::kGray : ColorSpace::kRgb, PixelKind::kByte);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data()[i] = bytes[i];
  return img;
}

std::vector<unsigned char> to_bytes(const RasterImage& img) {
  std::vector<unsigned char> bytes(img.data().size());
  const float scale = img.kind() == PixelKind::kUnit ? 255.0f : 1.0f;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::clamp(std::lround(img.data()[i] * scale), 0L, 255L));
  }
  return bytes;
}

RasterImage read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_packing(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  png_read_update_info(png, info);

  const int height = static_cast<int>(png_get_image_height(png, info));
  const int width = static_cast<int>(png_get_image_width(png, info));
  int channels = png_get_channels(png, info);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(height) * width * channels);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = bytes.data() + static_cast<std::size_t>(y) * width * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels == 2) {  // gray+alpha slipped through: drop alpha
    std::vector<unsigned char> gray(static_cast<std::size_t>(height) * width);
    for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = bytes[2 * i];
    bytes = std::move(gray);
    channels = 1;
  }
  if (channels != 1 && channels != 3) throw IoError("unsupported PNG channel count in " + path.string());
  return from_bytes(height, width, channels, bytes);
}

void write_png(const std::filesystem::path& path, const RasterImage& img) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width(), img.height(), 8,
               img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<unsigned char> bytes = to_bytes(img);
  std::vector<png_bytep> rows(img.height());
  for (int y = 0; y < img.height(); ++y) {
    rows[y] = bytes.data() + static_cast<std::size_t>(y) * img.width() * img.channels();
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

RasterImage read_jpeg(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  jpeg_decompress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("failed to decode JPEG " + path.string());
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);

  const int height = cinfo.output_height;
  const int width = cinfo.output_width;
  const int channels = cinfo.output_components;
  std::vector<unsigned char> bytes(static_cast<std::size_t>(height) * width * channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* row = bytes.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_bytes(height, width, channels, bytes);
}

void write_jpeg(const std::filesystem::path& path, const RasterImage& img) {
  FilePtr f = open_file(path, "wb");
  jpeg_compress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_compress(&cinfo);
    throw IoError("failed to encode JPEG " + path.string());
  }
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f.get());
  cinfo.image_width = img.width();
  cinfo.image_height = img.height();
  cinfo.input_components = img.channels();
  cinfo.in_color_space = img.channels() == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, 95, TRUE);
  jpeg_start_compress(&cinfo, TRUE);

  std::vector<unsigned char> bytes = to_bytes(img);
  while (cinfo.next_scanline < cinfo.image_height) {
    unsigned char* row = bytes.data() + static_cast<std::size_t>(cinfo.next_scanline) * img.width() * img.channels();
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

}  // namespace

RasterImage read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".jpg" || ext == ".jpeg") return read_jpeg(path);
  throw IoError("unsupported image format '" + ext + "' for " + path.string());
}

void write_image(const std::filesystem::path& path, const RasterImage& img) {
  if (img.empty()) throw ContractError("write_image: empty image");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string ext = lower_ext(path);
  if (ext == ".png") {
    write_png(path, img);
  } else if (ext == ".jpg" || ext == ".jpeg") {
    write_jpeg(path, img);
  } else {
    throw IoError("unsupported image format '" + ext + "' for " + path.string());
  }
}

BinaryMask read_mask(const std::filesystem::path& path) {
  RasterImage img = read_image(path);
  if (img.channels() != 1) {
    // Tolerate RGB-stored masks: collapse to luma first.
    RasterImage gray(img.height(), img.width(), 1, ColorSpace::kGray, PixelKind::kByte);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) gray.at(y, x) = gray_intensity(img, y, x);
    }
    img = std::move(gray);
  }
  BinaryMask mask(img.height(), img.width());
  for (std::size_t i = 0; i < mask.values.size(); ++i) mask.values[i] = img.data()[i] > 127.0f ? 1 : 0;
  return mask;
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  mask.validate();
  RasterImage img(mask.height, mask.width, 1, ColorSpace::kGray, PixelKind::kByte);
  for (std::size_t i = 0; i < mask.values.size(); ++i) img.data()[i] = mask.values[i] ? 255.0f : 0.0f;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_png(path, img);
}

}  // namespace drseg
