#include "freqgan/io.hpp"

#include <png.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>

#ifndef FREQGAN_GIT_DESCRIBE
#define FREQGAN_GIT_DESCRIBE "unversioned"
#endif

namespace freqgan::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

DecodedImage read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IngestError("cannot open image: " + path);
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw IngestError("not a PNG file: " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IngestError("png allocation failure reading " + path);
  }
  DecodedImage img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IngestError("undecodable PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  img.height = static_cast<int>(png_get_image_height(png, info));
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.channels = static_cast<int>(png_get_channels(png, info));
  if (img.channels != 1 && img.channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IngestError("unsupported channel layout in " + path);
  }
  img.pixels.resize(std::size_t(img.height) * img.width * img.channels);
  rows.resize(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = img.pixels.data() + std::size_t(y) * img.width * img.channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::string& path, int height, int width, int channels,
               const std::vector<unsigned char>& pixels) {
  if (channels != 1 && channels != 3)
    throw ContractError("write_png: channels must be 1 or 3");
  if (pixels.size() != std::size_t(height) * width * channels)
    throw ContractError("write_png: pixel buffer size mismatch");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IngestError("cannot open image for writing: " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IngestError("png allocation failure writing " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IngestError("png write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(pixels.data() +
                                    std::size_t(y) * width * channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_pgm(const std::string& path, int height, int width,
               const std::vector<unsigned char>& pixels) {
  if (pixels.size() != std::size_t(height) * width)
    throw ContractError("write_pgm: pixel buffer size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError("cannot open image for writing: " + path);
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IngestError("pgm write failed: " + path);
}

unsigned char quantize_unit(double v) {
  const double scaled = std::round((v + 1.0) * 127.5);
  if (scaled <= 0.0) return 0;
  if (scaled >= 255.0) return 255;
  return static_cast<unsigned char>(scaled);
}

double dequantize_unit(unsigned char v) { return v * (2.0 / 255.0) - 1.0; }

// ---- fp64 image-set container -------------------------------------------------

namespace {
constexpr char kSetMagic[6] = {'F', 'G', 'T', 'S', '1', '\n'};
}

void write_tensor_set(const std::string& path,
                      const std::vector<Tensor>& images) {
  if (images.empty()) throw ContractError("write_tensor_set: empty set");
  const Shape& s = images.front().shape();
  if (s.size() != 3) throw ContractError("write_tensor_set: expects [C,H,W]");
  nlohmann::json header = {{"count", images.size()},
                           {"channels", s[0]},
                           {"height", s[1]},
                           {"width", s[2]}};
  const std::string head = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError("cannot open for writing: " + path);
  out.write(kSetMagic, sizeof(kSetMagic));
  const std::uint64_t len = head.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const Tensor& t : images) {
    if (!shape_eq(t.shape(), s))
      throw ContractError("write_tensor_set: mixed image shapes");
    out.write(reinterpret_cast<const char*>(t.array().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw IngestError("write failed: " + path);
}

std::vector<Tensor> read_tensor_set(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open: " + path);
  char magic[6];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kSetMagic, sizeof(kSetMagic)) != 0)
    throw IngestError("not an image-set file: " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string head(len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(len));
  if (!in) throw IngestError("truncated header: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(head);
  } catch (const nlohmann::json::exception& e) {
    throw IngestError("bad header in " + path + ": " + e.what());
  }
  const long count = header["count"].get<long>();
  const int c = header["channels"], h = header["height"], w = header["width"];
  std::vector<Tensor> images;
  images.reserve(count);
  for (long i = 0; i < count; ++i) {
    Tensor t = Tensor::zeros({c, h, w});
    in.read(reinterpret_cast<char*>(t.array().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    images.push_back(std::move(t));
  }
  if (!in) throw IngestError("truncated data: " + path);
  return images;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_image_png(const std::string& path, const Tensor& image) {
  if (image.rank() != 3)
    throw ContractError("save_image_png: expects [C,H,W]");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (c != 1 && c != 3)
    throw ContractError("save_image_png: channels must be 1 or 3");
  std::vector<unsigned char> pixels(std::size_t(h) * w * c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        pixels[(std::size_t(y) * w + x) * c + ch] =
            quantize_unit(image.at((long(ch) * h + y) * w + x));
  write_png(path, h, w, c, pixels);
}

Tensor image_grid(const std::vector<Tensor>& images, int columns) {
  if (images.empty()) throw ContractError("image_grid: empty set");
  if (columns < 1) throw ContractError("image_grid: columns must be >= 1");
  const Shape& s = images.front().shape();
  const int c = s[0], h = s[1], w = s[2];
  const int n = static_cast<int>(images.size());
  const int cols = std::min(columns, n);
  const int rows = (n + cols - 1) / cols;
  const int pad = 2;
  const int gh = rows * h + (rows - 1) * pad;
  const int gw = cols * w + (cols - 1) * pad;
  Tensor grid = Tensor::full({c, gh, gw}, 1.0);
  for (int i = 0; i < n; ++i) {
    if (!shape_eq(images[i].shape(), s))
      throw ContractError("image_grid: mixed image shapes");
    const int r0 = (i / cols) * (h + pad), c0 = (i % cols) * (w + pad);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          grid.array()((long(ch) * gh + r0 + y) * gw + c0 + x) =
              images[i].at((long(ch) * h + y) * w + x);
  }
  return grid;
}

void save_normalized_pgm(const std::string& path, const Tensor& plane,
                         double max_value) {
  if (plane.rank() != 2)
    throw ContractError("save_normalized_pgm: expects [H,W]");
  const int h = plane.dim(0), w = plane.dim(1);
  const double scale = max_value > 0.0 ? 255.0 / max_value : 0.0;
  std::vector<unsigned char> pixels(std::size_t(h) * w);
  for (long i = 0; i < plane.size(); ++i) {
    const double v = std::round(plane.at(i) * scale);
    pixels[i] = static_cast<unsigned char>(std::min(255.0, std::max(0.0, v)));
  }
  write_pgm(path, h, w, pixels);
}

void write_matrix_csv(const std::string& path, const Tensor& plane) {
  if (plane.rank() != 2)
    throw ContractError("write_matrix_csv: expects [H,W]");
  std::ofstream out(path);
  if (!out) throw IngestError("cannot open for writing: " + path);
  const int h = plane.dim(0), w = plane.dim(1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x)
      out << (x ? "," : "") << format_double(plane.at(long(y) * w + x));
    out << "\n";
  }
  if (!out) throw IngestError("csv write failed: " + path);
}

void write_manifest(const std::string& dir, nlohmann::json body) {
  body["git_describe"] = FREQGAN_GIT_DESCRIBE;
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char stamp[32];
  std::tm tm_utc;
  gmtime_r(&t, &tm_utc);
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  body["created_utc"] = stamp;
  std::ofstream out(std::filesystem::path(dir) / "manifest.json");
  if (!out) throw IngestError("cannot write manifest in " + dir);
  out << body.dump(2) << "\n";
}

}  // namespace freqgan::io
