#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "freqgan/tensor.hpp"

namespace freqgan::io {

struct DecodedImage {
  int height = 0;
  int width = 0;
  int channels = 0;                  // 1 or 3
  std::vector<unsigned char> pixels;  // interleaved rows
};

DecodedImage read_png(const std::string& path);
void write_png(const std::string& path, int height, int width, int channels,
               const std::vector<unsigned char>& pixels);
void write_pgm(const std::string& path, int height, int width,
               const std::vector<unsigned char>& pixels);

/// [-1,1] -> 0..255 with round-half-away-from-zero, and back.
unsigned char quantize_unit(double v);
double dequantize_unit(unsigned char v);

/// Lossless fp64 container for an image set (all images share one shape).
void write_tensor_set(const std::string& path,
                      const std::vector<Tensor>& images);
std::vector<Tensor> read_tensor_set(const std::string& path);

/// Fixed double formatting used by every CSV writer (%.17g).
std::string format_double(double v);

/// Saves a [C,H,W] image in [-1,1] (C = 1 or 3) as an 8-bit PNG.
void save_image_png(const std::string& path, const Tensor& image);

/// Tiles same-shape images into one [C, H', W'] image with a 2-pixel gutter.
Tensor image_grid(const std::vector<Tensor>& images, int columns);

/// Nonnegative [H,W] plane scaled by max_value into an 8-bit PGM.
void save_normalized_pgm(const std::string& path, const Tensor& plane,
                         double max_value);

/// Raw [H,W] values as CSV rows.
void write_matrix_csv(const std::string& path, const Tensor& plane);

/// Writes <dir>/manifest.json with the build version and a timestamp merged
/// into `body`. Written after all other artifacts; its presence marks a
/// completed run.
void write_manifest(const std::string& dir, nlohmann::json body);

}  // namespace freqgan::io
