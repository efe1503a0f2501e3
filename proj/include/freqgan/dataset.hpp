#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "freqgan/tensor.hpp"

namespace freqgan {

enum class DatasetSource { kSyntheticTextures, kSyntheticBlobs, kImageDir };

std::string to_string(DatasetSource s);
DatasetSource dataset_source_from_string(const std::string& s);

/// Fully seeded data source. Synthetic sets are reproducible bit-for-bit;
/// image directories are center-cropped square and resized. Every image comes
/// out as [channels, image_size, image_size] in [-1,1].
struct DatasetDescriptor {
  DatasetSource source = DatasetSource::kSyntheticTextures;
  int image_size = 16;
  int channels = 3;
  int count = 2000;          // for image-dir, <= 0 means "all files"
  std::uint64_t seed = 11;
  std::string dir_path;
  double band_limit = 0.5;  // textures: DCT radial band limit (mask gamma)
  double noise = 0.02;      // textures: additive pixel noise std
};

struct Dataset {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<Tensor> images;
};

Dataset load_dataset(const DatasetDescriptor& desc);

}  // namespace freqgan
