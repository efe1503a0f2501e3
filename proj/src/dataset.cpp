#include "freqgan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "freqgan/io.hpp"
#include "freqgan/rng.hpp"
#include "freqgan/spectral.hpp"

namespace freqgan {

namespace {

constexpr std::uint64_t kBiasTag = 0x62696173ull;   // "bias"
constexpr std::uint64_t kImageTag = 0x696d6167ull;  // "imag"

std::uint64_t image_seed(std::uint64_t seed, long index) {
  return mix_seed(mix_seed(seed, kImageTag), static_cast<std::uint64_t>(index));
}

// Band-limited cosine textures: a dataset-level bias spectrum shared by all
// images plus per-image in-band fluctuations, so the signed mean spectrum is
// nonzero and fully inside mask(band_limit). Optional pixel noise on top.
Tensor texture_image(const DatasetDescriptor& d, const Array& bias,
                     const std::vector<long>& band, long index) {
  const int S = d.image_size;
  Rng rng(image_seed(d.seed, index));
  Tensor coef = Tensor::zeros({d.channels, S, S});
  for (int c = 0; c < d.channels; ++c) {
    const double channel_gain = 0.8 + 0.4 * rng.uniform();
    for (long k : band) {
      const int u = static_cast<int>(k / S), v = static_cast<int>(k % S);
      const double r = std::sqrt(double(u) * u + double(v) * v);
      const double wobble = 0.6 / (1.0 + r) * rng.normal();
      coef.array()(long(c) * S * S + k) = channel_gain * bias(k) + wobble;
    }
    coef.array()(long(c) * S * S) = 0.3 * rng.normal();  // independent DC
  }
  Tensor img = idct2(coef);
  for (int c = 0; c < d.channels; ++c) {
    auto plane = img.array().segment(long(c) * S * S, long(S) * S);
    const double peak = plane.abs().maxCoeff();
    if (peak > 0.9) plane *= 0.9 / peak;  // linear, stays band-limited
  }
  if (d.noise > 0.0) {
    for (long i = 0; i < img.size(); ++i)
      img.array()(i) += d.noise * rng.normal();
    img.array() = img.array().max(-1.0).min(1.0);
  }
  return img;
}

Dataset make_textures(const DatasetDescriptor& d) {
  const int S = d.image_size;
  Tensor mask = build_mask(d.band_limit, S, S);
  std::vector<long> band;
  for (long k = 1; k < mask.size(); ++k)
    if (mask.at(k) == 1.0) band.push_back(k);
  Array bias = Array::Zero(long(S) * S);
  Rng bias_rng(mix_seed(d.seed, kBiasTag));
  for (long k : band) {
    const int u = static_cast<int>(k / S), v = static_cast<int>(k % S);
    const double r = std::sqrt(double(u) * u + double(v) * v);
    bias(k) = 1.2 / (1.0 + r) * bias_rng.normal();
  }
  Dataset set{d.channels, S, S, {}};
  set.images.reserve(d.count);
  for (long i = 0; i < d.count; ++i)
    set.images.push_back(texture_image(d, bias, band, i));
  return set;
}

Dataset make_blobs(const DatasetDescriptor& d) {
  const int S = d.image_size;
  Dataset set{d.channels, S, S, {}};
  set.images.reserve(d.count);
  for (long idx = 0; idx < d.count; ++idx) {
    Rng rng(image_seed(d.seed, idx));
    const int bumps = 1 + static_cast<int>(rng.uniform_int(4));
    std::vector<double> cy(bumps), cx(bumps), sg(bumps), am(bumps);
    for (int b = 0; b < bumps; ++b) {
      cy[b] = rng.uniform(0.0, S);
      cx[b] = rng.uniform(0.0, S);
      sg[b] = rng.uniform(S / 10.0, S / 4.0);
      am[b] = rng.uniform(0.4, 1.0);
    }
    Tensor img = Tensor::zeros({d.channels, S, S});
    for (int c = 0; c < d.channels; ++c) {
      const double gain = 0.7 + 0.3 * rng.uniform();
      double peak = 0.0;
      auto plane = img.array().segment(long(c) * S * S, long(S) * S);
      for (int i = 0; i < S; ++i)
        for (int j = 0; j < S; ++j) {
          double g = 0.0;
          for (int b = 0; b < bumps; ++b) {
            const double dy = i - cy[b], dx = j - cx[b];
            g += am[b] * std::exp(-(dy * dy + dx * dx) / (2.0 * sg[b] * sg[b]));
          }
          plane(long(i) * S + j) = gain * g;
          peak = std::max(peak, gain * g);
        }
      plane = 2.0 * plane / std::max(peak, 1e-9) - 1.0;
    }
    set.images.push_back(std::move(img));
  }
  return set;
}

// bilinear, pixel centers aligned (src = (dst + 0.5) * scale - 0.5)
Array resize_plane(const Array& src, int h, int w, int out) {
  Array dst(long(out) * out);
  const double sy = double(h) / out, sx = double(w) / out;
  for (int y = 0; y < out; ++y) {
    const double fy = std::min(std::max((y + 0.5) * sy - 0.5, 0.0), h - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out; ++x) {
      const double fx = std::min(std::max((x + 0.5) * sx - 0.5, 0.0), w - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      const double a = src(long(y0) * w + x0) * (1 - wx) +
                       src(long(y0) * w + x1) * wx;
      const double b = src(long(y1) * w + x0) * (1 - wx) +
                       src(long(y1) * w + x1) * wx;
      dst(long(y) * out + x) = a * (1 - wy) + b * wy;
    }
  }
  return dst;
}

Dataset make_from_dir(const DatasetDescriptor& d) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(d.dir_path))
    throw ContractError("image directory does not exist: " + d.dir_path);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(d.dir_path)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw ContractError("no PNG images in directory: " + d.dir_path);
  if (d.count > 0 && static_cast<long>(files.size()) > d.count)
    files.resize(d.count);

  const int S = d.image_size;
  Dataset set{d.channels, S, S, {}};
  for (const std::string& path : files) {
    io::DecodedImage raw = io::read_png(path);
    const int side = std::min(raw.height, raw.width);
    const int oy = (raw.height - side) / 2, ox = (raw.width - side) / 2;
    // crop to square, split channels, resize, normalize to [-1,1]
    std::vector<Array> planes;
    for (int c = 0; c < raw.channels; ++c) {
      Array plane(long(side) * side);
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
          plane(long(y) * side + x) =
              raw.pixels[(std::size_t(oy + y) * raw.width + ox + x) *
                             raw.channels +
                         c];
      planes.push_back(resize_plane(plane, side, side, S));
    }
    Tensor img = Tensor::zeros({d.channels, S, S});
    for (int c = 0; c < d.channels; ++c) {
      const Array* src = nullptr;
      Array gray;
      if (static_cast<int>(planes.size()) == d.channels) {
        src = &planes[c];
      } else if (planes.size() == 1) {
        src = &planes[0];  // replicate gray into color
      } else {
        gray = (planes[0] + planes[1] + planes[2]) / 3.0;
        src = &gray;
      }
      img.array().segment(long(c) * S * S, long(S) * S) =
          *src * (2.0 / 255.0) - 1.0;
    }
    set.images.push_back(std::move(img));
  }
  return set;
}

}  // namespace

std::string to_string(DatasetSource s) {
  switch (s) {
    case DatasetSource::kSyntheticTextures:
      return "synthetic-textures";
    case DatasetSource::kSyntheticBlobs:
      return "synthetic-blobs";
    case DatasetSource::kImageDir:
      return "image-dir";
  }
  throw ContractError("unknown dataset source");
}

DatasetSource dataset_source_from_string(const std::string& s) {
  if (s == "synthetic-textures") return DatasetSource::kSyntheticTextures;
  if (s == "synthetic-blobs") return DatasetSource::kSyntheticBlobs;
  if (s == "image-dir") return DatasetSource::kImageDir;
  throw ContractError("unknown dataset source: " + s);
}

Dataset load_dataset(const DatasetDescriptor& desc) {
  if (desc.image_size < 2) throw ContractError("image_size too small");
  if (desc.channels < 1) throw ContractError("channels must be >= 1");
  switch (desc.source) {
    case DatasetSource::kSyntheticTextures:
      if (desc.count < 1) throw ContractError("count must be >= 1");
      if (!(desc.band_limit >= 0.0 && desc.band_limit <= 1.0))
        throw ContractError("band_limit outside [0,1]");
      return make_textures(desc);
    case DatasetSource::kSyntheticBlobs:
      if (desc.count < 1) throw ContractError("count must be >= 1");
      return make_blobs(desc);
    case DatasetSource::kImageDir:
      return make_from_dir(desc);
  }
  throw ContractError("unknown dataset source");
}

}  // namespace freqgan
