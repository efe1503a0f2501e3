#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "freqgan/tensor.hpp"

namespace freqgan {

/// Architecture descriptor for the desk-scale convolutional GAN. Images grow
/// from a 4x4 seed through stride-2 transposed convolutions, so image_size
/// must be 16 or 32.
struct GanArch {
  int latent_dim = 32;
  int base_channels = 16;
  int image_size = 16;
  int image_channels = 3;

  bool operator==(const GanArch&) const = default;
};

struct GanModel {
  GanArch arch;
  std::uint64_t seed = 0;
  std::vector<std::string> gen_names, disc_names;
  std::vector<Tensor> gen_params, disc_params;

  std::vector<Tensor> all_params() const;
  void zero_grad();
  /// Deep copy of the parameter arrays (fresh storage).
  GanModel clone() const;
};

/// Seeded initialization: conv and dense weights from N(0, 0.02^2), biases
/// zero. Identical seeds give bit-identical parameters.
GanModel init_model(const GanArch& arch, std::uint64_t seed);

/// z [B, latent_dim] -> images [B, C, S, S] in [-1,1] (tanh head). No batch
/// coupling: each sample's forward is independent.
Tensor generate(const GanModel& model, const Tensor& z);

/// x [B, C, S, S] -> per-image probabilities [B] in (0,1) (sigmoid head).
/// Out-of-range pixel values are accepted (perturbation analysis feeds them).
Tensor discriminate(const GanModel& model, const Tensor& x);

/// Flat binary container: JSON header (arch, seed, iteration, named shapes)
/// followed by raw little-endian fp64 parameter data.
void save_checkpoint(const GanModel& model, long iteration,
                     const std::string& path);
GanModel load_checkpoint(const std::string& path, long* iteration = nullptr);

}  // namespace freqgan
