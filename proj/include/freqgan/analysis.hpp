#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "freqgan/models.hpp"
#include "freqgan/tensor.hpp"

namespace freqgan {

/// Single-Fourier-attack perturbation for an HxH image: the conjugate pair
/// (1±j) of unnormalized Fourier rows at the given frequency coordinate,
/// which collapses to the real stripe pattern 2*sqrt(2)*eps*cos(...). The
/// index pair {(u,v), (H-u,H-v)} names one mode, so both members map to the
/// same perturbation. The imaginary residue discarded along the way is
/// reported through `imag_residue` when given.
Tensor sfa_delta(int u, int v, double epsilon, int H,
                 double* imag_residue = nullptr);

struct SensitivityMap {
  Tensor values;  // [H,W]: mean over images of |D(x) - D(x + delta(u,v))|
  double epsilon = 0.0;
  int n_images = 0;
};

/// Probes the discriminator at every frequency coordinate. `epsilon` is given
/// on the 8-bit pixel scale (e.g. 10/255) and is doubled internally to match
/// the [-1,1] data range. `gamma` < 1 puts the training-time low-pass filter
/// in front of the discriminator, probing the pipeline as trained.
SensitivityMap sfa_sensitivity_map(const GanModel& model,
                                   const std::vector<Tensor>& images,
                                   double epsilon, double gamma = 1.0);

struct GapReport {
  double all_band_gap = 0.0;
  std::optional<double> lower_band_gap;
  std::optional<double> gamma_used;
  int n_real = 0;
  int n_fake = 0;
};

/// Mean absolute difference between the signed per-channel mean DCT spectra
/// of two image sets, averaged over every coefficient. With `gamma`, both
/// mean spectra are masked first and the masked (lower-band) gap is reported
/// alongside, still averaged over all coordinates.
GapReport frequency_gap(const std::vector<Tensor>& real_set,
                        const std::vector<Tensor>& fake_set,
                        std::optional<double> gamma = {});

/// Signed per-channel mean DCT over a set: the statistic inside the gap.
Tensor mean_dct_signed(const std::vector<Tensor>& images);

struct MeanSpectrum {
  Tensor values;   // [H,W] mean |DCT| over images and channels
  Tensor display;  // log(1 + values)
};
MeanSpectrum mean_spectrum(const std::vector<Tensor>& images);

enum class ProbeDomain { kSpatial, kFrequency };

struct ProbeResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// Linear real/fake classifier: logistic regression on standardized flattened
/// pixels or DCT coefficients, trained with Adam(beta1=0, beta2=0.9, lr=1e-3),
/// batch 64, 100 epochs, on a seeded 80/20 stratified split. Both sets need
/// at least 20 images.
ProbeResult fake_detection_probe(const std::vector<Tensor>& real_set,
                                 const std::vector<Tensor>& fake_set,
                                 ProbeDomain domain, std::uint64_t split_seed);

}  // namespace freqgan
