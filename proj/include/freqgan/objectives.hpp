#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "freqgan/tensor.hpp"

namespace freqgan {

enum class MatchTransform { kDct, kDftMagnitude, kPixel };
enum class MatchDistance { kMse, kMae, kMkl, kMsse };

/// Batch-statistic matching flavor; (DCT, MSE) is the default.
struct MatchVariant {
  MatchTransform transform = MatchTransform::kDct;
  MatchDistance distance = MatchDistance::kMse;
};

enum class Regularizer { kNone, kFMatch, kSpectral };

/// Non-saturating discriminator loss -mean log d_real - mean log(1-d_fake).
/// Inputs are probabilities in [0,1]; values are clamped 1e-7 away from the
/// boundaries before the logs.
Tensor discriminator_loss(const Tensor& d_real, const Tensor& d_fake);

/// Non-saturating generator loss -mean log d_fake.
Tensor generator_adversarial_loss(const Tensor& d_fake);

/// Distance between the batch-mean transformed statistics of two image
/// batches [B,C,H,W] and [B',C,H,W]; differentiable with respect to both.
Tensor f_match_loss(const Tensor& real_batch, const Tensor& fake_batch,
                    const MatchVariant& variant);

/// Radial reduction of a nonnegative [H,W] magnitude plane: pixels are ranked
/// by distance from the center, grouped by the integer part of the radius,
/// and the means of the interior rings (innermost and outermost dropped) come
/// back in ascending order. Differentiable. Requires H,W >= 4; the default
/// center is ((H-1)/2, (W-1)/2).
Tensor azimuthal_integral(const Tensor& magnitude,
                          std::optional<std::pair<double, double>> center = {});

/// mean(t*log p + (1-t)*log(1-p)) over profile bins; the negated mean binary
/// cross-entropy used by the spectral regularizer. Inputs must lie in (0,1).
Tensor negated_profile_bce(const Tensor& target_profile,
                           const Tensor& predicted_profile);

/// Spectral-regularization baseline on square images: the azimuthal profile
/// of the batch-mean centered DFT magnitude of the real batch is compared,
/// per fake image, against that image's profile via negated-mean BCE, then
/// averaged over the fake batch. Profiles are normalized by their first bin
/// and clamped to [1e-6, 1-1e-6].
Tensor sr_loss(const Tensor& real_batch, const Tensor& fake_batch);

struct ObjectiveConfig {
  double gamma = 1.0;
  double lambda = 0.0;
  Regularizer regularizer = Regularizer::kNone;
  MatchVariant variant;
};

struct LossReport {
  double d_loss = 0.0;
  double g_loss_adv = 0.0;
  double match_loss = 0.0;
  double sr_loss = 0.0;
  double g_loss_total = 0.0;
  double lambda = 0.0;
  double gamma = 1.0;
};

/// Evaluates the full objectives at the given batches: discriminator loss on
/// low-pass-filtered inputs (when gamma < 1), adversarial generator loss on
/// filtered fakes, and the configured regularizer on the raw batches.
LossReport total_losses(const std::function<Tensor(const Tensor&)>& discriminator,
                        const Tensor& real_batch, const Tensor& fake_batch,
                        const ObjectiveConfig& config);

}  // namespace freqgan
