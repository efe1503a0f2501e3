#include "freqgan/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

#include "freqgan/spectral.hpp"

namespace freqgan {

namespace {

constexpr double kProbEps = 1e-7;
constexpr double kProfileEps = 1e-6;
constexpr double kMklFloor = 1e-12;
constexpr double kVarFloor = 1e-12;

void check_probabilities(const Tensor& p, const char* name) {
  if (p.array().minCoeff() < 0.0 || p.array().maxCoeff() > 1.0)
    throw ContractError(std::string(name) + ": values outside [0,1]");
}

Tensor clamped_probs(const Tensor& p) {
  return clamp(p, kProbEps, 1.0 - kProbEps);
}

void check_batch_pair(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rank() != 4 || b.rank() != 4)
    throw ShapeError(std::string(op) + ": expects [B,C,H,W] batches");
  for (int i = 1; i < 4; ++i)
    if (a.dim(i) != b.dim(i))
      throw ShapeError(std::string(op) + ": image shapes differ " +
                       shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

Tensor apply_transform(const Tensor& batch, MatchTransform t) {
  switch (t) {
    case MatchTransform::kDct:
      return dct2(batch);
    case MatchTransform::kDftMagnitude:
      return dft2_magnitude(batch, false);
    case MatchTransform::kPixel:
      return batch;
  }
  throw ContractError("unknown match transform");
}

Tensor normalized_abs(const Tensor& x) {
  Tensor p = add(abs(x), Tensor::scalar(kMklFloor));
  return div(p, sum(p));
}

Tensor batch_std0(const Tensor& batch, const Tensor& mean) {
  Tensor var = sub(mean0(square(batch)), square(mean));
  var = clamp(var, 0.0, std::numeric_limits<double>::infinity());
  return sqrt(add(var, Tensor::scalar(kVarFloor)));
}

}  // namespace

Tensor discriminator_loss(const Tensor& d_real, const Tensor& d_fake) {
  check_probabilities(d_real, "discriminator_loss(d_real)");
  check_probabilities(d_fake, "discriminator_loss(d_fake)");
  Tensor one = Tensor::scalar(1.0);
  Tensor lr = mean(log(clamped_probs(d_real)));
  Tensor lf = mean(log(sub(one, clamped_probs(d_fake))));
  return neg(add(lr, lf));
}

Tensor generator_adversarial_loss(const Tensor& d_fake) {
  check_probabilities(d_fake, "generator_adversarial_loss");
  return neg(mean(log(clamped_probs(d_fake))));
}

Tensor f_match_loss(const Tensor& real_batch, const Tensor& fake_batch,
                    const MatchVariant& variant) {
  check_batch_pair(real_batch, fake_batch, "f_match_loss");
  Tensor fr = apply_transform(real_batch, variant.transform);
  Tensor ff = apply_transform(fake_batch, variant.transform);
  Tensor mr = mean0(fr);
  Tensor mf = mean0(ff);
  switch (variant.distance) {
    case MatchDistance::kMse:
      return mean(square(sub(mr, mf)));
    case MatchDistance::kMae:
      return mean(abs(sub(mr, mf)));
    case MatchDistance::kMkl: {
      Tensor p = normalized_abs(mr);
      Tensor q = normalized_abs(mf);
      return sum(mul(p, sub(log(p), log(q))));
    }
    case MatchDistance::kMsse: {
      Tensor sr = batch_std0(fr, mr);
      Tensor sf = batch_std0(ff, mf);
      return mean(square(concat(sub(mr, mf), sub(sr, sf))));
    }
  }
  throw ContractError("unknown match distance");
}

// ---- azimuthal integral -----------------------------------------------------

namespace {

// Pixel indices per interior ring, ordered by (exact radius, flat index).
struct RadialPlan {
  std::vector<std::vector<long>> bins;
};

std::shared_ptr<const RadialPlan> radial_plan(int H, int W, double cy,
                                              double cx) {
  using Key = std::tuple<int, int, double, double>;
  static std::map<Key, std::shared_ptr<const RadialPlan>> cache;
  static std::mutex mu;
  const Key key{H, W, cy, cx};
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  std::vector<std::pair<double, long>> order;
  order.reserve(long(H) * W);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j)
      order.push_back({std::hypot(i - cy, j - cx), long(i) * W + j});
  std::sort(order.begin(), order.end());
  auto plan = std::make_shared<RadialPlan>();
  std::size_t start = 0;
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t k = 1; k <= order.size(); ++k) {
    if (k == order.size() || static_cast<long>(order[k].first) !=
                                 static_cast<long>(order[start].first)) {
      runs.push_back({start, k});
      start = k;
    }
  }
  if (runs.size() >= 3) {
    for (std::size_t r = 1; r + 1 < runs.size(); ++r) {
      std::vector<long> bin;
      bin.reserve(runs[r].second - runs[r].first);
      for (std::size_t k = runs[r].first; k < runs[r].second; ++k)
        bin.push_back(order[k].second);
      plan->bins.push_back(std::move(bin));
    }
  }
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(key, plan);
  return plan;
}

}  // namespace

Tensor azimuthal_integral(const Tensor& magnitude,
                          std::optional<std::pair<double, double>> center) {
  if (magnitude.rank() != 2)
    throw ShapeError("azimuthal_integral: expects an [H,W] plane");
  if (magnitude.array().minCoeff() < 0.0)
    throw ContractError("azimuthal_integral: negative magnitudes");
  const int H = magnitude.dim(0), W = magnitude.dim(1);
  if (H < 4 || W < 4)
    throw ContractError(
        "azimuthal_integral: H,W >= 4 required (profile would be empty)");
  const double cy = center ? center->first : (H - 1) / 2.0;
  const double cx = center ? center->second : (W - 1) / 2.0;
  auto plan = radial_plan(H, W, cy, cx);
  const long nbins = static_cast<long>(plan->bins.size());
  Array profile(nbins);
  for (long b = 0; b < nbins; ++b) {
    double acc = 0.0;
    for (long idx : plan->bins[b]) acc += magnitude.at(idx);
    profile(b) = acc / double(plan->bins[b].size());
  }
  Tensor r({static_cast<int>(nbins)}, std::move(profile));
  if (detail::recording({&magnitude})) {
    auto xd = magnitude.handle();
    auto od = r.handle();
    detail::record(r, [xd, od, plan, nbins] {
      if (od->grad.size() != od->value.size()) return;
      if (!xd->wants_grad()) return;
      Array& gx = xd->grad_ref();
      for (long b = 0; b < nbins; ++b) {
        const double g = od->grad(b) / double(plan->bins[b].size());
        for (long idx : plan->bins[b]) gx(idx) += g;
      }
    });
  }
  return r;
}

Tensor negated_profile_bce(const Tensor& target_profile,
                           const Tensor& predicted_profile) {
  if (!shape_eq(target_profile.shape(), predicted_profile.shape()))
    throw ShapeError("negated_profile_bce: profile lengths differ");
  Tensor one = Tensor::full(predicted_profile.shape(), 1.0);
  Tensor t = target_profile;
  Tensor p = predicted_profile;
  return mean(add(mul(t, log(p)), mul(sub(one, t), log(sub(one, p)))));
}

namespace {

// [B,C,H,W] magnitudes -> per-image channel-mean planes and a profile.
Tensor channel_mean_plane(const Tensor& image_mag) {
  const int C = image_mag.dim(0), H = image_mag.dim(1), W = image_mag.dim(2);
  return reshape(mean0(reshape(image_mag, {C, H * W})), {H, W});
}

Tensor normalized_profile(const Tensor& plane) {
  Tensor p = azimuthal_integral(plane);
  return clamp(div(p, take(p, 0)), kProfileEps, 1.0 - kProfileEps);
}

}  // namespace

Tensor sr_loss(const Tensor& real_batch, const Tensor& fake_batch) {
  check_batch_pair(real_batch, fake_batch, "sr_loss");
  if (real_batch.dim(2) != real_batch.dim(3))
    throw ContractError("sr_loss: requires square images");
  Tensor real_profile;
  {
    TapePause pause;  // the real-side statistic carries no gradient
    Tensor mag = dft2_magnitude(real_batch, true);
    real_profile = normalized_profile(channel_mean_plane(mean0(mag)));
  }
  Tensor fake_mag = dft2_magnitude(fake_batch, true);
  const int bf = fake_batch.dim(0);
  Tensor acc;
  for (int i = 0; i < bf; ++i) {
    Tensor profile = normalized_profile(channel_mean_plane(slice0(fake_mag, i)));
    Tensor term = negated_profile_bce(real_profile, profile);
    acc = i == 0 ? term : add(acc, term);
  }
  return smul(acc, 1.0 / double(bf));
}

LossReport total_losses(
    const std::function<Tensor(const Tensor&)>& discriminator,
    const Tensor& real_batch, const Tensor& fake_batch,
    const ObjectiveConfig& config) {
  check_batch_pair(real_batch, fake_batch, "total_losses");
  if (!(config.gamma >= 0.0 && config.gamma <= 1.0))
    throw ContractError("total_losses: gamma outside [0,1]");
  const bool filtered = config.gamma < 1.0;
  Tensor xr = filtered ? f_drop(real_batch, config.gamma) : real_batch;
  Tensor xf = filtered ? f_drop(fake_batch, config.gamma) : fake_batch;
  Tensor pr = discriminator(xr);
  Tensor pf = discriminator(xf);

  LossReport report;
  report.gamma = config.gamma;
  report.lambda = config.lambda;
  report.d_loss = discriminator_loss(pr, pf).value();
  report.g_loss_adv = generator_adversarial_loss(pf).value();
  double reg = 0.0;
  switch (config.regularizer) {
    case Regularizer::kNone:
      break;
    case Regularizer::kFMatch:
      report.match_loss =
          f_match_loss(real_batch, fake_batch, config.variant).value();
      reg = report.match_loss;
      break;
    case Regularizer::kSpectral:
      report.sr_loss = sr_loss(real_batch, fake_batch).value();
      reg = report.sr_loss;
      break;
  }
  report.g_loss_total = report.g_loss_adv + config.lambda * reg;
  return report;
}

}  // namespace freqgan
