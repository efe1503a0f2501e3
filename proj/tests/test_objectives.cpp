#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "freqgan/objectives.hpp"
#include "freqgan/rng.hpp"
#include "freqgan/spectral.hpp"
#include "support/finite_diff.hpp"
#include "support/oracles.hpp"

using namespace freqgan;

namespace {

Tensor random_batch(const Shape& shape, Rng& rng, double lo = -1.0,
                    double hi = 1.0) {
  Tensor t = Tensor::zeros(shape);
  for (long i = 0; i < t.size(); ++i) t.array()(i) = rng.uniform(lo, hi);
  return t;
}

// Toy differentiable discriminator: sigmoid of the scaled per-sample mean.
Tensor toy_discriminator(const Tensor& x) {
  const int B = x.dim(0);
  const long n = x.size() / B;
  Tensor flat = reshape(x, {B, static_cast<int>(n)});
  Tensor w = Tensor::full({static_cast<int>(n), 1}, 3.0 / double(n));
  return sigmoid(reshape(matmul(flat, w), {B}));
}

}  // namespace

TEST_CASE("discriminator loss reference values") {
  Tensor half = Tensor::full({4}, 0.5);
  CHECK(discriminator_loss(half, half).value() ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

  Tensor good_r = Tensor::from({2}, {0.999, 0.9999});
  Tensor good_f = Tensor::from({2}, {0.001, 0.0001});
  CHECK(discriminator_loss(good_r, good_f).value() < 0.01);
  // clamped at the boundaries, still finite
  CHECK(std::isfinite(
      discriminator_loss(Tensor::from({1}, {1.0}), Tensor::from({1}, {0.0}))
          .value()));

  CHECK(discriminator_loss(Tensor::from({1}, {0.9}), Tensor::from({1}, {0.1}))
            .value() == doctest::Approx(-2.0 * std::log(0.9)).epsilon(1e-12));

  CHECK_THROWS_AS(
      discriminator_loss(Tensor::from({1}, {1.2}), Tensor::from({1}, {0.5})),
      ContractError);
  CHECK_THROWS_AS(
      discriminator_loss(Tensor::from({1}, {0.5}), Tensor::from({1}, {-0.1})),
      ContractError);
}

TEST_CASE("generator adversarial loss reference values") {
  CHECK(generator_adversarial_loss(Tensor::from({1}, {0.5})).value() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(generator_adversarial_loss(Tensor::from({2}, {0.9999, 0.9999})).value() <
        0.001);
  CHECK(generator_adversarial_loss(Tensor::from({2}, {0.25, 0.75})).value() ==
        doctest::Approx(-(std::log(0.25) + std::log(0.75)) / 2.0)
            .epsilon(1e-12));
  CHECK_THROWS_AS(generator_adversarial_loss(Tensor::from({1}, {2.0})),
                  ContractError);
}

TEST_CASE("f_match vanishes exactly on identical batches") {
  Rng rng(5);
  Tensor batch = random_batch({3, 2, 4, 4}, rng);
  for (auto t : {MatchTransform::kDct, MatchTransform::kDftMagnitude,
                 MatchTransform::kPixel})
    for (auto d : {MatchDistance::kMse, MatchDistance::kMae,
                   MatchDistance::kMkl, MatchDistance::kMsse}) {
      MatchVariant v{t, d};
      CHECK(f_match_loss(batch, batch, v).value() == 0.0);
    }
}

TEST_CASE("f_match DCT/MSE on the 2x2 impulse example") {
  Tensor real = Tensor::from({1, 1, 2, 2}, {1, 0, 0, 0});
  Tensor fake = Tensor::zeros({1, 1, 2, 2});
  MatchVariant v{MatchTransform::kDct, MatchDistance::kMse};
  CHECK(f_match_loss(real, fake, v).value() ==
        doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("f_match permutation invariance and batch-size asymmetry") {
  Rng rng(7);
  Tensor real = random_batch({4, 1, 4, 4}, rng);
  Tensor fake = random_batch({3, 1, 4, 4}, rng);
  std::vector<Tensor> shuffled;
  for (int i : {2, 0, 3, 1}) shuffled.push_back(slice0(real, i));
  Tensor real_perm = stack0(shuffled);
  for (auto d : {MatchDistance::kMse, MatchDistance::kMae, MatchDistance::kMkl,
                 MatchDistance::kMsse}) {
    MatchVariant v{MatchTransform::kDct, d};
    const double a = f_match_loss(real, fake, v).value();
    const double b = f_match_loss(real_perm, fake, v).value();
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
    CHECK(a >= 0.0);
  }
  CHECK_THROWS_AS(
      f_match_loss(real, random_batch({3, 1, 2, 2}, rng),
                   MatchVariant{}),
      ShapeError);
}

TEST_CASE("f_match (DCT,MSE) equals (Pixel,MSE) by orthonormality") {
  Rng rng(11);
  Tensor real = random_batch({4, 3, 8, 8}, rng);
  Tensor fake = random_batch({4, 3, 8, 8}, rng);
  const double dct_val =
      f_match_loss(real, fake, {MatchTransform::kDct, MatchDistance::kMse})
          .value();
  const double pix_val =
      f_match_loss(real, fake, {MatchTransform::kPixel, MatchDistance::kMse})
          .value();
  CHECK(std::abs(dct_val - pix_val) < 1e-9);
}

TEST_CASE("azimuthal integral of a 4x4 constant is a single bin") {
  const double v = 0.625;
  Tensor profile = azimuthal_integral(Tensor::full({4, 4}, v));
  REQUIRE(profile.size() == 1);
  CHECK(profile.at(0) == v);
}

TEST_CASE("azimuthal integral scales linearly") {
  Rng rng(13);
  Tensor x = random_batch({8, 8}, rng, 0.0, 1.0);
  Tensor p1 = azimuthal_integral(x);
  Tensor p2 = azimuthal_integral(smul(x, 2.5));
  for (long i = 0; i < p1.size(); ++i)
    CHECK(p2.at(i) == doctest::Approx(2.5 * p1.at(i)).epsilon(1e-12));
}

TEST_CASE("azimuthal integral matches the ring-grouping oracle bitwise") {
  Rng rng(17);
  for (auto [H, W] : std::vector<std::pair<int, int>>{
           {4, 4}, {5, 5}, {4, 9}, {16, 16}, {7, 33}}) {
    Tensor x = random_batch({H, W}, rng, 0.0, 1.0);
    Tensor p = azimuthal_integral(x);
    auto ref = testing::azimuthal_bruteforce(x.array(), H, W);
    REQUIRE(p.size() == static_cast<long>(ref.size()));
    for (long i = 0; i < p.size(); ++i) CHECK(p.at(i) == ref[i]);
  }
}

TEST_CASE("azimuthal integral contract errors") {
  CHECK_THROWS_AS(azimuthal_integral(Tensor::full({3, 8}, 1.0)), ContractError);
  CHECK_THROWS_AS(azimuthal_integral(Tensor::full({4, 4}, -1.0)),
                  ContractError);
}

TEST_CASE("azimuthal integral explicit center matches the default") {
  Rng rng(18);
  Tensor x = random_batch({9, 7}, rng, 0.0, 1.0);
  Tensor a = azimuthal_integral(x);
  Tensor b = azimuthal_integral(x, {{4.0, 3.0}});
  REQUIRE(a.size() == b.size());
  CHECK((a.array() == b.array()).all());
  Tensor c = azimuthal_integral(x, {{0.0, 0.0}});  // corner-centered rings
  CHECK(c.size() != a.size());
}

TEST_CASE("negated profile BCE at a flat 0.5 profile") {
  Tensor p = Tensor::full({6}, 0.5);
  CHECK(negated_profile_bce(p, p).value() ==
        doctest::Approx(-std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("sr_loss equals negated profile entropy on matching batches") {
  Rng rng(19);
  Tensor batch = random_batch({3, 1, 8, 8}, rng, -0.5, 0.5);
  // all fakes identical to the real batch mean profile is not required;
  // matching batches give BCE(p,p) per bin, the profile entropy
  const double loss = sr_loss(batch, batch).value();
  CHECK(std::isfinite(loss));
  // compute the entropy of each fake profile directly
  Tensor mag = dft2_magnitude(batch, true);
  double expect = 0.0;
  Tensor real_plane = Tensor::zeros({8, 8});
  {
    Tensor m = mean0(mag);
    for (int c = 0; c < 1; ++c)
      real_plane.array() += m.array().segment(long(c) * 64, 64);
  }
  Tensor rp = azimuthal_integral(real_plane);
  Array rn = (rp.array() / rp.at(0)).max(1e-6).min(1.0 - 1e-6);
  for (int i = 0; i < 3; ++i) {
    Tensor plane = Tensor({8, 8}, mag.array().segment(long(i) * 64, 64));
    Tensor fp = azimuthal_integral(plane);
    Array fn = (fp.array() / fp.at(0)).max(1e-6).min(1.0 - 1e-6);
    expect += (rn * fn.log() + (1.0 - rn) * (1.0 - fn).log()).mean();
  }
  expect /= 3.0;
  CHECK(loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("sr_loss single fake image drops the outer mean") {
  Rng rng(23);
  Tensor real = random_batch({4, 1, 8, 8}, rng);
  Tensor fake1 = random_batch({1, 1, 8, 8}, rng);
  Tensor two = stack0({slice0(fake1, 0), slice0(fake1, 0)});
  CHECK(sr_loss(real, fake1).value() ==
        doctest::Approx(sr_loss(real, two).value()).epsilon(1e-12));
  CHECK_THROWS_AS(sr_loss(random_batch({2, 1, 4, 6}, rng),
                          random_batch({2, 1, 4, 6}, rng)),
                  ContractError);
}

TEST_CASE("sr_loss gradient flows to the fake batch") {
  Rng rng(29);
  Tensor real = random_batch({2, 1, 8, 8}, rng);
  Tensor fake = random_batch({2, 1, 8, 8}, rng).set_requires_grad();
  GradientTape tape;
  tape.backward(sr_loss(real, fake));
  CHECK(fake.grad().abs().maxCoeff() > 0.0);
}

TEST_CASE("total_losses identity configuration matches the plain losses") {
  Rng rng(31);
  Tensor real = random_batch({2, 1, 4, 4}, rng);
  Tensor fake = random_batch({2, 1, 4, 4}, rng);
  ObjectiveConfig cfg;  // gamma=1, lambda=0, none
  LossReport r = total_losses(toy_discriminator, real, fake, cfg);
  const double d_ref =
      discriminator_loss(toy_discriminator(real), toy_discriminator(fake))
          .value();
  const double g_ref =
      generator_adversarial_loss(toy_discriminator(fake)).value();
  CHECK(r.d_loss == d_ref);
  CHECK(r.g_loss_adv == g_ref);
  CHECK(r.g_loss_total == g_ref);
  CHECK(r.match_loss == 0.0);
}

TEST_CASE("total_losses lambda arithmetic on the impulse example") {
  // real/fake pair with DCT-MSE match loss exactly 0.25, and a constant
  // discriminator probability of 0.5 so the adversarial term is ln 2
  Tensor real = Tensor::from({1, 1, 2, 2}, {1, 0, 0, 0});
  Tensor fake = Tensor::zeros({1, 1, 2, 2});
  auto half_d = [](const Tensor& x) {
    return Tensor::full({x.dim(0)}, 0.5);
  };
  ObjectiveConfig cfg;
  cfg.lambda = 0.01;
  cfg.regularizer = Regularizer::kFMatch;
  LossReport r = total_losses(half_d, real, fake, cfg);
  CHECK(r.match_loss == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r.g_loss_adv == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(r.g_loss_total ==
        doctest::Approx(std::log(2.0) + 0.0025).epsilon(1e-12));
  // the regularizer never touches the discriminator objective
  ObjectiveConfig off = cfg;
  off.regularizer = Regularizer::kNone;
  off.lambda = 0.0;
  CHECK(total_losses(half_d, real, fake, off).d_loss == r.d_loss);
}

TEST_CASE("gradient suite: losses vs finite differences") {
  Rng rng(37);
  auto check_wrt_fake = [&](const char* name, Tensor fake,
                            const std::function<Tensor(const Tensor&)>& f) {
    CAPTURE(name);
    fake.set_requires_grad();
    fake.zero_grad();
    Array ad;
    {
      GradientTape tape;
      tape.backward(f(fake));
      ad = fake.grad();
    }
    Array fd = testing::finite_diff_grad(
        [&](const Tensor& t) { return f(t).value(); }, fake);
    CHECK(testing::grad_rel_error(ad, fd) < 1e-4);
  };

  // kink-free fixtures: coefficients bounded away from zero crossings so the
  // absolute-value and KL variants stay smooth around the probe point
  Tensor real_coef = Tensor::zeros({1, 1, 4, 4});
  Tensor fake_coef = Tensor::zeros({1, 1, 4, 4});
  for (long i = 0; i < 16; ++i) {
    real_coef.array()(i) = rng.uniform(0.6, 1.0);
    fake_coef.array()(i) = rng.uniform(0.1, 0.4);
  }
  Tensor real_img = idct2(real_coef);
  Tensor fake_img = idct2(fake_coef);

  for (auto t : {MatchTransform::kDct, MatchTransform::kPixel}) {
    for (auto d : {MatchDistance::kMse, MatchDistance::kMae,
                   MatchDistance::kMkl, MatchDistance::kMsse}) {
      MatchVariant v{t, d};
      check_wrt_fake("f_match", fake_img, [&](const Tensor& x) {
        return f_match_loss(real_img, x, v);
      });
    }
  }
  // DFT magnitude transform needs inputs with comfortably nonzero bins
  Tensor real_pos = random_batch({2, 1, 4, 4}, rng, 0.3, 1.0);
  Tensor fake_pos = random_batch({2, 1, 4, 4}, rng, 0.3, 1.0);
  for (auto d : {MatchDistance::kMse, MatchDistance::kMae, MatchDistance::kMkl,
                 MatchDistance::kMsse}) {
    MatchVariant v{MatchTransform::kDftMagnitude, d};
    check_wrt_fake("f_match dft", fake_pos, [&](const Tensor& x) {
      return f_match_loss(real_pos, x, v);
    });
  }

  check_wrt_fake("azimuthal", random_batch({8, 8}, rng, 0.2, 1.0),
                 [](const Tensor& x) { return mean(square(azimuthal_integral(x))); });

  Tensor sr_real = random_batch({2, 1, 8, 8}, rng, -0.8, 0.8);
  check_wrt_fake("sr", random_batch({2, 1, 8, 8}, rng, -0.8, 0.8),
                 [&](const Tensor& x) { return sr_loss(sr_real, x); });

  // adversarial losses through a differentiable head, with and without the
  // low-pass filter in front (the filtered forms of the final objectives)
  Tensor gan_real = random_batch({2, 1, 4, 4}, rng);
  check_wrt_fake("g_adv", random_batch({2, 1, 4, 4}, rng), [](const Tensor& x) {
    return generator_adversarial_loss(toy_discriminator(x));
  });
  check_wrt_fake("g_adv filtered", random_batch({2, 1, 4, 4}, rng),
                 [](const Tensor& x) {
                   return generator_adversarial_loss(
                       toy_discriminator(f_drop(x, 0.6)));
                 });
  check_wrt_fake("d_loss filtered", random_batch({2, 1, 4, 4}, rng),
                 [&](const Tensor& x) {
                   return discriminator_loss(
                       toy_discriminator(f_drop(gan_real, 0.6)),
                       toy_discriminator(f_drop(x, 0.6)));
                 });
  check_wrt_fake("g_total eq10", random_batch({2, 1, 4, 4}, rng),
                 [&](const Tensor& x) {
                   Tensor adv = generator_adversarial_loss(
                       toy_discriminator(f_drop(x, 0.8)));
                   Tensor match = f_match_loss(gan_real, x, MatchVariant{});
                   return add(adv, smul(match, 0.01));
                 });
}
