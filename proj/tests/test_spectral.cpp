#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "freqgan/rng.hpp"
#include "freqgan/spectral.hpp"
#include "support/finite_diff.hpp"
#include "support/oracles.hpp"

using namespace freqgan;

namespace {

Tensor random_image(const Shape& shape, Rng& rng) {
  Tensor t = Tensor::zeros(shape);
  for (long i = 0; i < t.size(); ++i) t.array()(i) = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("dct2 of a constant 2x2 image") {
  Tensor x = Tensor::full({2, 2}, 1.0);
  Tensor c = dct2(x);
  CHECK(c.at(0) == doctest::Approx(2.0).epsilon(1e-12));
  for (long i = 1; i < 4; ++i) CHECK(std::abs(c.at(i)) < 1e-12);
}

TEST_CASE("dct2 of a 2x2 impulse is flat 0.5") {
  Tensor x = Tensor::from({2, 2}, {1, 0, 0, 0});
  Tensor c = dct2(x);
  for (long i = 0; i < 4; ++i)
    CHECK(c.at(i) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("idct2 of a DC-only spectrum is constant") {
  const int H = 5;
  const double cval = 0.37;
  Tensor s = Tensor::zeros({H, H});
  s.array()(0) = H * cval;
  Tensor x = idct2(s);
  for (long i = 0; i < x.size(); ++i)
    CHECK(x.at(i) == doctest::Approx(cval).epsilon(1e-12));
  Tensor z = idct2(Tensor::zeros({3, 4}));
  CHECK(z.array().abs().maxCoeff() == 0.0);
}

TEST_CASE("dct2/idct2 roundtrip and energy on 3x32x32") {
  Rng rng(17);
  for (int rep = 0; rep < 4; ++rep) {
    Tensor x = random_image({3, 32, 32}, rng);
    Tensor c = dct2(x);
    Tensor back = idct2(c);
    CHECK((back.array() - x.array()).abs().maxCoeff() < 1e-9);
    Tensor fwd = dct2(idct2(c));
    CHECK((fwd.array() - c.array()).abs().maxCoeff() < 1e-9);
    for (int ch = 0; ch < 3; ++ch) {
      const double ex =
          std::sqrt(x.array().segment(long(ch) * 1024, 1024).square().sum());
      const double ec =
          std::sqrt(c.array().segment(long(ch) * 1024, 1024).square().sum());
      CHECK(std::abs(ex - ec) <= 1e-9 * std::max(1.0, ex));
    }
  }
}

TEST_CASE("transforms match brute-force definitions") {
  Rng rng(19);
  for (auto [H, W] : std::vector<std::pair<int, int>>{
           {1, 1}, {2, 3}, {4, 4}, {5, 7}, {8, 3}, {16, 16}}) {
    Tensor x = random_image({H, W}, rng);
    Array c_ref = testing::dct2_bruteforce(x.array(), H, W);
    CHECK((dct2(x).array() - c_ref).abs().maxCoeff() < 1e-8);
    CHECK((idct2(Tensor({H, W}, c_ref)).array() -
           testing::idct2_bruteforce(c_ref, H, W))
              .abs()
              .maxCoeff() < 1e-8);
    Array re_ref, im_ref;
    testing::dft2_bruteforce(x.array(), H, W, re_ref, im_ref);
    ComplexSpectrum f = dft2(x);
    CHECK((f.re.array() - re_ref).abs().maxCoeff() < 1e-8);
    CHECK((f.im.array() - im_ref).abs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("dft2 of constant and impulse images") {
  const int H = 4, W = 6;
  const double c = -0.4;
  ComplexSpectrum f = dft2(Tensor::full({H, W}, c));
  CHECK(f.re.at(0) == doctest::Approx(c * H * W).epsilon(1e-12));
  for (long i = 1; i < f.re.size(); ++i) {
    CHECK(std::abs(f.re.at(i)) < 1e-9);
    CHECK(std::abs(f.im.at(i)) < 1e-9);
  }
  Tensor impulse = Tensor::zeros({3, 3});
  impulse.array()(0) = 1.0;
  ComplexSpectrum g = dft2(impulse);
  for (long i = 0; i < 9; ++i) {
    CHECK(g.re.at(i) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(g.im.at(i)) < 1e-12);
  }
}

TEST_CASE("dft2 conjugate symmetry for real inputs") {
  Rng rng(29);
  const int H = 6, W = 5;
  Tensor x = random_image({H, W}, rng);
  ComplexSpectrum f = dft2(x);
  for (int u = 0; u < H; ++u)
    for (int v = 0; v < W; ++v) {
      const long a = long(u) * W + v;
      const long b = long((H - u) % H) * W + (W - v) % W;
      CHECK(std::abs(f.re.at(a) - f.re.at(b)) < 1e-9);
      CHECK(std::abs(f.im.at(a) + f.im.at(b)) < 1e-9);
    }
}

TEST_CASE("mask examples") {
  Tensor all = build_mask(1.0, 4, 4);
  CHECK(all.array().minCoeff() == 1.0);
  Tensor dc = build_mask(0.0, 4, 4);
  CHECK(dc.at(0) == 1.0);
  CHECK(dc.array().sum() == 1.0);
  Tensor m = build_mask(0.4, 2, 2);
  CHECK(m.at(0) == 1.0);
  CHECK(m.at(1) == 1.0);
  CHECK(m.at(2) == 1.0);
  CHECK(m.at(3) == 0.0);
  CHECK_THROWS_AS(build_mask(-0.1, 4, 4), ContractError);
  CHECK_THROWS_AS(build_mask(1.5, 4, 4), ContractError);
}

TEST_CASE("mask boundary tie is kept") {
  // gamma = 0.25 on a 4x4 grid puts (1,1) exactly on the threshold:
  // 0.25 * sqrt(32) == sqrt(2) in double arithmetic.
  Tensor m = build_mask(0.25, 4, 4);
  CHECK(m.at(1 * 4 + 1) == 1.0);
  CHECK(m.at(2) == 0.0);  // (0,2) at distance 2 > sqrt(2)
  Tensor m2 = build_mask(0.5, 4, 4);
  CHECK(m2.at(2 * 4 + 2) == 1.0);  // (2,2) exactly on 0.5*sqrt(32)
}

TEST_CASE("mask is monotone in gamma") {
  for (int H : {2, 4, 8, 16}) {
    Tensor prev = build_mask(0.0, H, H);
    for (int g = 1; g <= 10; ++g) {
      Tensor cur = build_mask(g / 10.0, H, H);
      CHECK((cur.array() - prev.array()).minCoeff() >= 0.0);
      prev = cur;
    }
  }
}

TEST_CASE("f_drop identity, mean, and idempotence") {
  Rng rng(37);
  Tensor x = random_image({3, 8, 8}, rng);
  Tensor same = f_drop(x, 1.0);
  CHECK((same.array() - x.array()).abs().maxCoeff() < 1e-9);

  Tensor flat = f_drop(x, 0.0);
  for (int c = 0; c < 3; ++c) {
    const double mean = x.array().segment(long(c) * 64, 64).mean();
    for (long i = 0; i < 64; ++i)
      CHECK(flat.at(long(c) * 64 + i) == doctest::Approx(mean).epsilon(1e-9));
  }

  Tensor once = f_drop(x, 0.6);
  Tensor twice = f_drop(once, 0.6);
  CHECK((twice.array() - once.array()).abs().maxCoeff() < 1e-9);
}

TEST_CASE("f_drop low-pass semantics across gammas") {
  Rng rng(41);
  Tensor x = random_image({2, 16, 16}, rng);
  for (double g1 : {0.2, 0.5, 0.8}) {
    Tensor dropped = dct2(f_drop(x, g1));
    for (double g2 : {g1, g1 + 0.1999}) {
      Tensor mask = build_mask(std::min(g2, 1.0), 16, 16);
      for (int c = 0; c < 2; ++c)
        for (long i = 0; i < 256; ++i)
          if (mask.at(i) == 0.0)
            CHECK(std::abs(dropped.at(long(c) * 256 + i)) < 1e-12);
    }
  }
}

TEST_CASE("f_drop invocation counter") {
  fdrop_invocations() = 0;
  Rng rng(43);
  Tensor x = random_image({1, 4, 4}, rng);
  f_drop(x, 0.5);
  f_drop(x, 0.5);
  CHECK(fdrop_invocations() == 2);
}

TEST_CASE("spectral ops are differentiable") {
  Rng rng(47);
  auto check = [&](const char* name,
                   const std::function<Tensor(const Tensor&)>& f) {
    CAPTURE(name);
    Tensor x = random_image({2, 4, 4}, rng);
    x.set_requires_grad();
    Array ad;
    {
      GradientTape tape;
      tape.backward(f(x));
      ad = x.grad();
    }
    Array fd = testing::finite_diff_grad(
        [&](const Tensor& t) { return f(t).value(); }, x);
    CHECK(testing::grad_rel_error(ad, fd) < 1e-4);
  };
  check("dct2", [](const Tensor& x) { return mean(square(dct2(x))); });
  check("idct2", [](const Tensor& x) { return mean(square(idct2(x))); });
  check("f_drop", [](const Tensor& x) {
    return mean(square(f_drop(x, 0.6)));
  });
  check("dft2_magnitude", [](const Tensor& x) {
    return mean(dft2_magnitude(x, false));
  });
  check("dft2_magnitude centered", [](const Tensor& x) {
    return mean(square(dft2_magnitude(x, true)));
  });
}

TEST_CASE("dft2_magnitude centered shift places DC mid-plane") {
  const int H = 4;
  Tensor x = Tensor::full({H, H}, 0.25);  // only a DC component
  Tensor m = dft2_magnitude(x, true);
  CHECK(m.at(long(H / 2) * H + H / 2) == doctest::Approx(0.25 * H * H));
  CHECK(m.at(0) == doctest::Approx(0.0));
}
