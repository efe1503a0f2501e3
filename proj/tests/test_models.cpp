#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "freqgan/models.hpp"
#include "freqgan/rng.hpp"
#include "support/finite_diff.hpp"

using namespace freqgan;

namespace {

Tensor random_latent(int b, int dim, std::uint64_t seed) {
  Rng rng(seed);
  Tensor z = Tensor::zeros({b, dim});
  for (long i = 0; i < z.size(); ++i) z.array()(i) = rng.normal();
  return z;
}

const GanArch kTinyArch{8, 4, 16, 3};

}  // namespace

TEST_CASE("init_model determinism and nondegeneracy") {
  GanModel a = init_model(kTinyArch, 77);
  GanModel b = init_model(kTinyArch, 77);
  GanModel c = init_model(kTinyArch, 78);
  REQUIRE(a.gen_params.size() == b.gen_params.size());
  bool identical = true, differs = false;
  for (std::size_t i = 0; i < a.gen_params.size(); ++i) {
    identical =
        identical &&
        (a.gen_params[i].array() == b.gen_params[i].array()).all();
    differs =
        differs || !(a.gen_params[i].array() == c.gen_params[i].array()).all();
  }
  CHECK(identical);
  CHECK(differs);
  CHECK_THROWS_AS(init_model(GanArch{8, 4, 20, 3}, 1), ContractError);
}

TEST_CASE("generate output shape and range") {
  for (int size : {16, 32}) {
    GanArch arch{8, 4, size, 3};
    GanModel m = init_model(arch, 5);
    Tensor z = random_latent(3, 8, 11);
    Tensor x = generate(m, z);
    REQUIRE(x.shape() == Shape{3, 3, size, size});
    CHECK(x.array().abs().maxCoeff() <= 1.0);
  }
  GanModel m = init_model(kTinyArch, 5);
  CHECK_THROWS_AS(generate(m, Tensor::zeros({2, 9})), ContractError);
}

TEST_CASE("per-sample independence without batch coupling") {
  GanModel m = init_model(kTinyArch, 9);
  Tensor z = random_latent(2, 8, 13);
  Tensor both = generate(m, z);
  Tensor first = generate(m, Tensor({1, 8}, z.array().head(8)));
  Tensor second = generate(m, Tensor({1, 8}, z.array().tail(8)));
  CHECK((both.array().head(first.size()) == first.array()).all());
  CHECK((both.array().tail(second.size()) == second.array()).all());

  Tensor px = discriminate(m, both);
  Tensor p1 = discriminate(m, first);
  CHECK(px.at(0) == p1.at(0));
}

TEST_CASE("discriminate shape, range, and out-of-range tolerance") {
  GanModel m = init_model(kTinyArch, 21);
  Rng rng(3);
  Tensor x = Tensor::zeros({4, 3, 16, 16});
  for (long i = 0; i < x.size(); ++i) x.array()(i) = rng.uniform(-3.0, 3.0);
  Tensor p = discriminate(m, x);  // values beyond [-1,1] are fine
  REQUIRE(p.shape() == Shape{4});
  CHECK(p.array().minCoeff() > 0.0);
  CHECK(p.array().maxCoeff() < 1.0);
  CHECK_THROWS_AS(discriminate(m, Tensor::zeros({1, 3, 8, 8})), ShapeError);
}

TEST_CASE("forward determinism") {
  GanModel m = init_model(kTinyArch, 33);
  Tensor z = random_latent(2, 8, 17);
  Tensor a = generate(m, z);
  Tensor b = generate(m, z);
  CHECK((a.array() == b.array()).all());
}

TEST_CASE("generator gradient with respect to z") {
  GanModel m = init_model(kTinyArch, 41);
  Tensor z = random_latent(1, 8, 19).set_requires_grad();
  auto loss = [&](const Tensor& latent) { return mean(generate(m, latent)); };
  Array ad;
  {
    GradientTape tape;
    tape.backward(loss(z));
    ad = z.grad();
  }
  CHECK(ad.abs().maxCoeff() > 0.0);
  Array fd = testing::finite_diff_grad(
      [&](const Tensor& t) { return loss(t).value(); }, z);
  CHECK(testing::grad_rel_error(ad, fd) < 1e-4);
}

TEST_CASE("discriminator gradient with respect to x") {
  GanModel m = init_model(kTinyArch, 43);
  Rng rng(23);
  Tensor x = Tensor::zeros({1, 3, 16, 16});
  for (long i = 0; i < x.size(); ++i) x.array()(i) = rng.uniform(-0.9, 0.9);
  x.set_requires_grad();
  auto loss = [&](const Tensor& img) { return mean(discriminate(m, img)); };
  Array ad;
  {
    GradientTape tape;
    tape.backward(loss(x));
    ad = x.grad();
  }
  Array fd = testing::finite_diff_grad(
      [&](const Tensor& t) { return loss(t).value(); }, x);
  CHECK(testing::grad_rel_error(ad, fd) < 1e-4);
}

TEST_CASE("checkpoint round-trip") {
  GanModel m = init_model(GanArch{8, 4, 32, 1}, 55);
  const std::string path = "test_checkpoint.ckpt";
  save_checkpoint(m, 1234, path);
  long iter = 0;
  GanModel r = load_checkpoint(path, &iter);
  CHECK(iter == 1234);
  CHECK(r.arch == m.arch);
  std::vector<Tensor> a = m.all_params(), b = r.all_params();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK((a[i].array() == b[i].array()).all());
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_checkpoint("missing_file.ckpt"), IngestError);
}
