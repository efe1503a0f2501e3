#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "freqgan/optim.hpp"
#include "freqgan/rng.hpp"
#include "freqgan/tensor.hpp"
#include "support/finite_diff.hpp"

using namespace freqgan;

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t = Tensor::zeros(shape);
  for (long i = 0; i < t.size(); ++i) t.array()(i) = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("shape invariants") {
  CHECK_THROWS_AS(Tensor::zeros({0, 2}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, Array::Zero(3)), ShapeError);
  Tensor t = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK(t.size() == 4);
  CHECK(t.at(3) == 4.0);
}

TEST_CASE("add elementwise definition") {
  Tensor a = Tensor::from({1, 2}, {1, 2});
  Tensor b = Tensor::from({1, 2}, {3, 4});
  Tensor c = add(a, b);
  CHECK(c.at(0) == 4.0);
  CHECK(c.at(1) == 6.0);
  CHECK_THROWS_AS(add(a, Tensor::from({3}, {1, 2, 3})), ShapeError);
}

TEST_CASE("matmul identity case") {
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Rng rng(3);
  Tensor a = random_tensor({2, 2}, rng);
  Tensor r = matmul(eye, a);
  for (long i = 0; i < 4; ++i) CHECK(r.at(i) == doctest::Approx(a.at(i)));
  CHECK_THROWS_AS(matmul(a, Tensor::zeros({3, 2})), ShapeError);
}

TEST_CASE("sigmoid symmetry") {
  Tensor x = Tensor::scalar(0.0);
  CHECK(sigmoid(x).value() == doctest::Approx(0.5));
}

TEST_CASE("log domain error") {
  CHECK_THROWS_AS(log(Tensor::scalar(0.0)), DomainError);
  CHECK_THROWS_AS(log(Tensor::scalar(-1.0)), DomainError);
  CHECK_THROWS_AS(sqrt(Tensor::scalar(-1.0)), DomainError);
}

TEST_CASE("backward of sum is all-ones") {
  Rng rng(7);
  Tensor x = random_tensor({3, 4}, rng).set_requires_grad();
  GradientTape tape;
  Tensor s = sum(x);
  tape.backward(s);
  Array g = x.grad();
  for (long i = 0; i < g.size(); ++i) CHECK(g(i) == 1.0);
}

TEST_CASE("backward of mean(square(x)) is 2x/n") {
  Rng rng(11);
  Tensor x = random_tensor({6}, rng).set_requires_grad();
  GradientTape tape;
  tape.backward(mean(square(x)));
  Array g = x.grad();
  for (long i = 0; i < g.size(); ++i)
    CHECK(g(i) == doctest::Approx(2.0 * x.at(i) / 6.0).epsilon(1e-12));
}

TEST_CASE("non-scalar backward root rejected") {
  Tensor x = Tensor::zeros({2}).set_requires_grad();
  GradientTape tape;
  Tensor y = add(x, x);
  CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("unreachable leaves get zero gradient") {
  Tensor x = Tensor::zeros({3}).set_requires_grad();
  Tensor y = Tensor::full({1}, 2.0).set_requires_grad();
  GradientTape tape;
  tape.backward(mul(y, y));
  CHECK(x.grad().abs().maxCoeff() == 0.0);
  CHECK(y.grad()(0) == doctest::Approx(4.0));
}

TEST_CASE("finite differences across composed primitives") {
  Rng rng(23);
  auto check = [&](const char* name, const Shape& shape,
                   const std::function<Tensor(const Tensor&)>& f, double lo,
                   double hi) {
    CAPTURE(name);
    Tensor x = random_tensor(shape, rng, lo, hi);
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

  check("tanh-exp chain", {2, 3},
        [](const Tensor& x) { return mean(exp(tanh(x))); }, -1, 1);
  check("sigmoid-log chain", {5},
        [](const Tensor& x) { return mean(log(sigmoid(x))); }, -2, 2);
  check("sqrt", {4}, [](const Tensor& x) { return sum(sqrt(x)); }, 0.5, 2);
  check("leaky relu", {8},
        [](const Tensor& x) { return mean(square(leaky_relu(x, 0.2))); }, 0.3,
        1.5);
  check("matmul", {3, 4},
        [](const Tensor& x) {
          Tensor w = Tensor::from({4, 2}, {1, 2, -1, 0.5, 0.25, -2, 3, 1});
          return mean(square(matmul(x, w)));
        },
        -1, 1);
  check("conv2d", {2, 2, 4, 4},
        [](const Tensor& x) {
          Tensor w = Tensor::from(
              {1, 2, 3, 3},
              {0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.7, 0.8, -0.9,
               -0.1, 0.2, 0.3, -0.4, 0.5, 0.6, -0.7, 0.8, 0.9});
          return mean(square(conv2d(x, w, 2, 1)));
        },
        -1, 1);
  check("conv_transpose2d", {1, 2, 3, 3},
        [](const Tensor& x) {
          Tensor w = Tensor::from(
              {2, 1, 4, 4},
              {0.05, -0.1, 0.15, 0.2,  0.25, -0.3, 0.35, 0.4,
               0.45, -0.5, 0.55, 0.6,  0.65, -0.7, 0.75, 0.8,
               -0.05, 0.1, -0.15, 0.2, -0.25, 0.3, -0.35, 0.4,
               -0.45, 0.5, -0.55, 0.6, -0.65, 0.7, -0.75, 0.8});
          return mean(square(conv_transpose2d(x, w, 2, 1)));
        },
        -1, 1);
  check("mean0 + concat + div", {3, 4},
        [](const Tensor& x) {
          Tensor m = mean0(x);
          Tensor c = concat(m, square(m));
          return mean(div(c, Tensor::scalar(2.0)));
        },
        0.2, 1.0);
  check("slice0 + take", {3, 4},
        [](const Tensor& x) {
          return mul(take(slice0(x, 1), 2), take(x, 0));
        },
        -1, 1);
}

TEST_CASE("conv weight gradients match finite differences") {
  Rng rng(29);
  Tensor x = random_tensor({2, 2, 4, 4}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng).set_requires_grad();
  auto loss = [&](const Tensor& weight) {
    return mean(square(conv2d(x, weight, 2, 1)));
  };
  Array ad;
  {
    GradientTape tape;
    tape.backward(loss(w));
    ad = w.grad();
  }
  Array fd = testing::finite_diff_grad(
      [&](const Tensor& t) { return loss(t).value(); }, w);
  CHECK(testing::grad_rel_error(ad, fd) < 1e-4);
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(31);
  Tensor x0 = random_tensor({4, 4}, rng, 0.2, 1.0);
  const double a = 0.7, b = -1.3;
  auto l1 = [](const Tensor& x) { return mean(square(x)); };
  auto l2 = [](const Tensor& x) { return mean(log(x)); };
  auto grad_of = [&](const std::function<Tensor(const Tensor&)>& f) {
    Tensor x = Tensor(x0.shape(), x0.array()).set_requires_grad();
    GradientTape tape;
    tape.backward(f(x));
    return x.grad();
  };
  Array g1 = grad_of(l1);
  Array g2 = grad_of(l2);
  Array gc = grad_of([&](const Tensor& x) {
    return add(smul(l1(x), a), smul(l2(x), b));
  });
  CHECK((gc - (a * g1 + b * g2)).abs().maxCoeff() < 1e-10);
}

TEST_CASE("clamp passes gradient only inside the interval") {
  Tensor x = Tensor::from({3}, {-2.0, 0.5, 2.0}).set_requires_grad();
  GradientTape tape;
  tape.backward(sum(clamp(x, 0.0, 1.0)));
  Array g = x.grad();
  CHECK(g(0) == 0.0);
  CHECK(g(1) == 1.0);
  CHECK(g(2) == 0.0);
}

TEST_CASE("tape pause detaches computations") {
  Tensor x = Tensor::scalar(2.0).set_requires_grad();
  GradientTape tape;
  Tensor y;
  {
    TapePause pause;
    y = square(x);
  }
  Tensor z = mul(y, x);
  tape.backward(z);
  CHECK(x.grad()(0) == doctest::Approx(4.0));  // only the outer mul sees x
  CHECK(tape.node_count() == 1);
}

TEST_CASE("adam first step with beta1=0 approximates lr*sign(g)") {
  Tensor p = Tensor::from({4}, {1.0, -2.0, 3.0, 0.5});
  std::vector<Tensor> params{p};
  AdamState st;
  st.lr = 1e-3;
  std::vector<Array> grads{Array(4)};
  grads[0] << 0.04, -3.0, 1e-5, 0.7;
  const Array before = p.array();
  adam_step(params, grads, st);
  // closed form: delta = lr * g / (|g| + eps)
  for (int i = 0; i < 4; ++i) {
    const double g = grads[0](i);
    const double expected = st.lr * g / (std::abs(g) + st.eps);
    CHECK(before(i) - p.at(i) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(before(i) - p.at(i) - st.lr * (g > 0 ? 1.0 : -1.0)) <
          st.lr * 1e-2);
  }
  CHECK(st.step == 1);
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  Tensor p = Tensor::from({3}, {1.0, 2.0, 3.0});
  std::vector<Tensor> params{p};
  AdamState st;
  std::vector<Array> grads{Array::Zero(3)};
  adam_step(params, grads, st);
  CHECK(p.at(0) == 1.0);
  CHECK(p.at(1) == 2.0);
  CHECK(p.at(2) == 3.0);
  // empty gradient array stands for an unreached leaf
  std::vector<Array> empty{Array()};
  adam_step(params, empty, st);
  CHECK(p.at(0) == 1.0);
}

TEST_CASE("adam is deterministic from equal states") {
  Rng rng(41);
  Tensor p1 = random_tensor({16}, rng);
  Tensor p2 = Tensor(p1.shape(), p1.array());
  std::vector<Tensor> a{p1}, b{p2};
  AdamState s1, s2;
  Array g = Array::LinSpaced(16, -1.0, 1.0);
  for (int i = 0; i < 5; ++i) {
    adam_step(a, {g}, s1);
    adam_step(b, {g}, s2);
  }
  for (int i = 0; i < 16; ++i) CHECK(p1.at(i) == p2.at(i));
  CHECK_THROWS_AS(adam_step(a, {Array::Zero(3)}, s1), ContractError);
}

TEST_CASE("rng streams are reproducible") {
  Rng a(123), b(123), c(124);
  bool all_same = true, any_diff = false;
  for (int i = 0; i < 64; ++i) {
    const double x = a.normal(), y = b.normal(), z = c.normal();
    all_same = all_same && (x == y);
    any_diff = any_diff || (x != z);
  }
  CHECK(all_same);
  CHECK(any_diff);
}
