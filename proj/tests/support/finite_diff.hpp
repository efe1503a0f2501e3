#pragma once

#include <cmath>
#include <functional>

#include "freqgan/tensor.hpp"

namespace freqgan::testing {

// Central finite differences of a scalar-valued function of one tensor.
// The function must not mutate its argument's storage across calls.
inline Array finite_diff_grad(const std::function<double(const Tensor&)>& f,
                              Tensor x, double step = 1e-4) {
  Array g(x.size());
  Array& v = x.array();
  for (long i = 0; i < x.size(); ++i) {
    const double keep = v(i);
    v(i) = keep + step;
    const double hi = f(x);
    v(i) = keep - step;
    const double lo = f(x);
    v(i) = keep;
    g(i) = (hi - lo) / (2.0 * step);
  }
  return g;
}

// Relative error between autodiff and finite-difference gradients,
// measured as an infinity-norm ratio.
inline double grad_rel_error(const Array& autodiff, const Array& fd) {
  const double scale = fd.abs().maxCoeff();
  const double diff = (autodiff - fd).abs().maxCoeff();
  if (scale < 1e-8) return diff;  // both should vanish
  return diff / scale;
}

}  // namespace freqgan::testing
