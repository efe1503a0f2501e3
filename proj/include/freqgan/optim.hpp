#pragma once

#include <vector>

#include "freqgan/tensor.hpp"

namespace freqgan {

/// Bias-corrected Adam. Moment arrays are lazily sized to the parameters on
/// the first step; v entries stay nonnegative by construction.
struct AdamState {
  long step = 0;
  double lr = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double eps = 1e-8;
  std::vector<Array> m;
  std::vector<Array> v;
};

/// In-place update of params from explicit gradient arrays. A zero-sized
/// gradient stands for an all-zero gradient (unreached leaf).
void adam_step(std::vector<Tensor>& params, const std::vector<Array>& grads,
               AdamState& state);

/// Convenience overload reading each parameter's accumulated .grad().
void adam_step(std::vector<Tensor>& params, AdamState& state);

}  // namespace freqgan
