#include "freqgan/optim.hpp"

#include <cmath>

namespace freqgan {

void adam_step(std::vector<Tensor>& params, const std::vector<Array>& grads,
               AdamState& state) {
  if (params.size() != grads.size())
    throw ContractError("adam_step: params/grads count mismatch");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i] = Array::Zero(params[i].size());
      state.v[i] = Array::Zero(params[i].size());
    }
  }
  if (state.m.size() != params.size())
    throw ContractError("adam_step: state size mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Array& p = params[i].array();
    Array& m = state.m[i];
    Array& v = state.v[i];
    if (m.size() != p.size())
      throw ContractError("adam_step: parameter shape changed");
    if (grads[i].size() == 0) {
      m *= state.beta1;
      v *= state.beta2;
    } else {
      if (grads[i].size() != p.size())
        throw ContractError("adam_step: gradient shape mismatch");
      m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
      v = state.beta2 * v + (1.0 - state.beta2) * grads[i].square();
    }
    p -= state.lr * (m / bc1) / ((v / bc2).sqrt() + state.eps);
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  std::vector<Array> grads;
  grads.reserve(params.size());
  for (const Tensor& p : params) grads.push_back(p.grad());
  adam_step(params, grads, state);
}

}  // namespace freqgan
