#include "optim.hpp"

#include <cmath>
#include <stdexcept>

#include "errors.hpp"

namespace gicn::ad {

void adam_step(std::map<std::string, Tensor>& params,
               const std::map<std::string, Tensor>& grads, AdamState& state,
               double lr) {
  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (auto& [name, p] : params) {
    const Tensor* g = nullptr;
    if (auto it = grads.find(name); it != grads.end()) {
      if (!it->second.same_shape(p))
        throw std::invalid_argument("adam_step: gradient shape " + it->second.shape_str() +
                                    " vs parameter " + p.shape_str() + " for '" + name + "'");
      if (!it->second.all_finite())
        throw NumericError("adam_step: non-finite gradient for parameter '" + name + "'");
      g = &it->second;
    }
    Tensor& m = state.m.try_emplace(name, p.rows, p.cols, 0.0).first->second;
    Tensor& v = state.v.try_emplace(name, p.rows, p.cols, 0.0).first->second;
    for (size_t i = 0; i < p.size(); ++i) {
      double gi = g ? g->data[i] : 0.0;
      m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * gi;
      v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * gi * gi;
      double mhat = m.data[i] / bc1;
      double vhat = v.data[i] / bc2;
      p.data[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace gicn::ad
