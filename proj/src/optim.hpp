#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "autodiff.hpp"

namespace gicn::ad {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
};

// Bias-corrected Adam update over named parameters. Parameters missing from
// `grads` are treated as zero-gradient. Throws NumericError naming the
// parameter on a non-finite gradient.
void adam_step(std::map<std::string, Tensor>& params,
               const std::map<std::string, Tensor>& grads, AdamState& state,
               double lr);

}  // namespace gicn::ad
