#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "autodiff.hpp"

namespace gicn {

// Flat binary container holding named parameter tensors: an 8-byte magic,
// a length-prefixed JSON index (names, shapes, offsets, plus caller
// metadata), then raw little-endian doubles.
void save_checkpoint(const std::string& path,
                     const std::map<std::string, ad::Tensor>& params,
                     const nlohmann::json& meta);

struct Checkpoint {
  std::map<std::string, ad::Tensor> params;
  nlohmann::json meta;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace gicn
