#pragma once

#include <string>

#include "amosl/model.hpp"

namespace amosl {

/// Text manifest (versioned header, model hyperparameters, parameter names and
/// shapes) followed by little-endian 64-bit float arrays in manifest order.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace amosl
