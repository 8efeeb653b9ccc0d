#pragma once

#include "isac/autodiff.hpp"

#include <string>

namespace isac {

/// Binary weight container: magic + version, an index of (name, length,
/// offset) entries, then little-endian float64 payload arrays.
/// save -> load round trips are bit-exact.
void save_weights(const std::string& path, const ad::ParamStore& params);

ad::ParamStore load_weights(const std::string& path);

/// Loads into an existing store; every name must exist with the same shape,
/// otherwise the offending parameter is named in the error.
void load_weights_into(const std::string& path, ad::ParamStore& params);

}  // namespace isac
