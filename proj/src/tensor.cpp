/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#include "pqaccel/tensor.hpp"

#include <cmath>
#include <sstream>

namespace pqaccel {

std::string Tensor4::shape_str() const {
  std::ostringstream os;
  os << count << "x" << channels << "x" << height << "x" << width;
  return os.str();
}

void Tensor4::validate_finite(const std::string& what) const {
  for (size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      std::ostringstream os;
      os << what << ": non-finite value at flat index " << i << " (shape "
         << shape_str() << ")";
      throw DataError(os.str());
    }
  }
}

void ConvLayer::validate() const {
  if (weights.count < 1 || weights.channels < 1)
    throw ParamError("layer '" + name + "': needs at least one kernel and one channel, weights " +
                     weights.shape_str());
  if (weights.height < 1 || weights.width < 1)
    throw ParamError("layer '" + name + "': kernel spatial dims must be >= 1, weights " +
                     weights.shape_str());
  if (bias.size() != size_t(weights.count)) {
    std::ostringstream os;
    os << "layer '" << name << "': bias length " << bias.size()
       << " != kernel count " << weights.count;
    throw ShapeError(os.str());
  }
  if (stride < 1) throw ParamError("layer '" + name + "': stride must be >= 1");
  if (padding < 0) throw ParamError("layer '" + name + "': padding must be >= 0");
  if (weights.data.size() != weights.size())
    throw ShapeError("layer '" + name + "': weight storage does not match shape " +
                     weights.shape_str());
}

}  // namespace pqaccel
