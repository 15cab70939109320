/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#pragma once

#include "pqaccel/common.hpp"
#include "pqaccel/tensor.hpp"

namespace pqaccel {

struct OutputGeometry {
  int height = 0;
  int width = 0;
  int positions() const { return height * width; }
};

/// Output spatial dims for the layer on an input of (in_h, in_w).
/// Throws ShapeError when the geometry yields no output positions.
OutputGeometry output_geometry(const ConvLayer& layer, int in_h, int in_w);

/// Reference dense cross-correlation; the exactness oracle for the
/// accelerated path. f32 accumulation.
Tensor4 conv_forward(const ConvLayer& layer, const Tensor4& input);

/// Patch matrix: each column is one output position's flattened receptive
/// field, rows ordered (channel, tap_i, tap_j) to match weight flattening.
/// For batched input, columns of consecutive images are concatenated.
/// conv_forward(layer, x) == weight_matrix * im2col(x, layer) + bias.
ColMatrix im2col(const Tensor4& input, const ConvLayer& layer);

/// Layer weights flattened to M x (N*k_h*k_w), kernel per column.
ColMatrix weight_matrix(const ConvLayer& layer);

}  // namespace pqaccel
