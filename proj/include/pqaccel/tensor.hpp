/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#pragma once

#include <string>
#include <vector>

#include "pqaccel/common.hpp"

namespace pqaccel {

/// Dense 4-D tensor, row-major (count, channels, height, width), f32.
struct Tensor4 {
  int count = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Tensor4() = default;
  Tensor4(int n, int c, int h, int w)
      : count(n), channels(c), height(h), width(w),
        data(size_t(n) * c * h * w, 0.0f) {}

  size_t size() const { return size_t(count) * channels * height * width; }

  size_t index(int n, int c, int h, int w) const {
    return ((size_t(n) * channels + c) * height + h) * width + w;
  }
  float& at(int n, int c, int h, int w) { return data[index(n, c, h, w)]; }
  float at(int n, int c, int h, int w) const { return data[index(n, c, h, w)]; }

  float* ptr(int n, int c, int h, int w) { return data.data() + index(n, c, h, w); }
  const float* ptr(int n, int c, int h, int w) const {
    return data.data() + index(n, c, h, w);
  }

  std::string shape_str() const;

  /// Throws DataError if any entry is non-finite; used at IO boundaries.
  void validate_finite(const std::string& what) const;

  bool operator==(const Tensor4&) const = default;
};

/// Convolution layer: weights (kernels M, channels N, k_h, k_w), bias, geometry.
struct ConvLayer {
  std::string name;
  Tensor4 weights;  // count = M kernels, channels = N
  std::vector<float> bias;
  int stride = 1;
  int padding = 0;

  int kernel_count() const { return weights.count; }
  int channel_count() const { return weights.channels; }
  int kernel_h() const { return weights.height; }
  int kernel_w() const { return weights.width; }

  /// Throws ParamError/ShapeError on violated invariants (M,N >= 1,
  /// bias length = M, stride >= 1, padding >= 0).
  void validate() const;

  bool operator==(const ConvLayer&) const = default;
};

}  // namespace pqaccel
