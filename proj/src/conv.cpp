/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#include "pqaccel/conv.hpp"

#include <algorithm>
#include <sstream>

#include "pqaccel/kernels.hpp"

namespace pqaccel {

OutputGeometry output_geometry(const ConvLayer& layer, int in_h, int in_w) {
  OutputGeometry g;
  g.height = (in_h + 2 * layer.padding - layer.kernel_h()) / layer.stride + 1;
  g.width = (in_w + 2 * layer.padding - layer.kernel_w()) / layer.stride + 1;
  if (in_h + 2 * layer.padding < layer.kernel_h() ||
      in_w + 2 * layer.padding < layer.kernel_w() || g.height < 1 || g.width < 1) {
    std::ostringstream os;
    os << "layer '" << layer.name << "' (kernel " << layer.kernel_h() << "x"
       << layer.kernel_w() << ", stride " << layer.stride << ", pad "
       << layer.padding << ") yields no output on input " << in_h << "x" << in_w;
    throw ShapeError(os.str());
  }
  return g;
}

namespace {

void check_input(const ConvLayer& layer, const Tensor4& input) {
  layer.validate();
  if (input.channels != layer.channel_count()) {
    std::ostringstream os;
    os << "input shape " << input.shape_str() << " has " << input.channels
       << " channels but layer '" << layer.name << "' weights "
       << layer.weights.shape_str() << " expect " << layer.channel_count();
    throw ShapeError(os.str());
  }
}

}  // namespace

Tensor4 conv_forward(const ConvLayer& layer, const Tensor4& input) {
  check_input(layer, input);
  const OutputGeometry g = output_geometry(layer, input.height, input.width);
  const auto& k = kernels::active();

  const int m_count = layer.kernel_count();
  const int n_ch = layer.channel_count();
  const int kh = layer.kernel_h(), kw = layer.kernel_w();
  const int stride = layer.stride, pad = layer.padding;
  const int in_h = input.height, in_w = input.width;

  Tensor4 out(input.count, m_count, g.height, g.width);
  for (int n = 0; n < input.count; ++n) {
    for (int m = 0; m < m_count; ++m) {
      float* out_plane = out.ptr(n, m, 0, 0);
      std::fill(out_plane, out_plane + size_t(g.height) * g.width, layer.bias[m]);
      for (int c = 0; c < n_ch; ++c) {
        const float* in_plane = input.ptr(n, c, 0, 0);
        for (int i = 0; i < kh; ++i) {
          for (int j = 0; j < kw; ++j) {
            const float w = layer.weights.at(m, c, i, j);
            if (w == 0.0f) continue;
            for (int oy = 0; oy < g.height; ++oy) {
              const int iy = oy * stride - pad + i;
              if (iy < 0 || iy >= in_h) continue;
              // valid ox range where ix = ox*stride - pad + j lands in [0, in_w)
              int ox0 = 0;
              if (pad - j > 0) ox0 = (pad - j + stride - 1) / stride;
              const int ix_max = in_w - 1 + pad - j;
              if (ix_max < 0) continue;
              const int ox1 = std::min(g.width - 1, ix_max / stride);
              if (ox1 < ox0) continue;
              const int ix0 = ox0 * stride - pad + j;
              float* out_row = out_plane + size_t(oy) * g.width + ox0;
              const float* in_row = in_plane + size_t(iy) * in_w + ix0;
              const size_t len = size_t(ox1 - ox0 + 1);
              if (stride == 1)
                k.axpy(w, in_row, out_row, len);
              else
                k.axpy_strided(w, in_row, size_t(stride), out_row, len);
            }
          }
        }
      }
    }
  }
  return out;
}

ColMatrix im2col(const Tensor4& input, const ConvLayer& layer) {
  check_input(layer, input);
  const OutputGeometry g = output_geometry(layer, input.height, input.width);
  const int kh = layer.kernel_h(), kw = layer.kernel_w();
  const int stride = layer.stride, pad = layer.padding;

  ColMatrix patches(input.channels * kh * kw,
                    input.count * g.height * g.width);
  for (int n = 0; n < input.count; ++n) {
    for (int oy = 0; oy < g.height; ++oy) {
      for (int ox = 0; ox < g.width; ++ox) {
        float* col = patches.col((n * g.height + oy) * g.width + ox);
        int r = 0;
        for (int c = 0; c < input.channels; ++c) {
          for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j, ++r) {
              const int iy = oy * stride - pad + i;
              const int ix = ox * stride - pad + j;
              col[r] = (iy >= 0 && iy < input.height && ix >= 0 && ix < input.width)
                           ? input.at(n, c, iy, ix)
                           : 0.0f;
            }
          }
        }
      }
    }
  }
  return patches;
}

ColMatrix weight_matrix(const ConvLayer& layer) {
  layer.validate();
  const int rows = layer.channel_count() * layer.kernel_h() * layer.kernel_w();
  ColMatrix wm(rows, layer.kernel_count());
  for (int m = 0; m < layer.kernel_count(); ++m) {
    float* col = wm.col(m);
    int r = 0;
    for (int c = 0; c < layer.channel_count(); ++c)
      for (int i = 0; i < layer.kernel_h(); ++i)
        for (int j = 0; j < layer.kernel_w(); ++j, ++r)
          col[r] = layer.weights.at(m, c, i, j);
  }
  return wm;
}

}  // namespace pqaccel
