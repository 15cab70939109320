/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
// Independent reference implementations used as test oracles. These stay
// deliberately naive (plain nested loops, no shared kernels with the
// library) so they check the production path rather than mirror it.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "pqaccel/common.hpp"
#include "pqaccel/metrics.hpp"
#include "pqaccel/rng.hpp"
#include "pqaccel/tensor.hpp"

namespace oracles {

/// Six-nested-loop cross-correlation, f32 accumulation. Optionally counts
/// every multiply it performs.
inline pqaccel::Tensor4 naive_conv(const pqaccel::ConvLayer& layer,
                                   const pqaccel::Tensor4& input,
                                   uint64_t* multiplies = nullptr) {
  const int out_h =
      (input.height + 2 * layer.padding - layer.kernel_h()) / layer.stride + 1;
  const int out_w =
      (input.width + 2 * layer.padding - layer.kernel_w()) / layer.stride + 1;
  pqaccel::Tensor4 out(input.count, layer.kernel_count(), out_h, out_w);
  for (int n = 0; n < input.count; ++n)
    for (int m = 0; m < layer.kernel_count(); ++m)
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          float acc = layer.bias[m];
          for (int c = 0; c < layer.channel_count(); ++c)
            for (int i = 0; i < layer.kernel_h(); ++i)
              for (int j = 0; j < layer.kernel_w(); ++j) {
                const int iy = oy * layer.stride - layer.padding + i;
                const int ix = ox * layer.stride - layer.padding + j;
                const float v = (iy >= 0 && iy < input.height && ix >= 0 &&
                                 ix < input.width)
                                    ? input.at(n, c, iy, ix)
                                    : 0.0f;
                acc += layer.weights.at(m, c, i, j) * v;
                if (multiplies != nullptr) ++*multiplies;
              }
          out.at(n, m, oy, ox) = acc;
        }
  return out;
}

/// max |a-b| relative to the larger magnitude scale of the two arrays.
inline double max_rel_error(const std::vector<float>& a,
                            const std::vector<float>& b) {
  double scale = 0.0;
  for (float v : a) scale = std::max(scale, std::abs(double(v)));
  for (float v : b) scale = std::max(scale, std::abs(double(v)));
  if (scale == 0.0) scale = 1.0;
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(double(a[i]) - double(b[i])) / scale);
  return worst;
}

inline double sqdist(const float* a, const float* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = double(a[i]) - double(b[i]);
    acc += d * d;
  }
  return acc;
}

/// Textbook Lloyd iterations from explicit initial centroids, all double.
struct RefKmeans {
  std::vector<std::vector<double>> centroids;  // k x d
  std::vector<int> assignments;
  double objective = 0.0;
};

inline RefKmeans reference_kmeans(const pqaccel::ColMatrix& x,
                                  const pqaccel::ColMatrix& init, int iters) {
  const int d = x.rows, n = x.cols, k = init.cols;
  RefKmeans r;
  r.centroids.assign(k, std::vector<double>(d));
  for (int c = 0; c < k; ++c)
    for (int i = 0; i < d; ++i) r.centroids[c][i] = init.at(i, c);
  r.assignments.assign(n, 0);
  for (int it = 0; it < iters; ++it) {
    for (int col = 0; col < n; ++col) {
      int best = 0;
      double best_d = 1e300;
      for (int c = 0; c < k; ++c) {
        double dist = 0.0;
        for (int i = 0; i < d; ++i) {
          const double diff = double(x.at(i, col)) - r.centroids[c][i];
          dist += diff * diff;
        }
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      r.assignments[col] = best;
    }
    std::vector<std::vector<double>> mean(k, std::vector<double>(d, 0.0));
    std::vector<int> counts(k, 0);
    for (int col = 0; col < n; ++col) {
      for (int i = 0; i < d; ++i) mean[r.assignments[col]][i] += x.at(i, col);
      ++counts[r.assignments[col]];
    }
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0)
        for (int i = 0; i < d; ++i) r.centroids[c][i] = mean[c][i] / counts[c];
  }
  r.objective = 0.0;
  for (int col = 0; col < n; ++col) {
    double dist = 0.0;
    for (int i = 0; i < d; ++i) {
      const double diff = double(x.at(i, col)) - r.centroids[r.assignments[col]][i];
      dist += diff * diff;
    }
    r.objective += dist;
  }
  return r;
}

/// Optimal 2-cluster objective by enumerating every 2-partition.
inline double best_two_partition_objective(const pqaccel::ColMatrix& x) {
  const int n = x.cols, d = x.rows;
  double best = 1e300;
  for (int mask = 1; mask < (1 << n) - 1; ++mask) {
    std::vector<double> m0(d, 0.0), m1(d, 0.0);
    int c0 = 0, c1 = 0;
    for (int i = 0; i < n; ++i) {
      const bool in1 = (mask >> i) & 1;
      for (int r = 0; r < d; ++r) (in1 ? m1 : m0)[r] += x.at(r, i);
      (in1 ? c1 : c0) += 1;
    }
    for (int r = 0; r < d; ++r) {
      m0[r] /= c0;
      m1[r] /= c1;
    }
    double obj = 0.0;
    for (int i = 0; i < n; ++i) {
      const bool in1 = (mask >> i) & 1;
      for (int r = 0; r < d; ++r) {
        const double diff = double(x.at(r, i)) - (in1 ? m1 : m0)[r];
        obj += diff * diff;
      }
    }
    best = std::min(best, obj);
  }
  return best;
}

/// Least-squares residual of x on an explicit atom support (normal
/// equations with Gaussian elimination, double).
inline double support_residual(const pqaccel::ColMatrix& dict,
                               const std::vector<int>& support,
                               const std::vector<double>& x) {
  const int d = dict.rows, s = int(support.size());
  std::vector<std::vector<double>> g(s, std::vector<double>(s + 1, 0.0));
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b < s; ++b)
      for (int i = 0; i < d; ++i)
        g[a][b] += double(dict.at(i, support[a])) * dict.at(i, support[b]);
    for (int i = 0; i < d; ++i) g[a][s] += double(dict.at(i, support[a])) * x[i];
  }
  for (int col = 0; col < s; ++col) {  // partial pivoting
    int piv = col;
    for (int row = col + 1; row < s; ++row)
      if (std::abs(g[row][col]) > std::abs(g[piv][col])) piv = row;
    std::swap(g[col], g[piv]);
    if (std::abs(g[col][col]) < 1e-12) continue;
    for (int row = 0; row < s; ++row) {
      if (row == col) continue;
      const double f = g[row][col] / g[col][col];
      for (int cc = col; cc <= s; ++cc) g[row][cc] -= f * g[col][cc];
    }
  }
  std::vector<double> coef(s, 0.0);
  for (int i = 0; i < s; ++i)
    if (std::abs(g[i][i]) >= 1e-12) coef[i] = g[i][s] / g[i][i];
  double res = 0.0;
  for (int i = 0; i < d; ++i) {
    double v = x[i];
    for (int a = 0; a < s; ++a) v -= coef[a] * dict.at(i, support[a]);
    res += v * v;
  }
  return res;
}

/// Exhaustive search over all size-rho supports; returns the best one.
inline std::vector<int> best_support(const pqaccel::ColMatrix& dict, int rho,
                                     const std::vector<double>& x) {
  const int n_atoms = dict.cols;
  std::vector<int> support(rho), best;
  double best_res = 1e300;
  std::vector<int> idx(rho);
  for (int i = 0; i < rho; ++i) idx[i] = i;
  while (true) {
    const double res = support_residual(dict, idx, x);
    if (res < best_res) {
      best_res = res;
      best = idx;
    }
    int pos = rho - 1;
    while (pos >= 0 && idx[pos] == n_atoms - rho + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int i = pos + 1; i < rho; ++i) idx[i] = idx[i - 1] + 1;
  }
  return best;
}

/// Maximum achievable true-positive count under the same TP rule
/// (IOU > thr and class equality), by exhaustive assignment enumeration.
inline int best_assignment_tp(const std::vector<pqaccel::Box>& preds,
                              const std::vector<pqaccel::Box>& gts, double thr) {
  const int np = int(preds.size()), ng = int(gts.size());
  std::vector<std::vector<char>> ok(np, std::vector<char>(ng, 0));
  for (int p = 0; p < np; ++p)
    for (int g = 0; g < ng; ++g)
      ok[p][g] = preds[p].cls == gts[g].cls && pqaccel::iou(preds[p], gts[g]) > thr;
  // depth-first over predictions with a used-GT mask
  int best = 0;
  std::vector<char> used(ng, 0);
  std::function<void(int, int)> rec = [&](int p, int tp) {
    best = std::max(best, tp);
    if (p == np) return;
    rec(p + 1, tp);
    for (int g = 0; g < ng; ++g)
      if (!used[g] && ok[p][g]) {
        used[g] = 1;
        rec(p + 1, tp + 1);
        used[g] = 0;
      }
  };
  rec(0, 0);
  return best;
}

inline pqaccel::Tensor4 random_tensor(int n, int c, int h, int w, pqaccel::Rng& rng,
                                      float scale = 1.0f) {
  pqaccel::Tensor4 t(n, c, h, w);
  for (float& v : t.data) v = rng.normal_float() * scale;
  return t;
}

inline pqaccel::ConvLayer random_layer(const std::string& name, int m, int n,
                                       int kh, int kw, int stride, int pad,
                                       pqaccel::Rng& rng) {
  pqaccel::ConvLayer l;
  l.name = name;
  l.weights = random_tensor(m, n, kh, kw, rng, 0.5f);
  l.bias.resize(size_t(m));
  for (float& b : l.bias) b = rng.normal_float() * 0.1f;
  l.stride = stride;
  l.padding = pad;
  return l;
}

inline pqaccel::ColMatrix random_matrix(int rows, int cols, pqaccel::Rng& rng,
                                        float scale = 1.0f) {
  pqaccel::ColMatrix m(rows, cols);
  for (float& v : m.data) v = rng.normal_float() * scale;
  return m;
}

}  // namespace oracles
