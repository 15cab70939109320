/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#include "pqaccel/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pqaccel/kernels.hpp"
#include "pqaccel/rng.hpp"

namespace pqaccel {

namespace {

double sqdist_d(const float* a, const float* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double diff = double(a[i]) - double(b[i]);
    acc += diff * diff;
  }
  return acc;
}

ColMatrix kmeanspp_init(const ColMatrix& x, int k, Rng& rng) {
  const int d = x.rows, n = x.cols;
  ColMatrix cent(d, k);
  std::vector<double> dist2(n);

  int first = int(rng.uniform_index(size_t(n)));
  std::copy_n(x.col(first), d, cent.col(0));
  for (int i = 0; i < n; ++i) dist2[i] = sqdist_d(x.col(i), cent.col(0), d);

  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += dist2[i];
    int pick;
    if (total <= 0.0) {
      pick = int(rng.uniform_index(size_t(n)));  // duplicate-heavy input
    } else {
      double r = rng.uniform() * total;
      double run = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        run += dist2[i];
        if (r < run) {
          pick = i;
          break;
        }
      }
    }
    std::copy_n(x.col(pick), d, cent.col(c));
    for (int i = 0; i < n; ++i)
      dist2[i] = std::min(dist2[i], sqdist_d(x.col(i), cent.col(c), d));
  }
  return cent;
}

}  // namespace

KmeansResult kmeans(const ColMatrix& x, int k, uint32_t seed,
                    const KmeansOptions& options) {
  const int d = x.rows, n = x.cols;
  if (n < 1 || d < 1) throw ParamError("kmeans: input matrix must be non-empty");
  if (k < 1) throw ParamError("kmeans: k must be >= 1");
  if (k > n) {
    std::ostringstream os;
    os << "kmeans: k " << k << " exceeds column count " << n;
    throw ParamError(os.str());
  }
  if (options.tol && *options.tol < 0.0)
    throw ParamError("kmeans: tol must be >= 0");
  for (float v : x.data)
    if (!std::isfinite(v)) throw DataError("kmeans: non-finite input value");

  Rng rng(seed);
  KmeansResult res;
  if (options.init_centroids) {
    if (options.init_centroids->rows != d || options.init_centroids->cols != k)
      throw ParamError("kmeans: init centroids shape mismatch");
    res.centroids = *options.init_centroids;
  } else {
    res.centroids = kmeanspp_init(x, k, rng);
  }
  res.assignments.assign(n, 0);

  const auto& kern = kernels::active();
  auto assign_all = [&]() {
    for (int i = 0; i < n; ++i) {
      const float* xi = x.col(i);
      int best = 0;
      float best_d = kern.sqdist(xi, res.centroids.col(0), size_t(d));
      for (int c = 1; c < k; ++c) {
        float dist = kern.sqdist(xi, res.centroids.col(c), size_t(d));
        if (dist < best_d) {  // strict: ties keep the lowest index
          best_d = dist;
          best = c;
        }
      }
      res.assignments[i] = best;
    }
  };
  auto objective = [&]() {
    double obj = 0.0;
    for (int i = 0; i < n; ++i)
      obj += sqdist_d(x.col(i), res.centroids.col(res.assignments[i]), d);
    return obj;
  };

  assign_all();
  res.objective_history.push_back(objective());
  const double tol = options.tol ? *options.tol
                                 : 1e-6 * res.objective_history.front();

  std::vector<double> mean(size_t(d) * k);
  std::vector<int> counts(k);
  for (int it = 0; it < options.max_iter; ++it) {
    ColMatrix prev_centroids = res.centroids;
    std::vector<int32_t> prev_assign = res.assignments;

    // mean update in double
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      const float* xi = x.col(i);
      double* m = mean.data() + size_t(res.assignments[i]) * d;
      for (int r = 0; r < d; ++r) m[r] += xi[r];
      ++counts[res.assignments[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      const double inv = 1.0 / counts[c];
      float* cc = res.centroids.col(c);
      const double* m = mean.data() + size_t(c) * d;
      for (int r = 0; r < d; ++r) cc[r] = float(m[r] * inv);
    }

    // re-seed empty clusters from the worst-quantized columns
    std::vector<char> taken(n, 0);
    for (int c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      int worst = -1;
      double worst_err = -1.0;
      for (int i = 0; i < n; ++i) {
        if (taken[i]) continue;
        double e = sqdist_d(x.col(i), res.centroids.col(res.assignments[i]), d);
        if (e > worst_err) {
          worst_err = e;
          worst = i;
        }
      }
      if (worst < 0) break;
      taken[worst] = 1;
      std::copy_n(x.col(worst), d, res.centroids.col(c));
    }

    assign_all();
    const double obj = objective();
    const double prev = res.objective_history.back();
    if (obj > prev) {
      // float rounding at convergence; keep the better iterate
      res.centroids = std::move(prev_centroids);
      res.assignments = std::move(prev_assign);
      break;
    }
    res.objective_history.push_back(obj);
    if (prev - obj < tol) break;
    if (res.assignments == prev_assign) break;
  }
  return res;
}

VqCodebook vq_quantize(const ColMatrix& w, int k_vq, uint32_t seed) {
  KmeansResult km = kmeans(w, k_vq, seed);
  VqCodebook cb;
  cb.dim = w.rows;
  cb.codewords = k_vq;
  cb.centroids = std::move(km.centroids);
  cb.assignments = std::move(km.assignments);
  return cb;
}

ColMatrix vq_reconstruction(const VqCodebook& cb) {
  ColMatrix out(cb.dim, int(cb.assignments.size()));
  for (int i = 0; i < out.cols; ++i)
    std::copy_n(cb.centroids.col(cb.assignments[i]), cb.dim, out.col(i));
  return out;
}

double vq_error_sq(const VqCodebook& cb, const ColMatrix& w) {
  if (w.rows != cb.dim || w.cols != int(cb.assignments.size()))
    throw ShapeError("vq_error_sq: matrix does not match codebook geometry");
  double err = 0.0;
  for (int i = 0; i < w.cols; ++i)
    err += sqdist_d(w.col(i), cb.centroids.col(cb.assignments[i]), cb.dim);
  return err;
}

}  // namespace pqaccel
