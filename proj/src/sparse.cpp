/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#include "pqaccel/sparse.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "pqaccel/kernels.hpp"
#include "pqaccel/kmeans.hpp"
#include "pqaccel/rng.hpp"

namespace pqaccel {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd to_vecd(const float* x, int n) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = x[i];
  return v;
}

MatrixXd to_matd(const ColMatrix& m) {
  MatrixXd out(m.rows, m.cols);
  for (int c = 0; c < m.cols; ++c)
    for (int r = 0; r < m.rows; ++r) out(r, c) = m.at(r, c);
  return out;
}

/// Least squares of x onto the atom subset; min-norm (pseudo-inverse)
/// solution when the support is rank-deficient.
VectorXd solve_support(const MatrixXd& dict, const std::vector<int32_t>& support,
                       const VectorXd& x, bool* rank_deficient) {
  const int s = int(support.size());
  MatrixXd sub(dict.rows(), s);
  for (int i = 0; i < s; ++i) sub.col(i) = dict.col(support[i]);
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod;
  cod.setThreshold(1e-10);  // near-parallel supports count as deficient
  cod.compute(sub);
  if (cod.rank() < s) *rank_deficient = true;
  return cod.solve(x);
}

OmpResult omp_impl(const MatrixXd& dict, const VectorXd& x, int rho) {
  const int d = int(dict.rows());
  const int n_atoms = int(dict.cols());
  OmpResult res;
  VectorXd residual = x;
  const double x_scale = 1.0 + x.norm();
  std::vector<char> selected(n_atoms, 0);

  for (int step = 0; step < rho; ++step) {
    int best = -1;
    double best_corr = 0.0;
    for (int j = 0; j < n_atoms; ++j) {
      if (selected[j]) continue;
      double corr = std::abs(dict.col(j).dot(residual));
      if (corr > best_corr) {  // strict: ties keep the lowest index
        best_corr = corr;
        best = j;
      }
    }
    if (best < 0 || best_corr <= 1e-12 * x_scale) {
      // residual orthogonal to every unselected atom; no progress possible
      res.degenerate = true;
      break;
    }
    selected[best] = 1;
    res.support.push_back(best);

    VectorXd gamma = solve_support(dict, res.support, x, &res.rank_deficient);
    residual = x;
    for (size_t i = 0; i < res.support.size(); ++i)
      residual -= gamma[int(i)] * dict.col(res.support[i]);
    res.coeffs.assign(gamma.data(), gamma.data() + gamma.size());

    if (residual.norm() <= 1e-12 * x_scale) {
      res.zero_residual = int(res.support.size()) < rho;
      break;
    }
  }
  (void)d;
  return res;
}

}  // namespace

OmpResult omp(const ColMatrix& dict, const float* x, int rho) {
  if (dict.rows < 1 || dict.cols < 1)
    throw ParamError("omp: dictionary must be non-empty");
  if (rho < 1 || rho > std::min(dict.rows, dict.cols)) {
    std::ostringstream os;
    os << "omp: rho " << rho << " out of range [1, min(d=" << dict.rows
       << ", L=" << dict.cols << ")]";
    throw ParamError(os.str());
  }
  for (int j = 0; j < dict.cols; ++j) {
    double nrm = 0.0;
    for (int r = 0; r < dict.rows; ++r) nrm += double(dict.at(r, j)) * dict.at(r, j);
    if (std::abs(std::sqrt(nrm) - 1.0) > 1e-3) {
      std::ostringstream os;
      os << "omp: atom " << j << " is not unit-norm (|.| = " << std::sqrt(nrm) << ")";
      throw ParamError(os.str());
    }
  }
  return omp_impl(to_matd(dict), to_vecd(x, dict.rows), rho);
}

namespace {

// Internal learning state: dictionary and coefficients in double, converted
// to the f32 codebook only on output.
struct Lambda {
  std::vector<int32_t> idx;  // rho slots per codeword
  std::vector<double> val;
  std::vector<uint8_t> nnz;
  int rho = 0;

  void set(int j, const OmpResult& r) {
    for (int s = 0; s < rho; ++s) {
      bool have = s < int(r.support.size());
      idx[size_t(j) * rho + s] = have ? r.support[s] : 0;
      val[size_t(j) * rho + s] = have ? r.coeffs[s] : 0.0;
    }
    nnz[j] = uint8_t(r.support.size());
  }
};

VectorXd codeword_col(const MatrixXd& dict, const Lambda& lam, int j) {
  VectorXd g = VectorXd::Zero(dict.rows());
  for (int s = 0; s < lam.rho; ++s)
    g += lam.val[size_t(j) * lam.rho + s] * dict.col(lam.idx[size_t(j) * lam.rho + s]);
  return g;
}

MatrixXd codewords_of(const MatrixXd& dict, const Lambda& lam, int k) {
  MatrixXd g(dict.rows(), k);
  for (int j = 0; j < k; ++j) g.col(j) = codeword_col(dict, lam, j);
  return g;
}

double objective_of(const MatrixXd& w, const MatrixXd& codewords,
                    const std::vector<int32_t>& assign) {
  double obj = 0.0;
  for (int i = 0; i < int(w.cols()); ++i)
    obj += (w.col(i) - codewords.col(assign[i])).squaredNorm();
  return obj;
}

void assign_nearest(const MatrixXd& w, const MatrixXd& codewords,
                    std::vector<int32_t>& assign) {
  for (int i = 0; i < int(w.cols()); ++i) {
    int best = 0;
    double best_d = (w.col(i) - codewords.col(0)).squaredNorm();
    for (int j = 1; j < int(codewords.cols()); ++j) {
      double dist = (w.col(i) - codewords.col(j)).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = j;
      }
    }
    assign[i] = best;
  }
}

}  // namespace

DlLearnResult dl_learn(const ColMatrix& w, int atoms, int codewords, int rho,
                       uint32_t seed, const DlOptions& options) {
  const int d = w.rows, n = w.cols;
  if (n < 1 || d < 1) throw ParamError("dl_learn: input matrix must be non-empty");
  if (atoms < 1 || codewords < 1) throw ParamError("dl_learn: atoms and codewords must be >= 1");
  if (atoms >= codewords) {
    std::ostringstream os;
    os << "dl_learn: atoms (" << atoms << ") must be < codewords (" << codewords << ")";
    throw ParamError(os.str());
  }
  if (rho < 1 || rho > std::min(d, atoms)) {
    std::ostringstream os;
    os << "dl_learn: rho " << rho << " out of range [1, min(d=" << d
       << ", L=" << atoms << ")]";
    throw ParamError(os.str());
  }
  if (codewords > n) {
    std::ostringstream os;
    os << "dl_learn: codewords " << codewords << " exceeds column count " << n;
    throw ParamError(os.str());
  }

  const MatrixXd wd = to_matd(w);

  // dictionary warm start: normalized k-means centroids (K = atoms)
  MatrixXd dict(d, atoms);
  if (options.init_dict) {
    if (options.init_dict->rows != d || options.init_dict->cols != atoms)
      throw ParamError("dl_learn: init dictionary shape mismatch");
    dict = to_matd(*options.init_dict);
  } else {
    int k_init = std::min(atoms, n);
    KmeansResult km = kmeans(w, k_init, uint32_t(Rng::derive(seed, 1)));
    for (int j = 0; j < atoms; ++j)
      dict.col(j) = to_vecd(km.centroids.col(j % k_init), d);
  }
  Rng reseed_rng(uint32_t(Rng::derive(seed, 2)));
  for (int j = 0; j < atoms; ++j) {
    double nrm = dict.col(j).norm();
    if (nrm <= 1e-12) {
      for (int r = 0; r < d; ++r) dict(r, j) = reseed_rng.normal();
      nrm = dict.col(j).norm();
    }
    dict.col(j) /= nrm;
  }

  // coefficient warm start: OMP of k-means centroids (K = codewords) onto D
  Lambda lam;
  lam.rho = rho;
  lam.idx.assign(size_t(codewords) * rho, 0);
  lam.val.assign(size_t(codewords) * rho, 0.0);
  lam.nnz.assign(codewords, 0);
  {
    KmeansResult km = kmeans(w, codewords, seed);
    VectorXd target(d);
    for (int j = 0; j < codewords; ++j) {
      target = to_vecd(km.centroids.col(j), d);
      lam.set(j, omp_impl(dict, target, rho));
    }
  }

  DlLearnResult res;
  std::vector<int32_t> assign(n, 0);
  MatrixXd cw = codewords_of(dict, lam, codewords);
  assign_nearest(wd, cw, assign);
  res.initial_objective = objective_of(wd, cw, assign);

  double obj = res.initial_objective;

  for (int it = 0; it < options.iters; ++it) {
    const double obj_at_start = obj;

    // (1) assignment
    cw = codewords_of(dict, lam, codewords);
    assign_nearest(wd, cw, assign);
    obj = objective_of(wd, cw, assign);
    res.sub_step_history.push_back(obj);

    // (2) per-codeword OMP refresh against the member mean, guarded
    std::vector<std::vector<int>> members(codewords);
    for (int i = 0; i < n; ++i) members[assign[i]].push_back(i);
    std::vector<char> taken(n, 0);
    for (int j = 0; j < codewords; ++j) {
      if (members[j].empty()) {
        // re-seed a dead codeword from the worst-reconstructed column
        int worst = -1;
        double worst_err = -1.0;
        for (int i = 0; i < n; ++i) {
          if (taken[i]) continue;
          double e = (wd.col(i) - cw.col(assign[i])).squaredNorm();
          if (e > worst_err) {
            worst_err = e;
            worst = i;
          }
        }
        if (worst < 0) continue;
        taken[worst] = 1;
        OmpResult r = omp_impl(dict, wd.col(worst), rho);
        res.any_rank_deficient |= r.rank_deficient;
        lam.set(j, r);
        cw.col(j) = codeword_col(dict, lam, j);
        continue;
      }
      VectorXd mean = VectorXd::Zero(d);
      for (int i : members[j]) mean += wd.col(i);
      mean /= double(members[j].size());

      OmpResult r = omp_impl(dict, mean, rho);
      res.any_rank_deficient |= r.rank_deficient;
      VectorXd cand = VectorXd::Zero(d);
      for (size_t s = 0; s < r.support.size(); ++s)
        cand += r.coeffs[s] * dict.col(r.support[s]);

      double err_old = 0.0, err_new = 0.0;
      for (int i : members[j]) {
        err_old += (wd.col(i) - cw.col(j)).squaredNorm();
        err_new += (wd.col(i) - cand).squaredNorm();
      }
      if (err_new <= err_old) {
        lam.set(j, r);
        cw.col(j) = cand;
      }
    }
    obj = objective_of(wd, cw, assign);
    res.sub_step_history.push_back(obj);

    // (3) dictionary update: least squares of W against Lambda*Gamma,
    // then atom re-normalization with inverse coefficient rescaling
    {
      std::vector<int> counts(codewords, 0);
      for (int i = 0; i < n; ++i) ++counts[assign[i]];
      MatrixXd lam_dense = MatrixXd::Zero(atoms, codewords);
      for (int j = 0; j < codewords; ++j)
        for (int s = 0; s < rho; ++s)
          lam_dense(lam.idx[size_t(j) * rho + s], j) += lam.val[size_t(j) * rho + s];

      // gram = (Lambda Gamma)(Lambda Gamma)^T, rhs = W (Lambda Gamma)^T
      MatrixXd gram = MatrixXd::Zero(atoms, atoms);
      MatrixXd rhs = MatrixXd::Zero(d, atoms);
      MatrixXd col_sums = MatrixXd::Zero(d, codewords);
      for (int i = 0; i < n; ++i) col_sums.col(assign[i]) += wd.col(i);
      for (int j = 0; j < codewords; ++j) {
        if (counts[j] == 0) continue;
        gram += double(counts[j]) * lam_dense.col(j) * lam_dense.col(j).transpose();
        rhs += col_sums.col(j) * lam_dense.col(j).transpose();
      }

      Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(gram);
      MatrixXd dict_cand = cod.solve(rhs.transpose()).transpose();

      bool ok = dict_cand.allFinite();
      Lambda lam_cand = lam;
      if (ok) {
        for (int l = 0; l < atoms && ok; ++l) {
          double nrm = dict_cand.col(l).norm();
          bool used = false;
          for (int j = 0; j < codewords && !used; ++j)
            for (int s = 0; s < rho; ++s)
              if (lam.idx[size_t(j) * rho + s] == l &&
                  lam.val[size_t(j) * rho + s] != 0.0 && counts[j] > 0) {
                used = true;
                break;
              }
          if (nrm <= 1e-12) {
            if (used) {
              ok = false;  // degenerate solve; keep the previous dictionary
            } else {
              dict_cand.col(l) = dict.col(l);  // unused atom: keep as-is
            }
          } else {
            dict_cand.col(l) /= nrm;
            for (int j = 0; j < codewords; ++j)
              for (int s = 0; s < rho; ++s)
                if (lam_cand.idx[size_t(j) * rho + s] == l)
                  lam_cand.val[size_t(j) * rho + s] *= nrm;
          }
        }
      }
      if (ok) {
        MatrixXd cw_cand = codewords_of(dict_cand, lam_cand, codewords);
        double obj_cand = objective_of(wd, cw_cand, assign);
        if (obj_cand <= obj) {
          dict = std::move(dict_cand);
          lam = std::move(lam_cand);
          cw = std::move(cw_cand);
          obj = obj_cand;
        }
      }
    }
    res.sub_step_history.push_back(obj);
    res.objective_history.push_back(obj);

    if (obj_at_start - obj < options.rel_tol * std::max(1e-300, res.initial_objective))
      break;
  }

  DlCodebook& cb = res.codebook;
  cb.dim = d;
  cb.atoms = atoms;
  cb.codewords = codewords;
  cb.rho = rho;
  cb.dict = ColMatrix(d, atoms);
  for (int j = 0; j < atoms; ++j)
    for (int r = 0; r < d; ++r) cb.dict.at(r, j) = float(dict(r, j));
  cb.lambda_idx = lam.idx;
  cb.lambda_val.resize(lam.val.size());
  for (size_t i = 0; i < lam.val.size(); ++i) cb.lambda_val[i] = float(lam.val[i]);
  cb.lambda_nnz = lam.nnz;
  cb.assignments = assign;
  return res;
}

ColMatrix dl_codeword_matrix(const DlCodebook& cb) {
  const auto& kern = kernels::active();
  ColMatrix g(cb.dim, cb.codewords);
  for (int j = 0; j < cb.codewords; ++j) {
    float* col = g.col(j);
    for (int s = 0; s < cb.rho; ++s)
      kern.axpy(cb.lambda_values(j)[s], cb.dict.col(cb.lambda_indices(j)[s]), col,
                size_t(cb.dim));
  }
  return g;
}

ColMatrix dl_reconstruction(const DlCodebook& cb) {
  ColMatrix g = dl_codeword_matrix(cb);
  ColMatrix out(cb.dim, int(cb.assignments.size()));
  for (int i = 0; i < out.cols; ++i)
    std::copy_n(g.col(cb.assignments[i]), cb.dim, out.col(i));
  return out;
}

double dl_error_sq(const DlCodebook& cb, const ColMatrix& w) {
  if (w.rows != cb.dim || w.cols != int(cb.assignments.size()))
    throw ShapeError("dl_error_sq: matrix does not match codebook geometry");
  ColMatrix g = dl_codeword_matrix(cb);
  double err = 0.0;
  for (int i = 0; i < w.cols; ++i) {
    const float* a = w.col(i);
    const float* b = g.col(cb.assignments[i]);
    for (int r = 0; r < cb.dim; ++r) {
      double diff = double(a[r]) - double(b[r]);
      err += diff * diff;
    }
  }
  return err;
}

}  // namespace pqaccel
