#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "pqaccel/kmeans.hpp"
#include "pqaccel/sparse.hpp"

using namespace pqaccel;

namespace {

ColMatrix random_unit_atoms(int d, int l, Rng& rng) {
  ColMatrix dict = oracles::random_matrix(d, l, rng);
  for (int c = 0; c < l; ++c) {
    double nrm = 0.0;
    for (int r = 0; r < d; ++r) nrm += double(dict.at(r, c)) * dict.at(r, c);
    nrm = std::sqrt(nrm);
    for (int r = 0; r < d; ++r) dict.at(r, c) = float(dict.at(r, c) / nrm);
  }
  return dict;
}

double residual_dot_atom(const ColMatrix& dict, const std::vector<float>& x,
                         const OmpResult& r, int atom) {
  std::vector<double> residual(x.begin(), x.end());
  for (size_t s = 0; s < r.support.size(); ++s)
    for (int row = 0; row < dict.rows; ++row)
      residual[row] -= r.coeffs[s] * dict.at(row, r.support[s]);
  double dot = 0.0;
  for (int row = 0; row < dict.rows; ++row)
    dot += residual[row] * dict.at(row, atom);
  return dot;
}

}  // namespace

TEST_CASE("omp recovers a single atom exactly") {
  Rng rng(3);
  ColMatrix dict = random_unit_atoms(6, 10, rng);
  std::vector<float> x(6);
  std::copy_n(dict.col(4), 6, x.begin());

  OmpResult r = omp(dict, x.data(), 1);
  REQUIRE(r.support.size() == 1);
  CHECK(r.support[0] == 4);
  CHECK(r.coeffs[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.zero_residual == false);  // rho was reached, not cut short
}

TEST_CASE("omp flags an input orthogonal to every atom") {
  // atoms live in the first two coordinates, x in the third
  ColMatrix dict(3, 2);
  dict.at(0, 0) = 1.0f;
  dict.at(1, 1) = 1.0f;
  std::vector<float> x = {0.0f, 0.0f, 2.0f};

  OmpResult r = omp(dict, x.data(), 2);
  CHECK(r.degenerate);
  CHECK(r.support.empty());
  CHECK(r.coeffs.empty());
}

namespace {

/// d=4, L=6 dictionary with controlled coherence: a random rotation of an
/// orthonormal basis plus two fixed mixing atoms. Rotations preserve inner
/// products, so every seeded instance keeps the same recovery margin.
ColMatrix rotated_frame_dict(Rng& rng) {
  // Gram-Schmidt on random vectors gives the rotation
  double q[4][4];
  for (auto& row : q)
    for (double& v : row) v = rng.normal();
  for (int c = 0; c < 4; ++c) {
    for (int prev = 0; prev < c; ++prev) {
      double dot = 0;
      for (int r = 0; r < 4; ++r) dot += q[c][r] * q[prev][r];
      for (int r = 0; r < 4; ++r) q[c][r] -= dot * q[prev][r];
    }
    double nrm = 0;
    for (int r = 0; r < 4; ++r) nrm += q[c][r] * q[c][r];
    nrm = std::sqrt(nrm);
    for (int r = 0; r < 4; ++r) q[c][r] /= nrm;
  }
  const double frame[6][4] = {{1, 0, 0, 0},          {0, 1, 0, 0},
                              {0, 0, 1, 0},          {0, 0, 0, 1},
                              {.5, .5, .5, .5},      {.5, -.5, .5, -.5}};
  ColMatrix dict(4, 6);
  for (int a = 0; a < 6; ++a)
    for (int r = 0; r < 4; ++r) {
      double v = 0;
      for (int b = 0; b < 4; ++b) v += q[b][r] * frame[a][b];
      dict.at(r, a) = float(v);
    }
  return dict;
}

}  // namespace

TEST_CASE("omp support matches exhaustive search on 2-sparse inputs") {
  for (uint32_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    ColMatrix dict = rotated_frame_dict(rng);
    const int i = int(rng.uniform_index(4));  // orthogonal subset
    int j = int(rng.uniform_index(4));
    while (j == i) j = int(rng.uniform_index(4));
    const double ci = (rng.uniform() < 0.5 ? -1.0 : 1.0) * 1.0;
    const double cj = (rng.uniform() < 0.5 ? -1.0 : 1.0) * 0.6;
    const double sigma = 0.01;  // coefficients are >= 3x the noise scale

    std::vector<float> x(4);
    std::vector<double> xd(4);
    for (int row = 0; row < 4; ++row) {
      xd[row] = ci * dict.at(row, i) + cj * dict.at(row, j) + sigma * rng.normal();
      x[row] = float(xd[row]);
    }
    std::vector<int> want = oracles::best_support(dict, 2, xd);
    OmpResult r = omp(dict, x.data(), 2);
    REQUIRE(r.support.size() == 2);
    std::set<int> got(r.support.begin(), r.support.end());
    CHECK(got == std::set<int>(want.begin(), want.end()));
  }
}

TEST_CASE("omp residual is orthogonal to the selected atoms") {
  for (uint32_t seed = 0; seed < 25; ++seed) {
    Rng rng(200 + seed);
    ColMatrix dict = random_unit_atoms(8, 16, rng);
    std::vector<float> x(8);
    for (float& v : x) v = rng.normal_float();

    OmpResult r = omp(dict, x.data(), 4);
    CHECK(r.support.size() == 4);
    for (int atom : r.support)
      CHECK(std::abs(residual_dot_atom(dict, x, r, atom)) <= 1e-8);
  }
}

TEST_CASE("omp parameter errors") {
  Rng rng(5);
  ColMatrix dict = random_unit_atoms(4, 6, rng);
  std::vector<float> x(4, 1.0f);
  CHECK_THROWS_AS(omp(dict, x.data(), 0), ParamError);
  CHECK_THROWS_AS(omp(dict, x.data(), 5), ParamError);  // > min(d, L) = 4
  ColMatrix bad = dict;
  bad.at(0, 0) *= 3.0f;  // not unit norm
  CHECK_THROWS_AS(omp(bad, x.data(), 2), ParamError);
}

TEST_CASE("omp flags a rank-deficient support and stays finite") {
  // two near-parallel atoms: the second still carries enough correlation
  // with the residual to be selected, but the support Gram is singular at
  // the solver's rank threshold
  const double eps = 1e-11;
  ColMatrix dict(3, 2);
  dict.at(0, 0) = 1.0f;
  const double nrm = std::sqrt(1.0 + eps * eps);
  dict.at(0, 1) = float(1.0 / nrm);
  dict.at(1, 1) = float(eps / nrm);
  std::vector<float> x = {1.0f, 0.3f, 0.0f};

  OmpResult r = omp(dict, x.data(), 2);
  REQUIRE(r.support.size() == 2);
  CHECK(r.rank_deficient);
  for (double c : r.coeffs) CHECK(std::isfinite(c));
}

TEST_CASE("omp flags mid-way orthogonality without padding the support") {
  // atoms span only the first two coordinates; rho asks for three
  ColMatrix dict(4, 4);
  dict.at(0, 0) = 1.0f;
  dict.at(1, 1) = 1.0f;
  dict.at(0, 2) = dict.at(1, 2) = float(std::sqrt(0.5));
  dict.at(0, 3) = float(std::sqrt(0.5));
  dict.at(1, 3) = -float(std::sqrt(0.5));
  std::vector<float> x = {0.8f, -0.4f, 0.7f, 0.0f};  // third coord unreachable

  OmpResult r = omp(dict, x.data(), 3);
  CHECK(r.degenerate);
  CHECK(r.support.size() == 2);
}

TEST_CASE("dl_learn: realizable model reaches zero error from the true atoms") {
  Rng rng(7);
  const int d = 6, l = 4, k = 8, rho = 2, n = 64;
  ColMatrix dict = random_unit_atoms(d, l, rng);

  // k distinct codewords, each a combination of rho known atoms
  ColMatrix codewords(d, k);
  for (int j = 0; j < k; ++j) {
    int a = j % l, b = (j + 1) % l;
    const float ca = 1.0f + 0.25f * float(j);
    const float cb = 0.5f;
    for (int r = 0; r < d; ++r)
      codewords.at(r, j) = ca * dict.at(r, a) + cb * dict.at(r, b);
  }
  ColMatrix w(d, n);
  for (int c = 0; c < n; ++c) std::copy_n(codewords.col(c % k), d, w.col(c));

  DlOptions opts;
  opts.init_dict = dict;
  opts.iters = 20;
  DlLearnResult res = dl_learn(w, l, k, rho, 11, opts);
  double w_norm = 0.0;
  for (float v : w.data) w_norm += double(v) * v;
  CHECK(dl_error_sq(res.codebook, w) <= 1e-8 * w_norm);
}

TEST_CASE("dl_learn with rho = d and an orthonormal dictionary matches vq") {
  Rng rng(13);
  const int d = 4, k = 16, n = 64;
  ColMatrix w = oracles::random_matrix(d, n, rng);

  ColMatrix eye(d, d);
  for (int i = 0; i < d; ++i) eye.at(i, i) = 1.0f;

  const uint32_t seed = 21;
  VqCodebook vq = vq_quantize(w, k, seed);
  DlOptions opts;
  opts.init_dict = eye;
  DlLearnResult res = dl_learn(w, d, k, d, seed, opts);

  CHECK(dl_error_sq(res.codebook, w) <= vq_error_sq(vq, w) + 1e-6);
}

TEST_CASE("dl_learn on a noisy generative model reaches the noise floor") {
  Rng rng(17);
  const int d = 8, rho = 3, l = 8, k = 16, n = 160;
  const double sigma = 0.01;

  ColMatrix basis = random_unit_atoms(d, rho, rng);
  ColMatrix prototypes(d, k);
  for (int j = 0; j < k; ++j) {
    double coeff[8];
    for (int b = 0; b < rho; ++b)
      coeff[b] = (0.5 + rng.uniform()) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    for (int r = 0; r < d; ++r) {
      double v = 0.0;
      for (int b = 0; b < rho; ++b) v += coeff[b] * basis.at(r, b);
      prototypes.at(r, j) = float(v);
    }
  }
  ColMatrix w(d, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < d; ++r)
      w.at(r, c) = prototypes.at(r, c % k) + float(sigma * rng.normal());

  DlLearnResult res = dl_learn(w, l, k, rho, 23);
  double w_norm = 0.0;
  for (float v : w.data) w_norm += double(v) * v;
  const double rel = std::sqrt(dl_error_sq(res.codebook, w) / w_norm);
  CHECK(rel <= 5 * sigma);
}

TEST_CASE("reconstruction: constant assignment repeats one codeword") {
  Rng rng(19);
  DlLearnResult res = dl_learn(oracles::random_matrix(4, 32, rng), 3, 6, 2, 1);
  DlCodebook cb = res.codebook;
  std::fill(cb.assignments.begin(), cb.assignments.end(), 3);
  ColMatrix rec = dl_reconstruction(cb);
  ColMatrix cw = dl_codeword_matrix(cb);
  for (int c = 0; c < rec.cols; ++c)
    for (int r = 0; r < 4; ++r) CHECK(rec.at(r, c) == cw.at(r, 3));
}

TEST_CASE("reconstruction: rho=1 unit coefficients select atoms") {
  Rng rng(29);
  DlCodebook cb;
  cb.dim = 5;
  cb.atoms = 3;
  cb.codewords = 4;
  cb.rho = 1;
  cb.dict = random_unit_atoms(5, 3, rng);
  cb.lambda_idx = {0, 1, 2, 1};
  cb.lambda_val = {1.0f, 1.0f, 1.0f, 1.0f};
  cb.lambda_nnz = {1, 1, 1, 1};
  cb.assignments = {3, 0, 2};
  ColMatrix rec = dl_reconstruction(cb);
  for (int r = 0; r < 5; ++r) {
    CHECK(rec.at(r, 0) == cb.dict.at(r, 1));
    CHECK(rec.at(r, 1) == cb.dict.at(r, 0));
    CHECK(rec.at(r, 2) == cb.dict.at(r, 2));
  }
}

TEST_CASE("reconstruction equals a naive triple-loop product") {
  Rng rng(31);
  DlLearnResult res = dl_learn(oracles::random_matrix(6, 48, rng), 6, 12, 3, 9);
  const DlCodebook& cb = res.codebook;
  ColMatrix rec = dl_reconstruction(cb);

  // naive D * Lambda * Gamma in double
  for (int c = 0; c < rec.cols; ++c) {
    const int j = cb.assignments[c];
    for (int r = 0; r < cb.dim; ++r) {
      double v = 0.0;
      for (int s = 0; s < cb.rho; ++s)
        v += double(cb.lambda_values(j)[s]) * cb.dict.at(r, cb.lambda_indices(j)[s]);
      CHECK(rec.at(r, c) == doctest::Approx(v).epsilon(1e-6));
    }
  }
}

TEST_CASE("dl_learn keeps atoms unit-norm and sparsity exact") {
  Rng rng(37);
  DlLearnResult res = dl_learn(oracles::random_matrix(6, 64, rng), 8, 20, 3, 4);
  const DlCodebook& cb = res.codebook;
  for (int a = 0; a < cb.atoms; ++a) {
    double nrm = 0.0;
    for (int r = 0; r < cb.dim; ++r) nrm += double(cb.dict.at(r, a)) * cb.dict.at(r, a);
    CHECK(std::sqrt(nrm) == doctest::Approx(1.0).epsilon(1e-6));
  }
  for (int j = 0; j < cb.codewords; ++j) {
    int nnz = 0;
    for (int s = 0; s < cb.rho; ++s) nnz += cb.lambda_values(j)[s] != 0.0f;
    if (cb.lambda_nnz[j] == cb.rho)
      CHECK(nnz == cb.rho);
    else  // zero-residual early exit is the only allowed shortfall
      CHECK(nnz <= cb.lambda_nnz[j]);
  }
}

TEST_CASE("dl_learn objective never increases across sub-steps") {
  for (uint32_t seed = 0; seed < 5; ++seed) {
    Rng rng(300 + seed);
    DlLearnResult res = dl_learn(oracles::random_matrix(5, 50, rng), 6, 15, 2, seed);
    double prev = res.initial_objective;
    for (double obj : res.sub_step_history) {
      CHECK(obj <= prev + 1e-9 * (1.0 + res.initial_objective));
      prev = obj;
    }
    for (size_t i = 1; i < res.objective_history.size(); ++i)
      CHECK(res.objective_history[i] <=
            res.objective_history[i - 1] + 1e-9 * (1.0 + res.initial_objective));
  }
}

TEST_CASE("dl_learn parameter errors") {
  Rng rng(41);
  ColMatrix w = oracles::random_matrix(4, 20, rng);
  CHECK_THROWS_AS(dl_learn(w, 8, 8, 2, 0), ParamError);   // atoms >= codewords
  CHECK_THROWS_AS(dl_learn(w, 4, 8, 5, 0), ParamError);   // rho > min(d, l)
  CHECK_THROWS_AS(dl_learn(w, 4, 30, 2, 0), ParamError);  // codewords > n
}

TEST_CASE("dl_learn is deterministic under seed") {
  Rng rng(43);
  ColMatrix w = oracles::random_matrix(4, 40, rng);
  DlLearnResult a = dl_learn(w, 4, 10, 2, 99);
  DlLearnResult b = dl_learn(w, 4, 10, 2, 99);
  CHECK(a.codebook == b.codebook);
  CHECK(a.objective_history == b.objective_history);
}
