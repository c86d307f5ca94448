/**
 * Copyright 2026 The agsim authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fock_oracle.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace agsim {

// ---------------------------------------------------------------------------
// ProductState

double ProductState::norm() const {
  double n2 = 1.0;
  for (const auto& c : coeffs) n2 *= c.squaredNorm();
  return std::sqrt(n2);
}

void ProductState::normalize() {
  for (auto& c : coeffs) {
    const double n = c.norm();
    if (n == 0.0) throw NumericalFailure("cannot normalize a zero mode vector");
    c /= n;
  }
}

cdouble ProductState::overlap(const ProductState& other) const {
  if (other.modes() != modes()) throw DimensionMismatch("overlap: mode counts");
  cdouble v(1, 0);
  for (int i = 0; i < modes(); ++i) {
    const int n = static_cast<int>(std::min(coeffs[i].size(), other.coeffs[i].size()));
    cdouble s(0, 0);
    for (int k = 0; k < n; ++k) s += std::conj(coeffs[i][k]) * other.coeffs[i][k];
    v *= s;
  }
  return v;
}

ProductState ProductState::vacuum(int modes, int cutoff) {
  ProductState ps;
  ps.cutoff = cutoff;
  ps.coeffs.assign(modes, VectorXcd::Zero(cutoff + 1));
  for (auto& c : ps.coeffs) c[0] = 1.0;
  return ps;
}

ProductState ProductState::fock(int modes, int cutoff, const std::vector<int>& a) {
  if (static_cast<int>(a.size()) != modes) throw DimensionMismatch("fock pattern length");
  ProductState ps = vacuum(modes, cutoff);
  for (int i = 0; i < modes; ++i) {
    if (a[i] > cutoff) throw CutoffExceeded("fock occupation above cutoff");
    ps.coeffs[i].setZero();
    ps.coeffs[i][a[i]] = 1.0;
  }
  return ps;
}

// ---------------------------------------------------------------------------
// ProductObservable

double ProductObservable::total_two_norm_sq() const {
  double p = 1.0;
  for (size_t i = 0; i < ops.size(); ++i) p *= two_norm_sq(static_cast<int>(i));
  return p;
}

bool ProductObservable::is_hermitian(double tolerance) const {
  for (const auto& o : ops)
    if (max_abs(o - o.adjoint()) > tolerance) return false;
  return true;
}

void ProductObservable::validate() const {
  if (support.size() != ops.size()) throw DimensionMismatch("observable support/ops");
  for (const auto& o : ops) {
    if (!o.allFinite()) throw NumericalFailure("observable has non-finite entries");
    if (o.rows() != o.cols()) throw NotSquare("observable factor");
  }
  const double t = total_two_norm_sq();
  if (!(t > 0.0) || !std::isfinite(t)) throw ZeroNormObservable("||O_A||_2^2 must be positive");
}

// ---------------------------------------------------------------------------
// DenseState

long DenseState::stride(int mode) const {
  long s = 1;
  for (int i = 0; i < mode; ++i) s *= (cutoff + 1);
  return s;
}

int DenseState::occupation(long idx, int mode) const {
  return static_cast<int>((idx / stride(mode)) % (cutoff + 1));
}

long DenseState::index_of(const std::vector<int>& pattern) const {
  long idx = 0, s = 1;
  for (int i = 0; i < modes; ++i) {
    idx += pattern[i] * s;
    s *= (cutoff + 1);
  }
  return idx;
}

DenseState DenseState::from_product(const ProductState& ps, int cutoff) {
  DenseState d;
  d.modes = ps.modes();
  d.cutoff = cutoff;
  long dim = 1;
  for (int i = 0; i < d.modes; ++i) dim *= (cutoff + 1);
  d.amps = VectorXcd::Zero(dim);
  std::vector<int> pat(d.modes, 0);
  for (long idx = 0; idx < dim; ++idx) {
    cdouble amp(1, 0);
    for (int i = 0; i < d.modes; ++i) {
      const int n = pat[i];
      amp *= (n < ps.coeffs[i].size()) ? ps.coeffs[i][n] : cdouble(0, 0);
      if (amp == cdouble(0, 0)) break;
    }
    d.amps[idx] = amp;
    for (int i = 0; i < d.modes; ++i) {
      if (++pat[i] <= cutoff) break;
      pat[i] = 0;
    }
  }
  return d;
}

cdouble dense_inner(const DenseState& bra, const DenseState& ket) {
  if (bra.modes != ket.modes || bra.cutoff != ket.cutoff)
    throw DimensionMismatch("dense_inner: shapes disagree");
  return bra.amps.dot(ket.amps);  // Eigen dot conjugates the left factor
}

// ---------------------------------------------------------------------------
// Exact single-mode matrices

MatrixXcd displacement_matrix(cdouble alpha, int dim) {
  MatrixXcd d(dim, dim);
  const double pref = std::exp(-0.5 * std::norm(alpha));
  for (int m = 0; m < dim; ++m) {
    for (int n = 0; n < dim; ++n) {
      cdouble sum(0, 0);
      for (int j = std::max(0, n - m); j <= n; ++j) {
        cdouble term = std::pow(-std::conj(alpha), j) * std::pow(alpha, m - n + j);
        term /= factorial(j) * factorial(m - n + j) * factorial(n - j);
        sum += term;
      }
      d(m, n) = pref * sqrt_factorial(m) * sqrt_factorial(n) * sum;
    }
  }
  return d;
}

MatrixXcd squeeze_matrix(double r, int dim) {
  // Row recursion seeded by the closed form for <0|S(r)|m>; row n+1 consumes
  // one column of headroom, so seed 2*dim columns.
  const double c = std::cosh(r), s = std::sinh(r), t = std::tanh(r);
  const int wide = 2 * dim + 2;
  MatrixXcd full = MatrixXcd::Zero(dim, wide);
  for (int m = 0; m < wide; m += 2) {
    const int half = m / 2;
    full(0, m) = std::pow(-t, half) * sqrt_factorial(m) /
                 (std::pow(2.0, half) * factorial(half) * std::sqrt(c));
  }
  for (int n = 0; n + 1 < dim; ++n) {
    for (int m = 0; m + 1 < wide - n; ++m) {
      cdouble v = s * std::sqrt(double(m + 1)) * full(n, m + 1);
      if (m > 0) v += c * std::sqrt(double(m)) * full(n, m - 1);
      full(n + 1, m) = v / std::sqrt(double(n + 1));
    }
  }
  return full.leftCols(dim);
}

// ---------------------------------------------------------------------------
// Dense application machinery

namespace {

void apply_single_mode(DenseState& st, int mode, const MatrixXcd& op) {
  const int d = st.cutoff + 1;
  const long stride = st.stride(mode);
  const long dim = st.dim();
  VectorXcd out = VectorXcd::Zero(dim);
  VectorXcd col(d);
  for (long base = 0; base < dim; ++base) {
    if (st.occupation(base, mode) != 0) continue;
    for (int n = 0; n < d; ++n) col[n] = st.amps[base + n * stride];
    for (int m = 0; m < d; ++m) {
      cdouble v(0, 0);
      for (int n = 0; n < d; ++n) v += op(m, n) * col[n];
      out[base + m * stride] = v;
    }
  }
  st.amps.swap(out);
}

// Fock matrix of the 2x2 unitary block b on modes (i, j):
// B|m1 m2> expansion over creation operators, photon conserving.
std::vector<MatrixXcd> beamsplitter_blocks(const Eigen::Matrix2cd& b, int d) {
  // blocks[m1 * d + m2](n1, n2)
  std::vector<MatrixXcd> blocks(d * d, MatrixXcd::Zero(d, d));
  for (int m1 = 0; m1 < d; ++m1) {
    for (int m2 = 0; m2 < d; ++m2) {
      MatrixXcd& blk = blocks[m1 * d + m2];
      for (int k = 0; k <= m1; ++k) {
        for (int l = 0; l <= m2; ++l) {
          const int n1 = k + l;
          const int n2 = m1 + m2 - n1;
          if (n1 >= d || n2 >= d) continue;
          cdouble amp = binomial(m1, k) * binomial(m2, l);
          amp *= std::pow(b(0, 0), k) * std::pow(b(1, 0), m1 - k);
          amp *= std::pow(b(0, 1), l) * std::pow(b(1, 1), m2 - l);
          amp *= sqrt_factorial(n1) * sqrt_factorial(n2) /
                 (sqrt_factorial(m1) * sqrt_factorial(m2));
          blk(n1, n2) += amp;
        }
      }
    }
  }
  return blocks;
}

void apply_two_mode(DenseState& st, int mode_a, int mode_b,
                    const Eigen::Matrix2cd& block) {
  const int d = st.cutoff + 1;
  const auto blocks = beamsplitter_blocks(block, d);
  const long sa = st.stride(mode_a), sb = st.stride(mode_b);
  const long dim = st.dim();
  VectorXcd out = VectorXcd::Zero(dim);
  for (long base = 0; base < dim; ++base) {
    if (st.occupation(base, mode_a) != 0 || st.occupation(base, mode_b) != 0) continue;
    for (int m1 = 0; m1 < d; ++m1) {
      for (int m2 = 0; m2 < d; ++m2) {
        const cdouble amp = st.amps[base + m1 * sa + m2 * sb];
        if (amp == cdouble(0, 0)) continue;
        const MatrixXcd& blk = blocks[m1 * d + m2];
        const int total = std::min(m1 + m2, 2 * (d - 1));
        for (int n1 = std::max(0, m1 + m2 - (d - 1)); n1 <= std::min(total, d - 1); ++n1) {
          const int n2 = m1 + m2 - n1;
          const cdouble c = blk(n1, n2);
          if (c != cdouble(0, 0)) out[base + n1 * sa + n2 * sb] += c * amp;
        }
      }
    }
  }
  st.amps.swap(out);
}

struct GivensStep {
  int row = 0;  // acts on modes (row, row+1)
  Eigen::Matrix2cd block;
};

// QR by Givens rotations: (Pi G_k) U = diag(phases), so the circuit operator
// factorizes as op(U) = op(G_1^dag) ... op(G_K^dag) op(D).
void givens_decompose(const MatrixXcd& u, std::vector<GivensStep>& steps,
                      VectorXcd& phases) {
  const int m = static_cast<int>(u.rows());
  MatrixXcd w = u;
  steps.clear();
  for (int c = 0; c < m; ++c) {
    for (int i = m - 1; i > c; --i) {
      const cdouble a = w(i - 1, c), b = w(i, c);
      const double r = std::sqrt(std::norm(a) + std::norm(b));
      if (r < 1e-300 || std::abs(b) < 1e-300) continue;
      Eigen::Matrix2cd g;
      g << std::conj(a) / r, std::conj(b) / r, -b / r, a / r;
      w.block(i - 1, 0, 2, m) = g * w.block(i - 1, 0, 2, m);
      steps.push_back({i - 1, g});
    }
  }
  phases = w.diagonal();
}

void apply_phases(DenseState& st, const VectorXcd& phases) {
  const long dim = st.dim();
  for (long idx = 0; idx < dim; ++idx) {
    cdouble f(1, 0);
    for (int i = 0; i < st.modes; ++i) {
      const int n = st.occupation(idx, i);
      for (int k = 0; k < n; ++k) f *= phases[i];
    }
    st.amps[idx] *= f;
  }
}

void apply_linear_optical(DenseState& st, const MatrixXcd& u) {
  std::vector<GivensStep> steps;
  VectorXcd phases;
  givens_decompose(u, steps, phases);
  apply_phases(st, phases);
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    Eigen::Matrix2cd blk = it->block.adjoint();
    apply_two_mode(st, it->row, it->row + 1, blk);
  }
}

int working_cutoff(const GaussianUnitary& g, int state_cutoff, int modes,
                   int headroom) {
  int h = headroom;
  if (h < 0) h = g.is_linear_optical() ? std::max(0, (modes - 1) * state_cutoff) : 8;
  int work = state_cutoff + h;
  // keep the dense space within a sane budget
  while (work > state_cutoff) {
    double dim = 1.0;
    for (int i = 0; i < modes; ++i) dim *= (work + 1);
    if (dim <= 2.5e6) break;
    --work;
  }
  return work;
}

void guard_oracle_inputs(const ProductState& phi, const ProductState& psi) {
  if (psi.modes() != phi.modes()) throw DimensionMismatch("oracle: mode counts");
  if (psi.modes() > 5) throw TooLarge("oracle: more than 5 modes");
  if (psi.cutoff > 6 || phi.cutoff > 6) throw TooLarge("oracle: cutoff above 6");
}

}  // namespace

ApplyResult apply_gaussian_dense(const GaussianUnitary& g, const DenseState& psi,
                                 bool strict, double leak_tol) {
  if (g.modes() != psi.modes) throw DimensionMismatch("apply_gaussian_dense: modes");
  if (psi.modes > 5) throw TooLarge("apply_gaussian_dense: more than 5 modes");
  if (psi.cutoff > 14) throw TooLarge("apply_gaussian_dense: cutoff above 14");

  ApplyResult res;
  res.state = psi;
  const double in_norm = psi.norm_sq();

  apply_linear_optical(res.state, g.right_unitary);
  const int d = res.state.cutoff + 1;
  for (int i = 0; i < psi.modes; ++i) {
    if (g.squeeze[i] != 0.0)
      apply_single_mode(res.state, i, squeeze_matrix(g.squeeze[i], d));
  }
  apply_linear_optical(res.state, g.left_unitary);

  res.leakage = in_norm - res.state.norm_sq();
  if (strict && res.leakage > leak_tol)
    throw LeakageAboveTolerance("truncation leakage " + std::to_string(res.leakage));
  return res;
}

ApplyResult apply_displacement_dense(const VectorXcd& alpha, const DenseState& psi) {
  if (alpha.size() != psi.modes) throw DimensionMismatch("apply_displacement_dense");
  ApplyResult res;
  res.state = psi;
  const double in_norm = psi.norm_sq();
  const int d = psi.cutoff + 1;
  for (int i = 0; i < psi.modes; ++i) {
    if (alpha[i] != cdouble(0, 0))
      apply_single_mode(res.state, i, displacement_matrix(alpha[i], d));
  }
  res.leakage = in_norm - res.state.norm_sq();
  return res;
}

cdouble oracle_amplitude(const ProductState& phi, const GaussianUnitary& g,
                         const ProductState& psi, int headroom) {
  guard_oracle_inputs(phi, psi);
  const int work = working_cutoff(g, std::max(psi.cutoff, phi.cutoff),
                                  psi.modes(), headroom);
  DenseState dpsi = DenseState::from_product(psi, work);
  DenseState dphi = DenseState::from_product(phi, work);
  ApplyResult ev = apply_gaussian_dense(g, dpsi);
  return dense_inner(dphi, ev.state);
}

cdouble oracle_marginal(const ProductState& phi, const GaussianUnitary& g,
                        const std::vector<int>& measured,
                        const PhotonPattern& pattern, const ProductState& psi,
                        int headroom) {
  guard_oracle_inputs(phi, psi);
  if (measured.size() != pattern.counts.size())
    throw DimensionMismatch("oracle_marginal: measured/pattern sizes");
  const int work = working_cutoff(g, std::max(psi.cutoff, phi.cutoff),
                                  psi.modes(), headroom);
  for (int n : pattern.counts)
    if (n > work) throw CutoffExceeded("oracle_marginal: pattern above cutoff");

  DenseState gpsi = apply_gaussian_dense(g, DenseState::from_product(psi, work)).state;
  DenseState gphi = apply_gaussian_dense(g, DenseState::from_product(phi, work)).state;

  cdouble sum(0, 0);
  const long dim = gpsi.dim();
  for (long idx = 0; idx < dim; ++idx) {
    bool match = true;
    for (size_t k = 0; k < measured.size(); ++k) {
      if (gpsi.occupation(idx, measured[k]) != pattern.counts[k]) {
        match = false;
        break;
      }
    }
    if (match) sum += std::conj(gphi.amps[idx]) * gpsi.amps[idx];
  }
  return sum;
}

cdouble oracle_marginal(const ProductState& phi, const GaussianUnitary& g,
                        const PhotonPattern& prefix, const ProductState& psi,
                        int headroom) {
  std::vector<int> measured(prefix.counts.size());
  for (size_t i = 0; i < measured.size(); ++i) measured[i] = static_cast<int>(i);
  return oracle_marginal(phi, g, measured, prefix, psi, headroom);
}

double oracle_purity(const ProductState& psi, const GaussianUnitary& g,
                     const std::vector<int>& support, int headroom) {
  guard_oracle_inputs(psi, psi);
  const int work = working_cutoff(g, psi.cutoff, psi.modes(), headroom);
  DenseState out = apply_gaussian_dense(g, DenseState::from_product(psi, work)).state;

  // rho_A from the dense state, then Tr[rho_A^2].
  long dim_a = 1;
  for (size_t i = 0; i < support.size(); ++i) dim_a *= (work + 1);
  const long dim = out.dim();
  MatrixXcd rho = MatrixXcd::Zero(dim_a, dim_a);
  std::vector<long> a_index(dim, 0);
  for (long idx = 0; idx < dim; ++idx) {
    long ai = 0, s = 1;
    for (int m : support) {
      ai += out.occupation(idx, m) * s;
      s *= (work + 1);
    }
    a_index[idx] = ai;
  }
  // group indices by the complement pattern via sorting on idx - contribution:
  // simpler O(dim^2 / dim_a)-free approach: accumulate outer products per
  // complement pattern by hashing the complement index.
  std::vector<long> comp_index(dim, 0);
  {
    long s = 1;
    for (int m = 0; m < out.modes; ++m) {
      bool in_a = false;
      for (int q : support) in_a |= (q == m);
      if (in_a) continue;
      for (long idx = 0; idx < dim; ++idx)
        comp_index[idx] += out.occupation(idx, m) * s;
      s *= (work + 1);
    }
  }
  long comp_dim = 1;
  for (int m = 0; m < out.modes; ++m) {
    bool in_a = false;
    for (int q : support) in_a |= (q == m);
    if (!in_a) comp_dim *= (work + 1);
  }
  MatrixXcd slices = MatrixXcd::Zero(dim_a, comp_dim);
  for (long idx = 0; idx < dim; ++idx) slices(a_index[idx], comp_index[idx]) = out.amps[idx];
  rho = slices * slices.adjoint();
  const double tr = rho.trace().real();
  if (tr > 0) rho /= tr;
  return (rho * rho).trace().real();
}

// ---------------------------------------------------------------------------
// Gauss-Hermite nodes (Golub-Welsch on the Jacobi matrix).

void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = std::sqrt(k / 2.0);
    j(k, k - 1) = b;
    j(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  nodes.resize(n);
  weights.resize(n);
  const double sqrt_pi = std::sqrt(3.14159265358979323846);
  for (int k = 0; k < n; ++k) {
    nodes[k] = es.eigenvalues()[k];
    const double v0 = es.eigenvectors()(0, k);
    weights[k] = sqrt_pi * v0 * v0;
  }
}

// ---------------------------------------------------------------------------
// Adaptive-circuit oracle

namespace {

struct BranchContext {
  const AdaptiveCircuit* circuit;
  const ProductObservable* obs;
  int work = 0;
  cdouble value{0, 0};
  double branch_mass = 0.0;
  double leakage = 0.0;
  double weight_deviation = 0.0;
  std::vector<double> photon_probs;
  int gh_points = 25;
  bool want_value = true;
  // average conditional purity accumulation (photon circuits)
  bool want_purity = false;
  const std::vector<int>* purity_support = nullptr;
  double purity_acc = 0.0;
};

MatrixXcd observable_on_work(const MatrixXcd& o, int work_dim) {
  MatrixXcd big = MatrixXcd::Zero(work_dim, work_dim);
  const int d = static_cast<int>(o.rows());
  big.topLeftCorner(std::min(d, work_dim), std::min(d, work_dim)) =
      o.topLeftCorner(std::min(d, work_dim), std::min(d, work_dim));
  return big;
}

cdouble expectation_on_support(const DenseState& st, const ProductObservable& o) {
  DenseState tmp = st;
  const int d = st.cutoff + 1;
  for (size_t i = 0; i < o.support.size(); ++i)
    apply_single_mode(tmp, o.support[i], observable_on_work(o.ops[i], d));
  return dense_inner(st, tmp);
}

// Projects mode `m` of st onto |v><v| in place (keeps dimensions).
void project_photon(DenseState& st, int m, int v) {
  const long dim = st.dim();
  for (long idx = 0; idx < dim; ++idx)
    if (st.occupation(idx, m) != v) st.amps[idx] = cdouble(0, 0);
}

// Projects mode m onto |coh><coh| with |coh> = D(beta)|0> (normalized
// coherent state); returns the projected state in place.
void project_coherent(DenseState& st, int m, cdouble beta) {
  const int d = st.cutoff + 1;
  VectorXcd coh(d);
  const double pref = std::exp(-0.5 * std::norm(beta));
  for (int n = 0; n < d; ++n) coh[n] = pref * std::pow(beta, n) / sqrt_factorial(n);
  const long stride = st.stride(m);
  const long dim = st.dim();
  for (long base = 0; base < dim; ++base) {
    if (st.occupation(base, m) != 0) continue;
    cdouble overlap(0, 0);
    for (int n = 0; n < d; ++n) overlap += std::conj(coh[n]) * st.amps[base + n * stride];
    for (int n = 0; n < d; ++n) st.amps[base + n * stride] = coh[n] * overlap;
  }
}

double purity_of_branch(const DenseState& st, const std::vector<int>& support) {
  long dim_a = 1;
  for (size_t i = 0; i < support.size(); ++i) dim_a *= (st.cutoff + 1);
  long comp_dim = 1;
  for (int m = 0; m < st.modes; ++m) {
    bool in_a = false;
    for (int q : support) in_a |= (q == m);
    if (!in_a) comp_dim *= (st.cutoff + 1);
  }
  MatrixXcd slices = MatrixXcd::Zero(dim_a, comp_dim);
  const long dim = st.dim();
  for (long idx = 0; idx < dim; ++idx) {
    long ai = 0, ci = 0, as = 1, cs = 1;
    for (int m = 0; m < st.modes; ++m) {
      bool in_a = false;
      for (int q : support) in_a |= (q == m);
      if (in_a) {
        ai += st.occupation(idx, m) * as;
        as *= (st.cutoff + 1);
      } else {
        ci += st.occupation(idx, m) * cs;
        cs *= (st.cutoff + 1);
      }
    }
    slices(ai, ci) = st.amps[idx];
  }
  MatrixXcd rho = slices * slices.adjoint();
  const double tr = rho.trace().real();
  if (tr <= 0) return 0.0;
  rho /= tr;
  return (rho * rho).trace().real();
}

void walk_branches(BranchContext& ctx, const DenseState& state, size_t step_idx,
                   double prob_so_far) {
  const AdaptiveCircuit& c = *ctx.circuit;
  if (step_idx == c.steps.size()) {
    const double p = state.norm_sq();
    ctx.branch_mass += p;
    if (ctx.want_value) ctx.value += expectation_on_support(state, *ctx.obs);
    if (ctx.want_purity && p > 1e-14)
      ctx.purity_acc += p * purity_of_branch(state, *ctx.purity_support);
    (void)prob_so_far;
    return;
  }
  const auto& step = c.steps[step_idx];
  if (step.photon) {
    for (int v = 0; v <= ctx.work; ++v) {
      DenseState branch = state;
      project_photon(branch, step.mode, v);
      const double p = branch.norm_sq();
      auto it = step.table.find(v);
      if (it == step.table.end()) {
        // outcome beyond the feedforward table: counts as surfaced leakage
        ctx.leakage += p;
        continue;
      }
      ApplyResult ff = apply_gaussian_dense(it->second, branch);
      ctx.leakage += ff.leakage;
      walk_branches(ctx, ff.state, step_idx + 1, prob_so_far * p);
    }
  } else {
    std::vector<double> nodes, weights;
    gauss_hermite(ctx.gh_points, nodes, weights);
    const int lcount = static_cast<int>(step.povm_modes.size());
    if (lcount != 1)
      throw GuardExceeded("gaussian-POVM oracle supports one measured mode per step");
    const int m = step.povm_modes[0];

    // First pass: raw discretized branch masses for weight normalization.
    std::vector<DenseState> branches;
    std::vector<double> wts;
    std::vector<cdouble> betas;
    double total = 0.0;
    for (int i = 0; i < ctx.gh_points; ++i) {
      for (int j = 0; j < ctx.gh_points; ++j) {
        const cdouble beta(nodes[i], nodes[j]);
        // (1/pi) dx dy with GH weights; exp(x^2+y^2) undoes the GH kernel.
        const double w = weights[i] * weights[j] *
                         std::exp(nodes[i] * nodes[i] + nodes[j] * nodes[j]) /
                         3.14159265358979323846;
        DenseState branch = state;
        project_coherent(branch, m, beta);
        const double mass = w * branch.norm_sq();
        total += mass;
        branches.push_back(std::move(branch));
        wts.push_back(w);
        betas.push_back(beta);
      }
    }
    const double state_mass = state.norm_sq();
    ctx.weight_deviation =
        std::max(ctx.weight_deviation,
                 std::abs(total - state_mass) / std::max(state_mass, 1e-30));
    const double renorm = (total > 0) ? state_mass / total : 1.0;

    for (size_t b = 0; b < branches.size(); ++b) {
      DenseState branch = branches[b];
      branch.amps *= std::sqrt(wts[b] * renorm);
      // displacement feedforward, then the fixed layer
      VectorXcd disp = VectorXcd::Zero(c.modes);
      for (size_t t = 0; t < step.disp_targets.size(); ++t)
        disp[step.disp_targets[t]] += step.disp_map(t, 0) * betas[b];
      ApplyResult moved = apply_displacement_dense(disp, branch);
      ctx.leakage += moved.leakage;
      ApplyResult after = apply_gaussian_dense(step.after, moved.state);
      ctx.leakage += after.leakage;
      walk_branches(ctx, after.state, step_idx + 1, prob_so_far);
    }
  }
}

void collect_photon_probs(const AdaptiveCircuit& c, const DenseState& state,
                          size_t step_idx, int cutoff, std::vector<double>& out) {
  if (step_idx == c.steps.size()) {
    out.push_back(state.norm_sq());
    return;
  }
  const auto& step = c.steps[step_idx];
  if (!step.photon) throw SpecError("photon branch probabilities need photon steps");
  for (int v = 0; v <= cutoff; ++v) {
    DenseState branch = state;
    project_photon(branch, step.mode, v);
    auto it = step.table.find(v);
    if (it == step.table.end()) throw BranchTableIncomplete("outcome " + std::to_string(v));
    DenseState next = apply_gaussian_dense(it->second, branch).state;
    collect_photon_probs(c, next, step_idx + 1, cutoff, out);
  }
}

}  // namespace

OracleMeanValue oracle_mean_value(const ProductState& psi, const AdaptiveCircuit& c,
                                  const ProductObservable& o, int headroom,
                                  int gh_points) {
  guard_oracle_inputs(psi, psi);
  o.validate();
  const int work = working_cutoff(c.first, psi.cutoff, psi.modes(),
                                  c.has_gaussian_step() && headroom < 0 ? 8 : headroom);

  BranchContext ctx;
  ctx.circuit = &c;
  ctx.obs = &o;
  ctx.work = work;
  ctx.gh_points = gh_points;

  ApplyResult first = apply_gaussian_dense(c.first, DenseState::from_product(psi, work));
  ctx.leakage += first.leakage;
  walk_branches(ctx, first.state, 0, 1.0);

  OracleMeanValue out;
  out.value = ctx.value;
  out.leakage = ctx.leakage;
  out.branch_mass = ctx.branch_mass;
  out.quadrature_weight_deviation = ctx.weight_deviation;
  return out;
}

std::vector<double> oracle_photon_branch_probabilities(const ProductState& psi,
                                                       const AdaptiveCircuit& c,
                                                       int headroom) {
  guard_oracle_inputs(psi, psi);
  const int work = working_cutoff(c.first, psi.cutoff, psi.modes(), headroom);
  DenseState first = apply_gaussian_dense(c.first, DenseState::from_product(psi, work)).state;
  std::vector<double> probs;
  collect_photon_probs(c, first, 0, psi.cutoff, probs);
  return probs;
}

double oracle_average_branch_purity(const ProductState& psi, const AdaptiveCircuit& c,
                                    const std::vector<int>& support, int headroom) {
  guard_oracle_inputs(psi, psi);
  const int work = working_cutoff(c.first, psi.cutoff, psi.modes(), headroom);

  BranchContext ctx;
  ctx.circuit = &c;
  ProductObservable dummy;  // unused
  ctx.obs = &dummy;
  ctx.work = work;
  ctx.want_value = false;
  ctx.want_purity = true;
  ctx.purity_support = &support;

  ApplyResult first = apply_gaussian_dense(c.first, DenseState::from_product(psi, work));
  walk_branches(ctx, first.state, 0, 1.0);
  // branches were left unnormalized; purity_acc sums p(n) * Tr[rho_n^2]
  return ctx.purity_acc;
}

}  // namespace agsim
