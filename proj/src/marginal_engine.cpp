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

#include "marginal_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <functional>
#include <mutex>
#include <thread>

namespace agsim {

namespace {

constexpr double kPi = 3.14159265358979323846;

int effective_top(const VectorXcd& coeffs) {
  int top = 0;
  for (int k = 0; k < coeffs.size(); ++k)
    if (coeffs[k] != cdouble(0, 0)) top = k;
  return top;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// <0| S(r) D^dag(gamma) (a^dag)^e |0>, from the generating function
// cosh^{-1/2} exp(conj(gamma) z - |gamma|^2/2 - tanh(r) (z - gamma)^2 / 2).
cdouble displaced_squeezed_moment(double r, cdouble gamma, int e) {
  const double th = std::tanh(r);
  const cdouble a = cdouble(-0.5 * th, 0);
  const cdouble b = std::conj(gamma) + th * gamma;
  const cdouble c0 = std::exp(cdouble(-0.5 * std::norm(gamma), 0) - 0.5 * th * gamma * gamma) /
                     std::sqrt(std::cosh(r));
  cdouble sum(0, 0);
  for (int j = 0; 2 * j <= e; ++j) {
    cdouble term = c0;
    for (int k = 0; k < j; ++k) term *= a;
    for (int k = 0; k < e - 2 * j; ++k) term *= b;
    term *= factorial(e) / (factorial(j) * factorial(e - 2 * j));
    sum += term;
  }
  return sum;
}

}  // namespace

uint64_t hash_circuit(const GaussianUnitary& g) {
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const MatrixXcd& m) {
    for (int j = 0; j < m.cols(); ++j) {
      for (int i = 0; i < m.rows(); ++i) {
        const double parts[2] = {m(i, j).real(), m(i, j).imag()};
        for (double d : parts) {
          uint64_t bits;
          static_assert(sizeof(bits) == sizeof(d));
          std::memcpy(&bits, &d, sizeof(bits));
          h = (h ^ bits) * 1099511628211ULL;
        }
      }
    }
  };
  mix(g.transformA);
  mix(g.transformB);
  return h;
}

FrequencyVector FrequencyVector::make(int L, int n_max) {
  FrequencyVector f;
  f.L = L;
  f.n_max = n_max;
  f.omega.resize(L);
  long w = 1;
  for (int i = 0; i < L; ++i) {
    f.omega[i] = w;
    w *= (n_max + 1);
  }
  f.omega_max = w - 1;
  f.theta = 2.0 * kPi / static_cast<double>(f.omega_max + 1);
  return f;
}

long FrequencyVector::index_of(const PhotonPattern& prefix) const {
  if (prefix.size() != L) throw DimensionMismatch("FrequencyVector::index_of");
  long idx = 0;
  for (int i = 0; i < L; ++i) {
    if (prefix.counts[i] < 0 || prefix.counts[i] > n_max)
      throw CutoffExceeded("prefix entry above n_max");
    idx += omega[i] * prefix.counts[i];
  }
  return idx;
}

cdouble GeneratingFunctionTable::invert(const PhotonPattern& prefix) const {
  const long omega = freq.index_of(prefix);
  cdouble sum(0, 0);
  for (long k = 0; k <= freq.omega_max; ++k)
    sum += values[k] * std::exp(cdouble(0, freq.theta * k * omega));
  return sum / static_cast<double>(freq.omega_max + 1);
}

// ---------------------------------------------------------------------------
// CompiledOverlap

CompiledOverlap::CompiledOverlap(const GaussianUnitary& g0, const VectorXd& phi_vec,
                                 const ProductState& psi, const ProductState& phi,
                                 bool displaced) {
  const int m = g0.modes();
  if (psi.modes() != m || phi.modes() != m)
    throw DimensionMismatch("CompiledOverlap: state/circuit mode counts");
  modes_ = m;
  displaced_ = displaced;

  auto [hat, lrc] = conjugate_phase_shifter(g0, phi_vec);
  const double cscale = std::max(1.0, max_abs(lrc.C));
  if (max_abs(lrc.C - lrc.C.transpose()) > tol::structural * cscale)
    throw NumericalFailure("conjugation produced a non-symmetric C");

  uh_adjoint_ = hat.left_unitary.adjoint();
  tanh_r_.resize(m);
  cosh_r_.resize(m);
  sinh_r_.resize(m);
  for (int i = 0; i < m; ++i) {
    tanh_r_[i] = std::tanh(hat.squeeze[i]);
    cosh_r_[i] = std::cosh(hat.squeeze[i]);
    sinh_r_[i] = std::sinh(hat.squeeze[i]);
  }

  const MatrixXcd gc = takagi_factor(-lrc.C);
  const auto [uZ, vZ] = rank_factor(lrc.Z);
  const auto [wW, xW] = rank_factor(lrc.W);
  const auto [pP, qP] = rank_factor(lrc.W * lrc.Z.transpose());
  const MatrixXcd g1map = lrc.Z * hat.right_unitary.transpose();
  const MatrixXcd g2map = hat.right_unitary.transpose();

  const int rc = static_cast<int>(gc.cols());
  const int rz = static_cast<int>(uZ.cols());
  const int rw = static_cast<int>(wW.cols());
  const int rp = static_cast<int>(pP.cols());

  // variable layout: y | t | u | v | w | x | p | q | c
  const int off_y = 0;
  const int off_t = off_y + rc;
  const int off_u = off_t + m;
  const int off_v = off_u + rz;
  const int off_w = off_v + rz;
  const int off_x = off_w + rw;
  const int off_p = off_x + rw;
  const int off_q = off_p + rp;
  const int off_c = off_q + rp;
  const int nvars = off_c + (displaced ? m : 0);
  if (nvars > ExponentVector::kMaxVars)
    throw CapOverflow("generating-function engine: too many indeterminates (" +
                      std::to_string(nvars) + ")");

  std::vector<int> top_phi(m), top_psi(m);
  int rows_total = 0, cols_total = 0;
  for (int i = 0; i < m; ++i) {
    top_phi[i] = effective_top(phi.coeffs[i]);
    top_psi[i] = effective_top(psi.coeffs[i]);
    rows_total += top_phi[i];
    cols_total += top_psi[i];
  }

  std::vector<int> caps(nvars, 0);
  for (int s = 0; s < rc; ++s) caps[off_y + s] = rows_total;
  for (int i = 0; i < m; ++i) caps[off_t + i] = rows_total + cols_total;
  for (int s = 0; s < rz; ++s) caps[off_u + s] = caps[off_v + s] = rows_total;
  for (int s = 0; s < rw; ++s) {
    caps[off_w + s] = rows_total;
    caps[off_x + s] = cols_total;
  }
  for (int s = 0; s < rp; ++s) caps[off_p + s] = caps[off_q + s] = rows_total;
  if (displaced)
    for (int i = 0; i < m; ++i) caps[off_c + i] = top_phi[i];

  SparsePoly acc = SparsePoly::constant(nvars, caps, cdouble(1, 0));
  int future_rows = rows_total, future_cols = cols_total;

  for (int i = 0; i < m; ++i) {
    // Row-position roles: lhaf pairing (y), bare-annihilator -> Z creator (v),
    // W-annihilator -> column (w) or -> Z creator (p), creator consumed by a
    // bare (u) or W (q) annihilator, unconsumed creator (t), and the
    // bra-displacement constant (c, weight -gamma_i folded at evaluation).
    std::vector<std::pair<int, cdouble>> r_terms, s_terms;
    for (int s = 0; s < rc; ++s)
      if (gc(i, s) != cdouble(0, 0)) r_terms.emplace_back(off_y + s, gc(i, s));
    for (int s = 0; s < rz; ++s) {
      if (vZ(i, s) != cdouble(0, 0)) r_terms.emplace_back(off_v + s, vZ(i, s));
      if (uZ(i, s) != cdouble(0, 0)) r_terms.emplace_back(off_u + s, uZ(i, s));
    }
    for (int s = 0; s < rw; ++s)
      if (wW(i, s) != cdouble(0, 0)) r_terms.emplace_back(off_w + s, wW(i, s));
    for (int s = 0; s < rp; ++s) {
      if (pP(i, s) != cdouble(0, 0)) r_terms.emplace_back(off_p + s, pP(i, s));
      if (qP(i, s) != cdouble(0, 0)) r_terms.emplace_back(off_q + s, qP(i, s));
    }
    for (int l = 0; l < m; ++l)
      if (g1map(i, l) != cdouble(0, 0)) r_terms.emplace_back(off_t + l, g1map(i, l));
    if (displaced) r_terms.emplace_back(off_c + i, cdouble(-1, 0));

    // Column-position roles: consumed by a W annihilator (x) or unconsumed (t).
    for (int s = 0; s < rw; ++s)
      if (xW(i, s) != cdouble(0, 0)) s_terms.emplace_back(off_x + s, xW(i, s));
    for (int l = 0; l < m; ++l)
      if (g2map(i, l) != cdouble(0, 0)) s_terms.emplace_back(off_t + l, g2map(i, l));

    const SparsePoly r_lin = SparsePoly::linear(nvars, caps, cdouble(0, 0), r_terms);
    const SparsePoly s_lin = SparsePoly::linear(nvars, caps, cdouble(0, 0), s_terms);

    std::vector<SparsePoly> r_pows{SparsePoly::constant(nvars, caps, cdouble(1, 0))};
    for (int k = 1; k <= top_phi[i]; ++k)
      r_pows.push_back(poly_mul_truncated(r_pows.back(), r_lin));
    std::vector<SparsePoly> s_pows{SparsePoly::constant(nvars, caps, cdouble(1, 0))};
    for (int k = 1; k <= top_psi[i]; ++k)
      s_pows.push_back(poly_mul_truncated(s_pows.back(), s_lin));

    SparsePoly factor(nvars, caps);
    for (int n = 0; n <= top_phi[i]; ++n) {
      const cdouble bn = std::conj(phi.coeffs[i][n]);
      if (bn == cdouble(0, 0)) continue;
      for (int mm = 0; mm <= top_psi[i]; ++mm) {
        const cdouble am = psi.coeffs[i][mm];
        if (am == cdouble(0, 0)) continue;
        const cdouble base = bn * am / (sqrt_factorial(n) * sqrt_factorial(mm));
        for (int k = 0; k <= std::min(n, mm); ++k) {
          const double weight = binomial(n, k) * binomial(mm, k) * factorial(k);
          SparsePoly piece = poly_mul_truncated(r_pows[n - k], s_pows[mm - k]);
          piece.scale(base * weight);
          factor += piece;
        }
      }
    }

    future_rows -= top_phi[i];
    future_cols -= top_psi[i];
    const int fr = future_rows, fc = future_cols;
    auto keep = [&, fr, fc](const ExponentVector& e) {
      for (int s = 0; s < rz; ++s) {
        const int d = e.get(off_u + s) - e.get(off_v + s);
        if (d > fr || -d > fr) return false;
      }
      for (int s = 0; s < rw; ++s) {
        const int d = e.get(off_w + s) - e.get(off_x + s);
        if (d > fc || -d > fr) return false;
      }
      for (int s = 0; s < rp; ++s) {
        const int d = e.get(off_p + s) - e.get(off_q + s);
        if (d > fr || -d > fr) return false;
      }
      if (fr == 0)
        for (int s = 0; s < rc; ++s)
          if (e.get(off_y + s) % 2 != 0) return false;
      return true;
    };
    acc = poly_mul_pruned(acc, factor, keep);
    stats_.peak_terms = std::max(stats_.peak_terms, acc.term_count());
    stats_.max_abs_coeff = std::max(stats_.max_abs_coeff, acc.max_abs_coeff());
  }

  // Extraction: matched factorial weights on (u,v), (w,x), (p,q); even-degree
  // (e-1)!! on y; leftover-creator and displacement degrees kept symbolic.
  std::unordered_map<ExponentVector, cdouble, ExponentVectorHash> buckets;
  for (const auto& [e, coeff] : acc.terms()) {
    double weight = 1.0;
    bool keep = true;
    for (int s = 0; s < rz && keep; ++s) {
      const int du = e.get(off_u + s);
      if (du != e.get(off_v + s)) keep = false;
      else weight *= factorial(du);
    }
    for (int s = 0; s < rw && keep; ++s) {
      const int dw = e.get(off_w + s);
      if (dw != e.get(off_x + s)) keep = false;
      else weight *= factorial(dw);
    }
    for (int s = 0; s < rp && keep; ++s) {
      const int dp = e.get(off_p + s);
      if (dp != e.get(off_q + s)) keep = false;
      else weight *= factorial(dp);
    }
    for (int s = 0; s < rc && keep; ++s) {
      const int dy = e.get(off_y + s);
      if (dy % 2 != 0) keep = false;
      else weight *= odd_double_factorial(dy);
    }
    if (!keep) continue;

    // the (-gamma) sign of the displacement roles is already carried by the
    // role coefficient inside coeff; evaluation multiplies plain gamma powers
    ExponentVector key;
    for (int l = 0; l < m; ++l) key.set(l, e.get(off_t + l));
    if (displaced)
      for (int l = 0; l < m; ++l) key.set(m + l, e.get(off_c + l));
    buckets[key] += coeff * weight;
  }

  terms_.reserve(buckets.size());
  for (const auto& [key, coeff] : buckets) {
    if (coeff == cdouble(0, 0)) continue;
    Term t;
    t.t_exp.resize(m);
    t.c_exp.assign(m, 0);
    for (int l = 0; l < m; ++l) {
      t.t_exp[l] = static_cast<uint8_t>(key.get(l));
      max_t_ = std::max(max_t_, static_cast<int>(t.t_exp[l]));
    }
    if (displaced) {
      for (int l = 0; l < m; ++l) {
        t.c_exp[l] = static_cast<uint8_t>(key.get(m + l));
        max_c_ = std::max(max_c_, static_cast<int>(t.c_exp[l]));
      }
    }
    t.coeff = coeff;
    terms_.push_back(std::move(t));
  }
  stats_.compiled_terms = terms_.size();
}

cdouble CompiledOverlap::eval(const VectorXcd& gamma) const {
  if (gamma.size() != modes_) throw DimensionMismatch("CompiledOverlap::eval");
  if (!displaced_ && gamma.cwiseAbs().maxCoeff() != 0.0)
    throw SpecError("engine compiled without displacement support");

  const VectorXcd g2 = uh_adjoint_ * gamma;
  VectorXcd g3(modes_);
  for (int l = 0; l < modes_; ++l)
    g3[l] = cosh_r_[l] * g2[l] - sinh_r_[l] * std::conj(g2[l]);

  // per-mode moment tables and displacement powers
  std::vector<std::vector<cdouble>> s_tab(modes_), c_pow(modes_);
  for (int l = 0; l < modes_; ++l) {
    s_tab[l].resize(max_t_ + 1);
    for (int e = 0; e <= max_t_; ++e) {
      // keep the undisplaced fast path exact for squeeze-free modes
      if (gamma[l] == cdouble(0, 0) && g3[l] == cdouble(0, 0) && tanh_r_[l] == 0.0)
        s_tab[l][e] = (e == 0) ? cdouble(1, 0) : cdouble(0, 0);
      else
        s_tab[l][e] = displaced_squeezed_moment(std::atanh(tanh_r_[l]), g3[l], e);
    }
    c_pow[l].resize(max_c_ + 1);
    c_pow[l][0] = cdouble(1, 0);
    for (int d = 1; d <= max_c_; ++d) c_pow[l][d] = c_pow[l][d - 1] * gamma[l];
  }

  cdouble sum(0, 0);
  for (const auto& t : terms_) {
    cdouble v = t.coeff;
    for (int l = 0; l < modes_; ++l) {
      v *= s_tab[l][t.t_exp[l]];
      if (v == cdouble(0, 0)) break;
      if (displaced_ && t.c_exp[l]) v *= c_pow[l][t.c_exp[l]];
    }
    sum += v;
  }
  return sum;
}

cdouble CompiledOverlap::eval_undisplaced() const {
  return eval(VectorXcd::Zero(modes_));
}

// ---------------------------------------------------------------------------
// Low-mode amplitude (linear-optical circuits)

cdouble amplitude_low_mode(const MatrixXcd& u, const ProductState& psi,
                           const ProductState& phi_low, int L) {
  const int m = static_cast<int>(u.rows());
  if (u.cols() != m || psi.modes() != m || phi_low.modes() != m)
    throw DimensionMismatch("amplitude_low_mode: sizes");
  if (!is_unitary(u)) throw NonUnitaryInput("amplitude_low_mode: U");
  for (int i = L; i < m; ++i)
    if (effective_top(phi_low.coeffs[i]) != 0 ||
        phi_low.coeffs[i][0] == cdouble(0, 0))
      throw SpecError("amplitude_low_mode: bra must be vacuum beyond mode L");

  double budget = 1.0;
  for (int s = 0; s < L; ++s) budget *= (m * psi.cutoff + 1);
  if (budget > static_cast<double>(SparsePoly::term_budget()))
    throw CapOverflow("amplitude_low_mode: (M n_max + 1)^L beyond budget");

  std::vector<int> caps(std::max(L, 1));
  for (int s = 0; s < L; ++s) caps[s] = effective_top(phi_low.coeffs[s]);
  const int nvars = std::max(L, 1);
  if (L == 0) caps[0] = 0;

  SparsePoly acc = SparsePoly::constant(nvars, caps, cdouble(1, 0));
  for (int i = 0; i < m; ++i) {
    std::vector<std::pair<int, cdouble>> lin;
    for (int k = 0; k < L; ++k)
      if (u(k, i) != cdouble(0, 0)) lin.emplace_back(k, u(k, i));
    SparsePoly creator = SparsePoly::linear(nvars, caps, cdouble(0, 0), lin);
    SparsePoly factor(nvars, caps);
    SparsePoly power = SparsePoly::constant(nvars, caps, cdouble(1, 0));
    const int top = effective_top(psi.coeffs[i]);
    for (int mm = 0; mm <= top; ++mm) {
      if (mm > 0) power = poly_mul_truncated(power, creator);
      const cdouble am = psi.coeffs[i][mm];
      if (am == cdouble(0, 0)) continue;
      SparsePoly piece = power;
      piece.scale(am / sqrt_factorial(mm));
      factor += piece;
    }
    acc = poly_mul_truncated(acc, factor);
  }

  cdouble total(0, 0);
  cdouble vac_tail(1, 0);
  for (int i = L; i < m; ++i) vac_tail *= std::conj(phi_low.coeffs[i][0]);
  for (const auto& [e, coeff] : acc.terms()) {
    cdouble v = coeff * vac_tail;
    for (int s = 0; s < L; ++s) {
      const int d = e.get(s);
      v *= std::conj(phi_low.coeffs[s][d]) * sqrt_factorial(d);
      if (v == cdouble(0, 0)) break;
    }
    total += v;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Linear-optical generating function (V = I + W)

cdouble generating_function_linear(const std::vector<VectorXcd>& u,
                                   const std::vector<VectorXcd>& v,
                                   const ProductState& psi, const ProductState& phi) {
  if (u.size() != v.size()) throw DimensionMismatch("factor list lengths");
  const int rank = static_cast<int>(u.size());
  const int m = psi.modes();
  if (phi.modes() != m) throw DimensionMismatch("state mode counts");

  std::vector<int> top_phi(m), top_psi(m);
  int rows_total = 0, cols_total = 0;
  for (int i = 0; i < m; ++i) {
    top_phi[i] = effective_top(phi.coeffs[i]);
    top_psi[i] = effective_top(psi.coeffs[i]);
    rows_total += top_phi[i];
    cols_total += top_psi[i];
  }
  if (rank == 0) return phi.overlap(psi);

  double budget = 1.0;
  for (int s = 0; s < 2 * rank; ++s) budget *= (m * psi.cutoff + 1);
  if (budget > static_cast<double>(SparsePoly::term_budget()) * 64.0)
    throw CapOverflow("generating_function_linear: budget");

  const int nvars = 2 * rank;  // a_u | a_v
  std::vector<int> caps(nvars);
  for (int s = 0; s < rank; ++s) {
    caps[s] = rows_total;
    caps[rank + s] = cols_total;
  }

  SparsePoly acc = SparsePoly::constant(nvars, caps, cdouble(1, 0));
  int future_rows = rows_total, future_cols = cols_total;
  for (int i = 0; i < m; ++i) {
    std::vector<std::pair<int, cdouble>> lu, lv;
    for (int s = 0; s < rank; ++s) {
      if (u[s][i] != cdouble(0, 0)) lu.emplace_back(s, u[s][i]);
      if (v[s][i] != cdouble(0, 0)) lv.emplace_back(rank + s, v[s][i]);
    }
    const SparsePoly fu = SparsePoly::linear(nvars, caps, cdouble(0, 0), lu);
    const SparsePoly fv = SparsePoly::linear(nvars, caps, cdouble(0, 0), lv);
    std::vector<SparsePoly> fu_pows{SparsePoly::constant(nvars, caps, cdouble(1, 0))};
    for (int k = 1; k <= top_phi[i]; ++k)
      fu_pows.push_back(poly_mul_truncated(fu_pows.back(), fu));
    std::vector<SparsePoly> fv_pows{SparsePoly::constant(nvars, caps, cdouble(1, 0))};
    for (int k = 1; k <= top_psi[i]; ++k)
      fv_pows.push_back(poly_mul_truncated(fv_pows.back(), fv));

    SparsePoly factor(nvars, caps);
    for (int n = 0; n <= top_phi[i]; ++n) {
      const cdouble bn = std::conj(phi.coeffs[i][n]);
      if (bn == cdouble(0, 0)) continue;
      for (int mm = 0; mm <= top_psi[i]; ++mm) {
        const cdouble am = psi.coeffs[i][mm];
        if (am == cdouble(0, 0)) continue;
        const cdouble base = bn * am * sqrt_factorial(mm) / sqrt_factorial(n);
        for (int l = 0; l <= std::min(n, mm); ++l) {
          const double w = binomial(n, l) / factorial(mm - l);
          SparsePoly piece = poly_mul_truncated(fu_pows[n - l], fv_pows[mm - l]);
          piece.scale(base * w);
          factor += piece;
        }
      }
    }

    future_rows -= top_phi[i];
    future_cols -= top_psi[i];
    const int fr = future_rows, fc = future_cols;
    auto keep = [&, fr, fc](const ExponentVector& e) {
      for (int s = 0; s < rank; ++s) {
        const int d = e.get(s) - e.get(rank + s);
        if (d > fc || -d > fr) return false;
      }
      return true;
    };
    acc = poly_mul_pruned(acc, factor, keep);
  }

  std::vector<int> ga(rank), gb(rank);
  for (int s = 0; s < rank; ++s) {
    ga[s] = s;
    gb[s] = rank + s;
  }
  return extract_matched_degree_sum(acc, ga, gb, MatchedWeight::factorial);
}

cdouble generating_function_gaussian(const GaussianUnitary& g0,
                                     const VectorXd& phi_vec,
                                     const ProductState& psi,
                                     const ProductState& phi) {
  CompiledOverlap overlap(g0, phi_vec, psi, phi, /*displaced=*/false);
  return overlap.eval_undisplaced();
}

// ---------------------------------------------------------------------------
// Tables and marginals

namespace {

std::vector<VectorXcd> linear_conjugation_factors_u(const GaussianUnitary& g0,
                                                    const VectorXd& phi_vec) {
  // mat(Ghat) = U0^dag diag(e^{i phi}) U0 with U0 = transformA^dag; the
  // rank-one factors are conj(U0 row j) x (e^{i phi_j}-1) U0 row j.
  std::vector<VectorXcd> u;
  const MatrixXcd u0 = g0.transformA.adjoint();
  for (int j = 0; j < phi_vec.size(); ++j)
    if (phi_vec[j] != 0.0) u.push_back(u0.row(j).conjugate().transpose());
  return u;
}

std::vector<VectorXcd> linear_conjugation_factors_v(const GaussianUnitary& g0,
                                                    const VectorXd& phi_vec) {
  std::vector<VectorXcd> v;
  const MatrixXcd u0 = g0.transformA.adjoint();
  for (int j = 0; j < phi_vec.size(); ++j)
    if (phi_vec[j] != 0.0)
      v.push_back((std::exp(cdouble(0, phi_vec[j])) - 1.0) * u0.row(j).transpose());
  return v;
}

void check_guards(const GaussianUnitary& g0, int L, const MarginalOptions& opts) {
  const int guard = g0.is_linear_optical() ? opts.linear_L_guard : opts.gaussian_L_guard;
  if (L > guard && !opts.force)
    throw GuardExceeded("marginal path with L = " + std::to_string(L) +
                        " exceeds the guard (" + std::to_string(guard) +
                        "); pass force to override");
}

}  // namespace

GeneratingFunctionTable build_generating_table(const GaussianUnitary& g0,
                                               const ProductState& psi,
                                               const ProductState& phi,
                                               const std::vector<int>& measured,
                                               const MarginalOptions& opts) {
  const int m = g0.modes();
  if (psi.modes() != m || phi.modes() != m)
    throw DimensionMismatch("build_generating_table: mode counts");
  if (psi.cutoff != phi.cutoff)
    throw CutoffExceeded("build_generating_table: state cutoffs disagree");
  const int L = static_cast<int>(measured.size());
  for (int mm : measured)
    if (mm < 0 || mm >= m) throw DimensionMismatch("measured mode out of range");
  check_guards(g0, L, opts);

  GeneratingFunctionTable table;
  table.modes = m;
  table.L = L;
  table.n_max = psi.cutoff;
  table.circuit_hash = hash_circuit(g0);
  table.freq = FrequencyVector::make(L, psi.cutoff);
  table.values.resize(table.freq.omega_max + 1);

  const bool linear = g0.is_linear_optical();
  parallel_for(static_cast<int>(table.values.size()), opts.workers, [&](int k) {
    VectorXd phi_vec = VectorXd::Zero(m);
    for (int s = 0; s < L; ++s)
      phi_vec[measured[s]] = -table.freq.theta * k * table.freq.omega[s];
    if (linear) {
      table.values[k] = generating_function_linear(
          linear_conjugation_factors_u(g0, phi_vec),
          linear_conjugation_factors_v(g0, phi_vec), psi, phi);
    } else {
      table.values[k] = generating_function_gaussian(g0, phi_vec, psi, phi);
    }
  });
  return table;
}

cdouble marginal_probability(const GaussianUnitary& g0, const ProductState& psi,
                             const ProductState& phi, const PhotonPattern& prefix,
                             const MarginalOptions& opts) {
  const int L = prefix.size();
  for (int n : prefix.counts)
    if (n < 0 || n > psi.cutoff) throw CutoffExceeded("prefix entry above n_max");
  std::vector<int> measured(L);
  for (int i = 0; i < L; ++i) measured[i] = i;
  GeneratingFunctionTable table = build_generating_table(g0, psi, phi, measured, opts);
  return table.invert(prefix);
}

// ---------------------------------------------------------------------------
// Chain-rule sampling

ChainSampler::ChainSampler(const GaussianUnitary& g0, const ProductState& psi, int L,
                           const MarginalOptions& opts)
    : L_(L), n_max_(psi.cutoff) {
  if (L < 1) throw EmptyInput("ChainSampler needs L >= 1");
  std::vector<int> measured(L);
  for (int i = 0; i < L; ++i) measured[i] = i;
  GeneratingFunctionTable table = build_generating_table(g0, psi, psi, measured, opts);

  long total = 1;
  for (int i = 0; i < L; ++i) total *= (n_max_ + 1);
  joint_.resize(total);
  std::vector<int> pattern(L, 0);
  for (long idx = 0; idx < total; ++idx) {
    const cdouble q = table.invert(PhotonPattern{pattern});
    if (std::abs(q.imag()) > 1e-8)
      throw NumericalFailure("joint marginal has a large imaginary part");
    joint_[idx] = std::max(0.0, q.real());
    for (int i = 0; i < L; ++i) {
      if (++pattern[i] <= n_max_) break;
      pattern[i] = 0;
    }
  }

  // Consistency against the independently computed (L-1)-mode table: the
  // check the chain rule relies on (signals truncation trouble).
  if (L >= 2) {
    std::vector<int> shorter(L - 1);
    for (int i = 0; i < L - 1; ++i) shorter[i] = i;
    GeneratingFunctionTable parent =
        build_generating_table(g0, psi, psi, shorter, opts);
    long ptotal = total / (n_max_ + 1);
    std::vector<int> pat(L - 1, 0);
    for (long pidx = 0; pidx < ptotal; ++pidx) {
      double child_sum = 0.0;
      for (int v = 0; v <= n_max_; ++v) child_sum += joint_[pidx + v * ptotal];
      const double pval = parent.invert(PhotonPattern{pat}).real();
      if (std::abs(child_sum - pval) > 1e-6)
        throw NormalizationFailure("conditional mass deviates from parent marginal");
      for (int i = 0; i < L - 1; ++i) {
        if (++pat[i] <= n_max_) break;
        pat[i] = 0;
      }
    }
  }
}

PhotonPattern ChainSampler::sample(Rng& rng) const {
  PhotonPattern out;
  out.counts.assign(L_, 0);
  long base = 1;
  // sequential conditional sampling: mode i given the sampled prefix
  std::vector<long> strides(L_);
  for (int i = 0; i < L_; ++i) {
    strides[i] = base;
    base *= (n_max_ + 1);
  }
  long prefix_offset = 0;
  for (int i = 0; i < L_; ++i) {
    // conditional weights: sum over the unsampled suffix
    std::vector<double> w(n_max_ + 1, 0.0);
    double total = 0.0;
    const long suffix_count = joint_.size() / strides[i] / (n_max_ + 1);
    for (int v = 0; v <= n_max_; ++v) {
      double s = 0.0;
      for (long suf = 0; suf < suffix_count; ++suf)
        s += joint_[prefix_offset + v * strides[i] + suf * strides[i] * (n_max_ + 1)];
      w[v] = s;
      total += s;
    }
    if (total <= 0.0) throw NormalizationFailure("conditional mass vanished");
    double u = rng.uniform() * total;
    int pick = n_max_;
    for (int v = 0; v <= n_max_; ++v) {
      if (u < w[v]) {
        pick = v;
        break;
      }
      u -= w[v];
    }
    out.counts[i] = pick;
    prefix_offset += pick * strides[i];
  }
  return out;
}

}  // namespace agsim
