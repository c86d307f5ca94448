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

#ifndef AGSIM_MARGINAL_ENGINE_HPP
#define AGSIM_MARGINAL_ENGINE_HPP

#include <map>
#include <memory>
#include <vector>

#include "fock_oracle.hpp"
#include "gaussian.hpp"
#include "sparse_poly.hpp"

namespace agsim {

/// Frequency design for the photon-number Fourier inversion: omega_i =
/// (n_max+1)^(pos in measured set), Omega_max = (n_max+1)^L - 1 and
/// theta = 2 pi / (Omega_max + 1).  Distinct prefixes with n_i <= n_max map
/// to distinct Omega values.
struct FrequencyVector {
  int L = 0;
  int n_max = 0;
  std::vector<long> omega;  // per measured slot
  long omega_max = 0;
  double theta = 0.0;

  static FrequencyVector make(int L, int n_max);
  long index_of(const PhotonPattern& prefix) const;
};

/// Table of generating-function values G~(k) for k = 0..Omega_max.
struct GeneratingFunctionTable {
  std::vector<cdouble> values;
  int modes = 0;
  int L = 0;
  int n_max = 0;
  uint64_t circuit_hash = 0;
  FrequencyVector freq;

  /// q(prefix) = (1/(Omega_max+1)) sum_k G~(k) e^{i k theta Omega}.
  cdouble invert(const PhotonPattern& prefix) const;
};

struct EngineStats {
  size_t compiled_terms = 0;
  size_t peak_terms = 0;
  double max_abs_coeff = 0.0;  // conditioning diagnostic
};

/// Precompiled evaluator for <phi| D^dag(gamma) Ghat |psi> with
/// Ghat = G0^dag P(phi_vec) G0.  Compilation folds all state coefficients and
/// extraction weights; evaluation per gamma costs one pass over the
/// compressed term list.  gamma = 0 gives the plain generating function.
class CompiledOverlap {
 public:
  CompiledOverlap(const GaussianUnitary& g0, const VectorXd& phi_vec,
                  const ProductState& psi, const ProductState& phi,
                  bool displaced = true);

  cdouble eval(const VectorXcd& gamma) const;
  cdouble eval_undisplaced() const;
  const EngineStats& stats() const { return stats_; }

 private:
  struct Term {
    std::vector<uint8_t> t_exp;  // per-mode leftover-creator degrees
    std::vector<uint8_t> c_exp;  // per-mode bra-displacement degrees
    cdouble coeff;
  };
  int modes_ = 0;
  bool displaced_ = true;
  MatrixXcd uh_adjoint_;
  VectorXd tanh_r_, cosh_r_, sinh_r_;
  std::vector<Term> terms_;
  int max_t_ = 0, max_c_ = 0;
  EngineStats stats_;
};

/// Options shared by the engine entry points.
struct MarginalOptions {
  int gaussian_L_guard = 2;
  int linear_L_guard = 4;
  bool force = false;  // lifts the L guards
  int workers = 0;     // 0 -> hardware concurrency
};

/// <phi| U |psi> for a linear-optical matrix u and a bra that is vacuum
/// beyond its first L modes, via the L-variable polynomial of the low-mode
/// construction.  Exact; cost O(M (M n_max + 1)^L).
cdouble amplitude_low_mode(const MatrixXcd& u, const ProductState& psi,
                           const ProductState& phi_low, int L);

/// <phi| V |psi> for a linear-optical circuit V = I + W, W given by rank-one
/// factor pairs (u on the bra side, v on the ket side).
cdouble generating_function_linear(const std::vector<VectorXcd>& u,
                                   const std::vector<VectorXcd>& v,
                                   const ProductState& psi, const ProductState& phi);

/// <phi| G0^dag P(phi_vec) G0 |psi> through the low-rank Gaussian engine.
cdouble generating_function_gaussian(const GaussianUnitary& g0,
                                     const VectorXd& phi_vec,
                                     const ProductState& psi,
                                     const ProductState& phi);

/// Generating-function table over the given measured modes (phases on those
/// modes only); entries computed independently, optionally in parallel.
GeneratingFunctionTable build_generating_table(const GaussianUnitary& g0,
                                               const ProductState& psi,
                                               const ProductState& phi,
                                               const std::vector<int>& measured,
                                               const MarginalOptions& opts = {});

/// q(n_1..n_L) for a prefix on the first L modes, via the table inversion.
cdouble marginal_probability(const GaussianUnitary& g0, const ProductState& psi,
                             const ProductState& phi, const PhotonPattern& prefix,
                             const MarginalOptions& opts = {});

/// Chain-rule sampler over the first L modes of G0|psi>; deterministic given
/// the rng state.  Conditionals are renormalized against the parent marginal
/// and checked for consistency (NormalizationFailure above 1e-6).
class ChainSampler {
 public:
  ChainSampler(const GaussianUnitary& g0, const ProductState& psi, int L,
               const MarginalOptions& opts = {});
  PhotonPattern sample(Rng& rng) const;
  /// Exact joint table over {0..n_max}^L (little-endian, first mode fastest).
  const std::vector<double>& joint_probabilities() const { return joint_; }

 private:
  int L_ = 0;
  int n_max_ = 0;
  std::vector<double> joint_;
};

uint64_t hash_circuit(const GaussianUnitary& g);

}  // namespace agsim

#endif  // AGSIM_MARGINAL_ENGINE_HPP
