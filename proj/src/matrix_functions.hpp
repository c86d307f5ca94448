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

#ifndef AGSIM_MATRIX_FUNCTIONS_HPP
#define AGSIM_MATRIX_FUNCTIONS_HPP

#include <vector>

#include "common.hpp"

namespace agsim {

/// Exact permanent via Ryser's formula with Gray-code subset updates,
/// O(2^n n).  Guard: n <= 24.
cdouble permanent_ryser(const MatrixXcd& a);

/// Permanent of A = I + W for W = sum_s u^(s) v^(s)T with L = u.size() rank-one
/// factors, via the Gurvits polynomial method: expand
/// Pi_i [1 + (sum_s a_u u_i)(sum_s a_v v_i)] and sum matched-degree monomials
/// with factorial weights.
cdouble permanent_lowrank_plus_identity(const std::vector<VectorXcd>& u,
                                        const std::vector<VectorXcd>& v);

/// Exact loop hafnian by enumeration over perfect matchings with loops.
/// Reads only the upper triangle and diagonal.  Guard: n <= 12.
cdouble loop_hafnian_enum(const MatrixXcd& a);

/// Exact hafnian by enumeration over perfect matchings without loops.
/// Guard: even n <= 12.
cdouble hafnian_enum(const MatrixXcd& a);

/// Symmetric low-rank matrix with replaced diagonal: the loop hafnian target
/// is Sigma = G G^T off the diagonal with diag entries mu.
struct LowRankSymmetric {
  MatrixXcd G;   // n x r
  VectorXcd diag;  // mu, length n
  int size() const { return static_cast<int>(diag.size()); }
  int rank() const { return static_cast<int>(G.cols()); }
};

/// Builds the low-rank form from a symmetric Sigma (its diagonal is ignored
/// and replaced by mu) with numerical-rank cut at 1e-10 relative.
LowRankSymmetric lowrank_symmetric_from_dense(const MatrixXcd& sigma,
                                              const VectorXcd& mu);

/// Loop hafnian of a low-rank-plus-diagonal matrix via the product polynomial
/// Pi_i (sum_j G_ij y_j + mu_i) and even-degree (e-1)!! extraction.
/// Guard: rank r <= 8 by default.
cdouble loop_hafnian_lowrank(const LowRankSymmetric& s, int rank_guard = 8);

// ---------------------------------------------------------------------------
// Antinormal-ordering oracle (operator identity on a truncated space).
//
// Realizes A_i = sum_k P_ik a_k and B_i^dag = sum_k Q_ik a_k^dag on an N-mode
// Fock space, so that C = [A_i, B_j^dag] = (P Q^T)_ij, and evaluates
// Pi_i (A_i + B_i^dag) two ways: directly, and through the Ferrers-graph
// matching expansion.  Both actions are returned on the span of inputs with
// per-mode occupation <= in_cutoff; the internal cutoff in_cutoff + N makes
// every intermediate exact.

struct AntinormalExpansion {
  MatrixXcd direct;     // rows: full-space index, cols: input-subspace index
  MatrixXcd expansion;  // same shape
  MatrixXcd C;          // commutator matrix P Q^T
  int term_count = 0;   // number of (Y, matching) terms in the expansion
};

AntinormalExpansion oracle_expand_antinormal(const MatrixXcd& p, const MatrixXcd& q,
                                             int in_cutoff = 1);

}  // namespace agsim

#endif  // AGSIM_MATRIX_FUNCTIONS_HPP
