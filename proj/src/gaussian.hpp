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

#ifndef AGSIM_GAUSSIAN_HPP
#define AGSIM_GAUSSIAN_HPP

#include <vector>

#include "common.hpp"

namespace agsim {

bool is_unitary(const MatrixXcd& m, double tolerance = tol::structural);

/// M-mode Gaussian unitary in Bloch-Messiah form G = U S(r) V together with
/// its mode-operator transform  G a_i G^dag = sum_k A_ik a_k + B_ik a_k^dag.
///
/// Conventions (see docs/conventions.md):
///   U^dag a_i U = sum_j U_ij a_j          (linear-optical circuits)
///   S(r)^dag a S(r) = cosh(r) a + sinh(r) a^dag
/// which give  A = V^dag cosh(r) U^dag  and  B = -V^dag sinh(r) U^T.
struct GaussianUnitary {
  MatrixXcd left_unitary;   // U
  VectorXd squeeze;         // r, flushed below tol::squeeze_flush
  MatrixXcd right_unitary;  // V
  MatrixXcd transformA;     // A
  MatrixXcd transformB;     // B

  int modes() const { return static_cast<int>(squeeze.size()); }
  bool is_linear_optical() const {
    return squeeze.size() == 0 || squeeze.cwiseAbs().maxCoeff() == 0.0;
  }

  static GaussianUnitary identity(int modes);
  /// Linear-optical circuit for a unitary matrix (A = U^dag, B = 0, r = 0).
  static GaussianUnitary linear_optical(const MatrixXcd& u);
};

/// Phase-space displacement amplitudes, one per mode.
struct Displacement {
  VectorXcd amplitudes;
  int modes() const { return static_cast<int>(amplitudes.size()); }
};

/// W/Z structure of a conjugated phase shifter G0^dag P(phi) G0, which
/// transforms a_i -> a_i + sum_k (W_ik a_k + Z_ik a_k^dag).  Both W and Z
/// have rank at most 2L when phi has L nonzero entries, and
/// C_ij = Z_ji + (W Z^T)_ij is symmetric.
struct LowRankConjugation {
  MatrixXcd W;
  MatrixXcd Z;
  MatrixXcd C;
  int rank_bound = 0;  // 2L
  // Analytic rank-one factor lists: W = sum_j u^(j) v^(j)T, Z = sum_j w^(j) z^(j)T.
  std::vector<VectorXcd> factors_u, factors_v, factors_w, factors_z;
};

GaussianUnitary compose_bloch_messiah(const MatrixXcd& u, const VectorXd& r,
                                      const MatrixXcd& v);

/// Recovers (U, r, V) from the transform pair (A, B).  r is nonnegative and
/// sorted descending; phases are absorbed into the unitaries.
GaussianUnitary decompose_bloch_messiah(const MatrixXcd& a, const MatrixXcd& b);

/// alpha' with D^dag(alpha') = G^dag D^dag(alpha) G; works out to
/// alpha' = A alpha + B conj(alpha).
Displacement push_displacement(const GaussianUnitary& g, const Displacement& alpha);

/// Conjugated phase shifter Ghat = G0^dag P(phi) G0, refactored into
/// Bloch-Messiah form (at most 2L squeezers), plus its W/Z/C data.
std::pair<GaussianUnitary, LowRankConjugation> conjugate_phase_shifter(
    const GaussianUnitary& g0, const VectorXd& phi);

/// Circuit composition: result applies `first`, then `second`.
GaussianUnitary compose(const GaussianUnitary& second, const GaussianUnitary& first);

// Elementary constructions used by circuit descriptions (1-based modes in the
// file format, 0-based here).
GaussianUnitary beamsplitter(int modes, int i, int j, double theta, double phi);
GaussianUnitary phase_shifter(int modes, int i, double phi);
GaussianUnitary single_mode_squeezer(int modes, int i, double r);

// ---------------------------------------------------------------------------
// Shared linear-algebra helpers.

/// Autonne-Takagi factorization of a complex symmetric matrix: C = Q S Q^T
/// truncated at numerical rank (singular values below rel_tol * smax).
/// Returns G = Q sqrt(S) with one column per retained singular value.
MatrixXcd takagi_factor(const MatrixXcd& c, double rel_tol = tol::structural);

/// SVD-based rank factorization M = sum_s row^(s) col^(s)T; columns of the
/// returned pair hold the scaled factors.
std::pair<MatrixXcd, MatrixXcd> rank_factor(const MatrixXcd& m,
                                            double rel_tol = tol::structural);

int numerical_rank(const MatrixXcd& m, double abs_tol = tol::structural);

}  // namespace agsim

#endif  // AGSIM_GAUSSIAN_HPP
