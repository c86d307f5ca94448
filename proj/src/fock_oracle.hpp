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

#ifndef AGSIM_FOCK_ORACLE_HPP
#define AGSIM_FOCK_ORACLE_HPP

#include <optional>
#include <vector>

#include "adaptive.hpp"
#include "common.hpp"
#include "gaussian.hpp"

namespace agsim {

/// Product state with per-mode Fock coefficients a^(i)_0..n_max.
struct ProductState {
  int cutoff = 0;
  std::vector<VectorXcd> coeffs;  // each of length cutoff + 1

  int modes() const { return static_cast<int>(coeffs.size()); }
  double norm() const;
  void normalize();
  cdouble overlap(const ProductState& other) const;  // <this|other>

  static ProductState vacuum(int modes, int cutoff);
  static ProductState fock(int modes, int cutoff, const std::vector<int>& a);
};

/// Photon-number outcome tuple (full pattern or a prefix).
struct PhotonPattern {
  std::vector<int> counts;
  int size() const { return static_cast<int>(counts.size()); }
};

/// Product observable O = O_A (x) 1_B given by per-mode truncated matrices on
/// the modes in `support`.
struct ProductObservable {
  std::vector<int> support;      // mode indices carrying a nontrivial factor
  std::vector<MatrixXcd> ops;    // one (cutoff+1)^2 matrix per support entry

  double two_norm_sq(int i) const { return ops[i].squaredNorm(); }
  double total_two_norm_sq() const;
  bool is_hermitian(double tolerance = 1e-12) const;
  void validate() const;  // finite, positive total two-norm
};

/// Dense truncated-Fock state; index order is little-endian in the mode index
/// (mode 0 has stride 1).
struct DenseState {
  int modes = 0;
  int cutoff = 0;
  VectorXcd amps;

  long dim() const { return amps.size(); }
  long stride(int mode) const;
  int occupation(long idx, int mode) const;
  long index_of(const std::vector<int>& pattern) const;
  double norm_sq() const { return amps.squaredNorm(); }

  static DenseState from_product(const ProductState& ps, int cutoff);
};

cdouble dense_inner(const DenseState& bra, const DenseState& ket);

// Exact single-mode matrices on a (dim x dim) truncated block.
MatrixXcd displacement_matrix(cdouble alpha, int dim);
MatrixXcd squeeze_matrix(double r, int dim);

struct ApplyResult {
  DenseState state;
  double leakage = 0.0;  // ||in||^2 - ||out||^2
};

/// Applies G = U S(r) V to a dense state (V first), cropping to the state's
/// cutoff and reporting lost norm.  Guards: modes <= 5, input cutoff <= 14.
/// With strict=true a leakage above leak_tol raises LeakageAboveTolerance.
ApplyResult apply_gaussian_dense(const GaussianUnitary& g, const DenseState& psi,
                                 bool strict = false, double leak_tol = 1e-12);

/// Applies D(alpha) (one amplitude per mode) to a dense state.
ApplyResult apply_displacement_dense(const VectorXcd& alpha, const DenseState& psi);

// ---------------------------------------------------------------------------
// Brute-force reference quantities.  All take an optional working-cutoff
// headroom: the computation runs at cutoff + headroom and contracts there,
// which removes intermediate truncation (exactly, for linear-optical
// circuits whose photon budget fits).  Guards: modes <= 5, cutoff <= 6.

/// <phi| G |psi> on the truncated space.
cdouble oracle_amplitude(const ProductState& phi, const GaussianUnitary& g,
                         const ProductState& psi, int headroom = -1);

/// <phi| G^dag (|n><n|_measured (x) 1) G |psi> for a pattern on an arbitrary
/// measured mode set.
cdouble oracle_marginal(const ProductState& phi, const GaussianUnitary& g,
                        const std::vector<int>& measured,
                        const PhotonPattern& pattern, const ProductState& psi,
                        int headroom = -1);

/// Convenience overload measuring the first pattern.size() modes.
cdouble oracle_marginal(const ProductState& phi, const GaussianUnitary& g,
                        const PhotonPattern& prefix, const ProductState& psi,
                        int headroom = -1);

/// Purity Tr[rho_A^2] of the reduced output state on `support`.
double oracle_purity(const ProductState& psi, const GaussianUnitary& g,
                     const std::vector<int>& support, int headroom = -1);

struct OracleMeanValue {
  cdouble value;
  double leakage = 0.0;          // norm lost to truncation across branches
  double branch_mass = 0.0;      // sum of branch probabilities enumerated
  std::vector<double> photon_branch_probs;  // flattened, photon circuits only
  double quadrature_weight_deviation = 0.0; // gaussian steps: |sum w - 1|
};

/// Exact (exhaustively branch-enumerated) mean value of O on the output of an
/// adaptive circuit.  Gaussian steps are discretized on a Gauss-Hermite grid
/// with `gh_points` nodes per quadrature axis, weights renormalized to unit
/// total branch mass.
OracleMeanValue oracle_mean_value(const ProductState& psi, const AdaptiveCircuit& c,
                                  const ProductObservable& o, int headroom = -1,
                                  int gh_points = 25);

/// Branch probabilities p(n) for a photon-feedforward circuit, indexed by
/// outcome tuples in little-endian order (first measurement fastest).
std::vector<double> oracle_photon_branch_probabilities(const ProductState& psi,
                                                       const AdaptiveCircuit& c,
                                                       int headroom = -1);

/// Average conditional purity E_n[Tr rho_n^2] on `support` for photon
/// circuits (variance-bound input for the Theorem-2 pipeline).
double oracle_average_branch_purity(const ProductState& psi, const AdaptiveCircuit& c,
                                    const std::vector<int>& support,
                                    int headroom = -1);

/// Gauss-Hermite nodes/weights for integr. of exp(-x^2) f(x).
void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace agsim

#endif  // AGSIM_FOCK_ORACLE_HPP
