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

#include "gaussian.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace agsim {

namespace {

void check_finite(const MatrixXcd& m, const char* name) {
  if (!m.allFinite()) throw NumericalFailure(std::string(name) + " has non-finite entries");
}

VectorXd flush_squeeze(VectorXd r) {
  for (int i = 0; i < r.size(); ++i)
    if (std::abs(r[i]) < tol::squeeze_flush) r[i] = 0.0;
  return r;
}

// Principal square root of a (symmetric) unitary matrix via its
// eigendecomposition; f(S) is basis independent so symmetry is preserved.
MatrixXcd principal_sqrt_unitary(const MatrixXcd& s) {
  Eigen::ComplexEigenSolver<MatrixXcd> es(s);
  if (es.info() != Eigen::Success) throw NumericalFailure("eigendecomposition failed");
  VectorXcd lam = es.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) lam[i] = std::sqrt(lam[i]);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().inverse();
}

}  // namespace

bool is_unitary(const MatrixXcd& m, double tolerance) {
  if (m.rows() != m.cols()) return false;
  MatrixXcd d = m.adjoint() * m - MatrixXcd::Identity(m.rows(), m.cols());
  return max_abs(d) <= tolerance;
}

GaussianUnitary GaussianUnitary::identity(int modes) {
  return compose_bloch_messiah(MatrixXcd::Identity(modes, modes),
                               VectorXd::Zero(modes),
                               MatrixXcd::Identity(modes, modes));
}

GaussianUnitary GaussianUnitary::linear_optical(const MatrixXcd& u) {
  const int m = static_cast<int>(u.rows());
  return compose_bloch_messiah(u, VectorXd::Zero(m), MatrixXcd::Identity(m, m));
}

GaussianUnitary compose_bloch_messiah(const MatrixXcd& u, const VectorXd& r,
                                      const MatrixXcd& v) {
  const int m = static_cast<int>(r.size());
  if (u.rows() != m || u.cols() != m || v.rows() != m || v.cols() != m)
    throw DimensionMismatch("compose_bloch_messiah: U, r, V sizes disagree");
  check_finite(u, "U");
  check_finite(v, "V");
  if (!is_unitary(u)) throw NonUnitaryInput("left unitary U");
  if (!is_unitary(v)) throw NonUnitaryInput("right unitary V");

  GaussianUnitary g;
  g.left_unitary = u;
  g.squeeze = flush_squeeze(r);
  g.right_unitary = v;

  VectorXd ch(m), sh(m);
  for (int i = 0; i < m; ++i) {
    ch[i] = std::cosh(g.squeeze[i]);
    sh[i] = std::sinh(g.squeeze[i]);
  }
  g.transformA = v.adjoint() * ch.asDiagonal() * u.adjoint();
  g.transformB = -(v.adjoint() * sh.asDiagonal() * u.transpose());
  return g;
}

GaussianUnitary decompose_bloch_messiah(const MatrixXcd& a, const MatrixXcd& b) {
  const int m = static_cast<int>(a.rows());
  if (a.cols() != m || b.rows() != m || b.cols() != m)
    throw DimensionMismatch("decompose_bloch_messiah: A, B must be square and equal size");
  check_finite(a, "A");
  check_finite(b, "B");

  const MatrixXcd id = MatrixXcd::Identity(m, m);
  if (max_abs(a * a.adjoint() - b * b.adjoint() - id) > tol::roundtrip)
    throw NotSymplectic("A A^dag - B B^dag != I");
  if (max_abs(a * b.transpose() - b * a.transpose()) > tol::roundtrip)
    throw NotSymplectic("A B^T != B A^T");

  // SVD of A fixes cosh(r) (descending, hence r descending) and the two
  // unitaries up to block rotations inside degenerate singular groups.
  Eigen::JacobiSVD<MatrixXcd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const MatrixXcd p = svd.matrixU();
  const MatrixXcd q = svd.matrixV();
  const VectorXd lam = svd.singularValues();

  // N = P^dag B conj(Q) is block diagonal and symmetric on degenerate
  // groups.  Per-group Takagi N_b = T sigma T^T fixes the residual gauge:
  // replacing P -> P X, Q -> Q X with X = i T leaves A untouched and turns
  // the group's N into -sigma, i.e. B = -V^dag sinh(r) U^T with
  // r = asinh(sigma).  Reading sinh off N instead of acosh(lambda) keeps the
  // zero-squeeze block's noise linear rather than square-rooted.
  const MatrixXcd n = p.adjoint() * b * q.conjugate();
  MatrixXcd x = MatrixXcd::Identity(m, m);
  VectorXd r = VectorXd::Zero(m);
  const double scale = std::max(1.0, lam.size() ? lam[0] : 1.0);
  int start = 0;
  while (start < m) {
    int end = start + 1;
    while (end < m && std::abs(lam[end] - lam[start]) <= 1e-8 * scale) ++end;
    const int len = end - start;
    MatrixXcd nb = n.block(start, start, len, len);
    nb = 0.5 * (nb + nb.transpose()).eval();
    if (max_abs(nb) <= tol::squeeze_flush) {
      start = end;
      continue;  // zero-squeeze group, keep the identity gauge
    }
    Eigen::JacobiSVD<MatrixXcd> nsvd(nb, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const MatrixXcd mm = nsvd.matrixU().adjoint() * nsvd.matrixV().conjugate();
    const MatrixXcd t = nsvd.matrixU() * principal_sqrt_unitary(mm);
    x.block(start, start, len, len) = cdouble(0, 1) * t;
    for (int i = 0; i < len; ++i)
      r[start + i] = std::asinh(nsvd.singularValues()[i]);
    start = end;
  }
  r = flush_squeeze(r);

  const MatrixXcd u = q * x;
  const MatrixXcd v = (p * x).adjoint();
  GaussianUnitary g = compose_bloch_messiah(u, r, v);
  if (max_abs(g.transformA - a) > tol::roundtrip ||
      max_abs(g.transformB - b) > tol::roundtrip)
    throw NotSymplectic("decomposition failed to reproduce (A, B)");
  return g;
}

Displacement push_displacement(const GaussianUnitary& g, const Displacement& alpha) {
  if (alpha.modes() != g.modes())
    throw DimensionMismatch("push_displacement: mode counts disagree");
  Displacement out;
  out.amplitudes =
      g.transformA * alpha.amplitudes + g.transformB * alpha.amplitudes.conjugate();
  return out;
}

std::pair<GaussianUnitary, LowRankConjugation> conjugate_phase_shifter(
    const GaussianUnitary& g0, const VectorXd& phi) {
  const int m = g0.modes();
  if (phi.size() != m) throw DimensionMismatch("conjugate_phase_shifter: phi length");

  const MatrixXcd& a = g0.transformA;
  const MatrixXcd& b = g0.transformB;

  LowRankConjugation conj;
  conj.W = MatrixXcd::Zero(m, m);
  conj.Z = MatrixXcd::Zero(m, m);
  int l_count = 0;
  for (int j = 0; j < m; ++j) {
    if (phi[j] == 0.0) continue;
    ++l_count;
    const cdouble ep = std::exp(cdouble(0, phi[j])) - 1.0;
    const cdouble em = std::exp(cdouble(0, -phi[j])) - 1.0;
    const VectorXcd aj = a.col(j);
    const VectorXcd bj = b.col(j);
    // W += (e^{i phi}-1) a_j conj(a_j)^T - (e^{-i phi}-1) b_j conj(b_j)^T
    conj.W += ep * aj * aj.conjugate().transpose();
    conj.W -= em * bj * bj.conjugate().transpose();
    // Z += -(e^{i phi}-1) a_j b_j^T + (e^{-i phi}-1) b_j a_j^T
    conj.Z += -ep * aj * bj.transpose();
    conj.Z += em * bj * aj.transpose();

    conj.factors_u.push_back(aj);
    conj.factors_v.push_back(ep * aj.conjugate());
    conj.factors_u.push_back(bj);
    conj.factors_v.push_back(-em * bj.conjugate());
    conj.factors_w.push_back(aj);
    conj.factors_z.push_back(-ep * bj);
    conj.factors_w.push_back(bj);
    conj.factors_z.push_back(em * aj);
  }
  conj.rank_bound = 2 * l_count;
  conj.C = (MatrixXcd::Identity(m, m) + conj.W) * conj.Z.transpose();

  // Ghat^dag a Ghat = (I+W) a + Z a^dag, hence Ghat's forward transform pair
  // is A = (I+W)^dag, B = -Z^T.
  const MatrixXcd a_hat = (MatrixXcd::Identity(m, m) + conj.W).adjoint();
  const MatrixXcd b_hat = -conj.Z.transpose();
  GaussianUnitary ghat = decompose_bloch_messiah(a_hat, b_hat);
  return {std::move(ghat), std::move(conj)};
}

GaussianUnitary compose(const GaussianUnitary& second, const GaussianUnitary& first) {
  if (second.modes() != first.modes()) throw DimensionMismatch("compose: mode counts");
  // (G2 G1) a (G2 G1)^dag with G1 applied first.
  const MatrixXcd a = first.transformA * second.transformA +
                      first.transformB * second.transformB.conjugate();
  const MatrixXcd b = first.transformA * second.transformB +
                      first.transformB * second.transformA.conjugate();
  return decompose_bloch_messiah(a, b);
}

GaussianUnitary beamsplitter(int modes, int i, int j, double theta, double phi) {
  if (i < 0 || j < 0 || i >= modes || j >= modes || i == j)
    throw DimensionMismatch("beamsplitter: bad mode indices");
  MatrixXcd u = MatrixXcd::Identity(modes, modes);
  const double c = std::cos(theta), s = std::sin(theta);
  const cdouble eip = std::exp(cdouble(0, phi));
  u(i, i) = c;
  u(i, j) = -eip * s;
  u(j, i) = std::conj(eip) * s;
  u(j, j) = c;
  return GaussianUnitary::linear_optical(u);
}

GaussianUnitary phase_shifter(int modes, int i, double phi) {
  if (i < 0 || i >= modes) throw DimensionMismatch("phase_shifter: bad mode index");
  MatrixXcd u = MatrixXcd::Identity(modes, modes);
  u(i, i) = std::exp(cdouble(0, phi));
  return GaussianUnitary::linear_optical(u);
}

GaussianUnitary single_mode_squeezer(int modes, int i, double r) {
  if (i < 0 || i >= modes) throw DimensionMismatch("squeezer: bad mode index");
  VectorXd rv = VectorXd::Zero(modes);
  rv[i] = r;
  return compose_bloch_messiah(MatrixXcd::Identity(modes, modes), rv,
                               MatrixXcd::Identity(modes, modes));
}

MatrixXcd takagi_factor(const MatrixXcd& c, double rel_tol) {
  const int n = static_cast<int>(c.rows());
  if (c.cols() != n) throw NotSquare("takagi_factor");
  if (max_abs(c - c.transpose()) > 1e-8 * std::max(1.0, max_abs(c)))
    throw NumericalFailure("takagi_factor: matrix is not symmetric");
  if (max_abs(c) == 0.0) return MatrixXcd::Zero(n, 0);

  Eigen::JacobiSVD<MatrixXcd> svd(c, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd sig = svd.singularValues();
  // M = U^dag conj(V) is unitary and intertwines Sigma; Q = U sqrt(M) gives
  // C = Q Sigma Q^T.
  const MatrixXcd mm = svd.matrixU().adjoint() * svd.matrixV().conjugate();
  const MatrixXcd q = svd.matrixU() * principal_sqrt_unitary(mm);

  int rank = 0;
  while (rank < n && sig[rank] > rel_tol * sig[0]) ++rank;
  MatrixXcd g(n, rank);
  for (int s = 0; s < rank; ++s) g.col(s) = q.col(s) * std::sqrt(sig[s]);
  return g;
}

std::pair<MatrixXcd, MatrixXcd> rank_factor(const MatrixXcd& m, double rel_tol) {
  if (m.size() == 0 || max_abs(m) == 0.0)
    return {MatrixXcd::Zero(m.rows(), 0), MatrixXcd::Zero(m.cols(), 0)};
  Eigen::JacobiSVD<MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd sig = svd.singularValues();
  int rank = 0;
  while (rank < sig.size() && sig[rank] > rel_tol * sig[0]) ++rank;
  MatrixXcd rows(m.rows(), rank), cols(m.cols(), rank);
  for (int s = 0; s < rank; ++s) {
    const double sq = std::sqrt(sig[s]);
    rows.col(s) = svd.matrixU().col(s) * sq;
    cols.col(s) = svd.matrixV().col(s).conjugate() * sq;
  }
  return {rows, cols};
}

int numerical_rank(const MatrixXcd& m, double abs_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXcd> svd(m);
  int rank = 0;
  while (rank < svd.singularValues().size() && svd.singularValues()[rank] > abs_tol)
    ++rank;
  return rank;
}

}  // namespace agsim
