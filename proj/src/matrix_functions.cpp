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

#include "matrix_functions.hpp"

#include <cmath>
#include <functional>

#include "gaussian.hpp"
#include "sparse_poly.hpp"

namespace agsim {

cdouble permanent_ryser(const MatrixXcd& a) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n) throw NotSquare("permanent_ryser");
  if (n > 24) throw TooLarge("permanent_ryser: n > 24");
  if (n == 0) return cdouble(1, 0);

  // Gray-code walk over nonempty column subsets; row sums updated per step.
  VectorXcd row_sums = VectorXcd::Zero(n);
  cdouble total(0, 0);
  uint32_t gray = 0;
  int popcount = 0;
  const uint32_t limit = uint32_t(1) << n;
  for (uint32_t k = 1; k < limit; ++k) {
    const uint32_t next = k ^ (k >> 1);
    const uint32_t changed = gray ^ next;
    int j = 0;
    while (!((changed >> j) & 1u)) ++j;
    if (next & changed) {
      row_sums += a.col(j);
      ++popcount;
    } else {
      row_sums -= a.col(j);
      --popcount;
    }
    gray = next;
    cdouble prod(1, 0);
    for (int i = 0; i < n; ++i) prod *= row_sums[i];
    const double sign = ((n - popcount) % 2 == 0) ? 1.0 : -1.0;
    total += sign * prod;
  }
  return total;
}

cdouble permanent_lowrank_plus_identity(const std::vector<VectorXcd>& u,
                                        const std::vector<VectorXcd>& v) {
  if (u.size() != v.size()) throw DimensionMismatch("factor list lengths disagree");
  const int rank = static_cast<int>(u.size());
  if (rank == 0) return cdouble(1, 0);
  const int n = static_cast<int>(u[0].size());
  for (const auto& vec : u)
    if (vec.size() != n) throw DimensionMismatch("factor vector length");
  for (const auto& vec : v)
    if (vec.size() != n) throw DimensionMismatch("factor vector length");

  // (n+1)^{2L} monomial bound; refuse instances beyond the term budget.
  double bound = 1.0;
  for (int s = 0; s < 2 * rank; ++s) bound *= (n + 1);
  if (bound > static_cast<double>(SparsePoly::term_budget()))
    throw RankTooLarge("permanent_lowrank_plus_identity: (N+1)^{2L} beyond budget");

  const int nvars = 2 * rank;  // a_u then a_v
  std::vector<int> caps(nvars, n);
  SparsePoly acc = SparsePoly::constant(nvars, caps, cdouble(1, 0));
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<int, cdouble>> lu, lv;
    for (int s = 0; s < rank; ++s) {
      lu.emplace_back(s, u[s][i]);
      lv.emplace_back(rank + s, v[s][i]);
    }
    SparsePoly fu = SparsePoly::linear(nvars, caps, cdouble(0, 0), lu);
    SparsePoly fv = SparsePoly::linear(nvars, caps, cdouble(0, 0), lv);
    SparsePoly factor = poly_mul_truncated(fu, fv);
    factor.add_term(ExponentVector{}, cdouble(1, 0));
    acc = poly_mul_truncated(acc, factor);
  }

  std::vector<int> group_a(rank), group_b(rank);
  for (int s = 0; s < rank; ++s) {
    group_a[s] = s;
    group_b[s] = rank + s;
  }
  return extract_matched_degree_sum(acc, group_a, group_b, MatchedWeight::factorial);
}

namespace {

cdouble lhaf_recurse(const MatrixXcd& a, uint32_t alive, bool loops) {
  if (alive == 0) return cdouble(1, 0);
  int v = 0;
  while (!((alive >> v) & 1u)) ++v;
  const uint32_t rest = alive & ~(uint32_t(1) << v);
  cdouble sum(0, 0);
  if (loops) sum += a(v, v) * lhaf_recurse(a, rest, loops);
  for (int u = v + 1; u < static_cast<int>(a.rows()); ++u) {
    if (!((rest >> u) & 1u)) continue;
    sum += a(v, u) * lhaf_recurse(a, rest & ~(uint32_t(1) << u), loops);
  }
  return sum;
}

}  // namespace

cdouble loop_hafnian_enum(const MatrixXcd& a) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n) throw NotSquare("loop_hafnian_enum");
  if (n > 12) throw TooLarge("loop_hafnian_enum: n > 12");
  if (n == 0) return cdouble(1, 0);
  return lhaf_recurse(a, (uint32_t(1) << n) - 1, true);
}

cdouble hafnian_enum(const MatrixXcd& a) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n) throw NotSquare("hafnian_enum");
  if (n % 2 != 0) throw OddSize("hafnian_enum: odd size");
  if (n > 12) throw TooLarge("hafnian_enum: n > 12");
  if (n == 0) return cdouble(1, 0);
  return lhaf_recurse(a, (uint32_t(1) << n) - 1, false);
}

LowRankSymmetric lowrank_symmetric_from_dense(const MatrixXcd& sigma,
                                              const VectorXcd& mu) {
  if (sigma.rows() != sigma.cols() || sigma.rows() != mu.size())
    throw DimensionMismatch("lowrank_symmetric_from_dense");
  LowRankSymmetric s;
  s.G = takagi_factor(sigma);
  s.diag = mu;
  return s;
}

cdouble loop_hafnian_lowrank(const LowRankSymmetric& s, int rank_guard) {
  const int n = s.size();
  const int r = s.rank();
  if (r > rank_guard) throw RankTooLarge("loop_hafnian_lowrank: rank above guard");
  if (s.G.rows() != n) throw DimensionMismatch("loop_hafnian_lowrank: G rows != n");
  if (n == 0) return cdouble(1, 0);

  std::vector<int> caps(std::max(r, 1), n);
  const int nvars = std::max(r, 1);
  SparsePoly acc = SparsePoly::constant(nvars, caps, cdouble(1, 0));
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<int, cdouble>> lin;
    for (int j = 0; j < r; ++j) lin.emplace_back(j, s.G(i, j));
    acc = poly_mul_truncated(acc, SparsePoly::linear(nvars, caps, s.diag[i], lin));
  }
  std::vector<int> group(r);
  for (int j = 0; j < r; ++j) group[j] = j;
  return extract_matched_degree_sum(acc, group, {}, MatchedWeight::odd_double_factorial);
}

// ---------------------------------------------------------------------------
// Antinormal ordering oracle.

namespace {

class TruncatedModes {
 public:
  TruncatedModes(int modes, int cutoff) : modes_(modes), cutoff_(cutoff) {
    dim_ = 1;
    for (int i = 0; i < modes; ++i) dim_ *= (cutoff + 1);
    stride_.resize(modes);
    long s = 1;
    for (int i = 0; i < modes; ++i) {
      stride_[i] = s;
      s *= (cutoff + 1);
    }
  }

  long dim() const { return dim_; }

  int occupation(long idx, int mode) const {
    return static_cast<int>((idx / stride_[mode]) % (cutoff_ + 1));
  }

  // out += op(in) for op = sum_k coeff[k] a_k (dagger=false) or a_k^dag.
  VectorXcd apply_linear(const VectorXcd& in, const VectorXcd& coeff,
                         bool dagger) const {
    VectorXcd out = VectorXcd::Zero(dim_);
    for (long idx = 0; idx < dim_; ++idx) {
      const cdouble amp = in[idx];
      if (amp == cdouble(0, 0)) continue;
      for (int k = 0; k < modes_; ++k) {
        if (coeff[k] == cdouble(0, 0)) continue;
        const int nk = occupation(idx, k);
        if (dagger) {
          if (nk >= cutoff_) throw NumericalFailure("antinormal oracle cutoff hit");
          out[idx + stride_[k]] += coeff[k] * std::sqrt(double(nk + 1)) * amp;
        } else if (nk > 0) {
          out[idx - stride_[k]] += coeff[k] * std::sqrt(double(nk)) * amp;
        }
      }
    }
    return out;
  }

 private:
  int modes_, cutoff_;
  long dim_;
  std::vector<long> stride_;
};

}  // namespace

AntinormalExpansion oracle_expand_antinormal(const MatrixXcd& p, const MatrixXcd& q,
                                             int in_cutoff) {
  const int n = static_cast<int>(p.rows());
  if (p.cols() != n || q.rows() != n || q.cols() != n)
    throw DimensionMismatch("oracle_expand_antinormal: P, Q must be N x N");
  if (n > 6) throw TooLarge("oracle_expand_antinormal: N > 6");
  const int cutoff = in_cutoff + n;
  double dim_check = 1.0;
  for (int i = 0; i < n; ++i) dim_check *= (cutoff + 1);
  if (dim_check * ((in_cutoff + 1)) > 4e6) throw TooLarge("antinormal oracle space too large");

  TruncatedModes space(n, cutoff);
  const long dim = space.dim();
  long in_dim = 1;
  for (int i = 0; i < n; ++i) in_dim *= (in_cutoff + 1);

  AntinormalExpansion result;
  result.C = p * q.transpose();
  result.direct = MatrixXcd::Zero(dim, in_dim);
  result.expansion = MatrixXcd::Zero(dim, in_dim);

  // Enumerate input basis states with per-mode occupation <= in_cutoff.
  std::vector<long> input_indices(in_dim);
  {
    std::vector<int> occ(n, 0);
    for (long col = 0; col < in_dim; ++col) {
      long idx = 0;
      long stride = 1;
      for (int i = 0; i < n; ++i) {
        idx += occ[i] * stride;
        stride *= (cutoff + 1);
      }
      input_indices[col] = idx;
      for (int i = 0; i < n; ++i) {
        if (++occ[i] <= in_cutoff) break;
        occ[i] = 0;
      }
    }
  }

  for (long col = 0; col < in_dim; ++col) {
    VectorXcd base = VectorXcd::Zero(dim);
    base[input_indices[col]] = cdouble(1, 0);

    // Direct product, rightmost factor first.
    VectorXcd direct = base;
    for (int i = n - 1; i >= 0; --i) {
      direct = space.apply_linear(direct, p.row(i), false) +
               space.apply_linear(direct, q.row(i), true);
    }
    result.direct.col(col) = direct;

    // Matching expansion: sum over Y (annihilator positions) and partial
    // matchings of the Ferrers graph pairing p in Y with q in Y^c, q < p.
    VectorXcd expansion = VectorXcd::Zero(dim);
    int terms = 0;
    for (uint32_t y = 0; y < (uint32_t(1) << n); ++y) {
      std::vector<int> annih, creat;
      for (int i = 0; i < n; ++i)
        ((y >> i) & 1u) ? annih.push_back(i) : creat.push_back(i);

      // Recursive matching enumeration over annihilator positions; the
      // used-bit masks record which positions a matching consumed.
      std::function<void(size_t, uint32_t, uint32_t, cdouble, int)> walk =
          [&](size_t ai, uint32_t used_creat, uint32_t used_annih, cdouble cprod,
              int msize) {
            if (ai == annih.size()) {
              VectorXcd vec = base;
              for (auto it = creat.rbegin(); it != creat.rend(); ++it)
                if (!((used_creat >> *it) & 1u))
                  vec = space.apply_linear(vec, q.row(*it), true);
              for (auto it = annih.rbegin(); it != annih.rend(); ++it)
                if (!((used_annih >> *it) & 1u))
                  vec = space.apply_linear(vec, p.row(*it), false);
              expansion += ((msize % 2 == 0) ? cprod : -cprod) * vec;
              ++terms;
              return;
            }
            walk(ai + 1, used_creat, used_annih, cprod, msize);
            const int pi = annih[ai];
            for (int qj : creat) {
              if (qj >= pi || ((used_creat >> qj) & 1u)) continue;
              walk(ai + 1, used_creat | (uint32_t(1) << qj),
                   used_annih | (uint32_t(1) << pi), cprod * result.C(pi, qj),
                   msize + 1);
            }
          };
      walk(0, 0, 0, cdouble(1, 0), 0);
    }
    result.expansion.col(col) = expansion;
    result.term_count = terms;
  }
  return result;
}

}  // namespace agsim
