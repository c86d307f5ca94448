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

#ifndef AGSIM_SPARSE_POLY_HPP
#define AGSIM_SPARSE_POLY_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "common.hpp"

namespace agsim {

// Exponent vector packed 8 bits per variable, up to 48 variables.  Degrees in
// every algorithm here stay far below 255.
struct ExponentVector {
  static constexpr int kMaxVars = 48;
  std::array<uint64_t, 6> words{0, 0, 0, 0, 0, 0};

  int get(int var) const {
    return static_cast<int>((words[var >> 3] >> ((var & 7) * 8)) & 0xff);
  }
  void set(int var, int value) {
    const int w = var >> 3, sh = (var & 7) * 8;
    words[w] = (words[w] & ~(uint64_t(0xff) << sh)) | (uint64_t(value) << sh);
  }
  bool operator==(const ExponentVector& o) const { return words == o.words; }
  // Per-byte add; caller enforces caps (no cross-byte carries within caps).
  ExponentVector plus(const ExponentVector& o) const {
    ExponentVector r;
    for (size_t i = 0; i < words.size(); ++i) r.words[i] = words[i] + o.words[i];
    return r;
  }
};

struct ExponentVectorHash {
  size_t operator()(const ExponentVector& e) const {
    uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (uint64_t w : e.words) {
      h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h *= 0xff51afd7ed558ccdULL;
    }
    return static_cast<size_t>(h);
  }
};

/// Bounded-degree multivariate polynomial over complex coefficients.  Terms
/// exceeding any per-variable cap are dropped on every operation; retained
/// terms are exact.  Zero coefficients are pruned (exact zero only).
class SparsePoly {
 public:
  using TermMap = std::unordered_map<ExponentVector, cdouble, ExponentVectorHash>;

  SparsePoly() = default;
  SparsePoly(int nvars, std::vector<int> caps);

  static SparsePoly constant(int nvars, std::vector<int> caps, cdouble c);
  /// c0 + sum_k coeffs[k] * x_{vars[k]}
  static SparsePoly linear(int nvars, std::vector<int> caps, cdouble c0,
                           const std::vector<std::pair<int, cdouble>>& terms);

  int nvars() const { return nvars_; }
  const std::vector<int>& caps() const { return caps_; }
  const TermMap& terms() const { return terms_; }
  size_t term_count() const { return terms_.size(); }
  bool within_caps(const ExponentVector& e) const;

  void add_term(const ExponentVector& e, cdouble c);
  SparsePoly& operator+=(const SparsePoly& other);
  SparsePoly& scale(cdouble c);

  cdouble evaluate(const std::vector<cdouble>& point) const;
  double max_abs_coeff() const;  // conditioning diagnostic

  /// Largest term count any product is allowed to reach before CapOverflow.
  static size_t term_budget();
  static void set_term_budget(size_t budget);

 private:
  int nvars_ = 0;
  std::vector<int> caps_;
  TermMap terms_;
  friend SparsePoly poly_mul_truncated(const SparsePoly&, const SparsePoly&);
  friend SparsePoly poly_mul_pruned(
      const SparsePoly&, const SparsePoly&,
      const std::function<bool(const ExponentVector&)>&);
};

/// Product with per-variable degree caps applied; exact on retained terms.
SparsePoly poly_mul_truncated(const SparsePoly& p, const SparsePoly& q);

/// Product that additionally drops terms failing `keep` (used to prune
/// monomials that can no longer survive a matched-degree extraction).
SparsePoly poly_mul_pruned(const SparsePoly& p, const SparsePoly& q,
                           const std::function<bool(const ExponentVector&)>& keep);

/// (c0 + sum coeffs x)^p, expanded with caps; cheaper than repeated mul for
/// the per-mode linear forms used by the generating-function engines.
SparsePoly linear_power(const SparsePoly& linear, int power);

enum class MatchedWeight {
  factorial,             // Pi_s d_s!  (Gurvits-style bijection counting)
  odd_double_factorial,  // Pi_s (e_s - 1)!! on even degrees, else 0
};

/// Sum over monomials whose degrees on groupA equal those on groupB slotwise,
/// of coeff * weight(degrees on groupA).  With an empty groupB and the
/// odd-double-factorial rule this is the loop-hafnian even-degree extraction
/// over groupA itself.
cdouble extract_matched_degree_sum(const SparsePoly& p,
                                   const std::vector<int>& group_a,
                                   const std::vector<int>& group_b,
                                   MatchedWeight weight);

}  // namespace agsim

#endif  // AGSIM_SPARSE_POLY_HPP
