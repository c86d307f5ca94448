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

#include "sparse_poly.hpp"

#include <atomic>
#include <cmath>

namespace agsim {

namespace {
std::atomic<size_t> g_term_budget{size_t(1) << 24};
}

SparsePoly::SparsePoly(int nvars, std::vector<int> caps)
    : nvars_(nvars), caps_(std::move(caps)) {
  if (nvars_ < 0 || nvars_ > ExponentVector::kMaxVars)
    throw CapOverflow("SparsePoly supports at most 48 variables");
  if (static_cast<int>(caps_.size()) != nvars_)
    throw CapMismatch("caps length != nvars");
  for (int c : caps_)
    if (c < 0 || c > 255) throw CapOverflow("per-variable cap out of range");
}

SparsePoly SparsePoly::constant(int nvars, std::vector<int> caps, cdouble c) {
  SparsePoly p(nvars, std::move(caps));
  p.add_term(ExponentVector{}, c);
  return p;
}

SparsePoly SparsePoly::linear(int nvars, std::vector<int> caps, cdouble c0,
                              const std::vector<std::pair<int, cdouble>>& terms) {
  SparsePoly p(nvars, std::move(caps));
  p.add_term(ExponentVector{}, c0);
  for (const auto& [var, coeff] : terms) {
    if (var < 0 || var >= nvars) throw CapMismatch("linear: variable index out of range");
    ExponentVector e;
    e.set(var, 1);
    p.add_term(e, coeff);
  }
  return p;
}

bool SparsePoly::within_caps(const ExponentVector& e) const {
  for (int v = 0; v < nvars_; ++v)
    if (e.get(v) > caps_[v]) return false;
  return true;
}

void SparsePoly::add_term(const ExponentVector& e, cdouble c) {
  if (c == cdouble(0, 0)) return;
  if (!within_caps(e)) return;
  auto [it, inserted] = terms_.try_emplace(e, c);
  if (!inserted) {
    it->second += c;
    if (it->second == cdouble(0, 0)) terms_.erase(it);
  }
}

SparsePoly& SparsePoly::operator+=(const SparsePoly& other) {
  if (other.nvars_ != nvars_ || other.caps_ != caps_)
    throw CapMismatch("operator+=: caps disagree");
  for (const auto& [e, c] : other.terms_) add_term(e, c);
  return *this;
}

SparsePoly& SparsePoly::scale(cdouble c) {
  if (c == cdouble(0, 0)) {
    terms_.clear();
    return *this;
  }
  for (auto& [e, v] : terms_) v *= c;
  return *this;
}

cdouble SparsePoly::evaluate(const std::vector<cdouble>& point) const {
  if (static_cast<int>(point.size()) != nvars_)
    throw DimensionMismatch("evaluate: point size");
  cdouble sum(0, 0);
  for (const auto& [e, c] : terms_) {
    cdouble t = c;
    for (int v = 0; v < nvars_; ++v) {
      const int d = e.get(v);
      for (int k = 0; k < d; ++k) t *= point[v];
    }
    sum += t;
  }
  return sum;
}

double SparsePoly::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

size_t SparsePoly::term_budget() { return g_term_budget.load(); }
void SparsePoly::set_term_budget(size_t budget) { g_term_budget.store(budget); }

namespace {

SparsePoly mul_impl(const SparsePoly& p, const SparsePoly& q,
                    const std::function<bool(const ExponentVector&)>* keep) {
  if (p.nvars() != q.nvars() || p.caps() != q.caps())
    throw CapMismatch("poly_mul: nvars/caps disagree");
  SparsePoly out(p.nvars(), p.caps());
  const SparsePoly& small = p.term_count() <= q.term_count() ? p : q;
  const SparsePoly& large = p.term_count() <= q.term_count() ? q : p;
  for (const auto& [eq, cq] : small.terms()) {
    for (const auto& [ep, cp] : large.terms()) {
      ExponentVector e = ep.plus(eq);
      if (!out.within_caps(e)) continue;
      if (keep && !(*keep)(e)) continue;
      out.add_term(e, cp * cq);
      if (out.term_count() > SparsePoly::term_budget())
        throw CapOverflow("polynomial term budget exceeded");
    }
  }
  return out;
}

}  // namespace

SparsePoly poly_mul_truncated(const SparsePoly& p, const SparsePoly& q) {
  return mul_impl(p, q, nullptr);
}

SparsePoly poly_mul_pruned(const SparsePoly& p, const SparsePoly& q,
                           const std::function<bool(const ExponentVector&)>& keep) {
  return mul_impl(p, q, &keep);
}

SparsePoly linear_power(const SparsePoly& linear, int power) {
  SparsePoly acc = SparsePoly::constant(linear.nvars(), linear.caps(), cdouble(1, 0));
  for (int k = 0; k < power; ++k) acc = poly_mul_truncated(acc, linear);
  return acc;
}

cdouble extract_matched_degree_sum(const SparsePoly& p,
                                   const std::vector<int>& group_a,
                                   const std::vector<int>& group_b,
                                   MatchedWeight weight) {
  if (weight == MatchedWeight::factorial && group_a.size() != group_b.size())
    throw BadGrouping("groupA and groupB must have the same length");
  if (weight == MatchedWeight::odd_double_factorial && !group_b.empty())
    throw BadGrouping("odd-double-factorial extraction takes a single group");
  for (int v : group_a)
    for (int w : group_b)
      if (v == w) throw BadGrouping("groupA and groupB overlap");

  cdouble sum(0, 0);
  for (const auto& [e, c] : p.terms()) {
    double w = 1.0;
    bool keep = true;
    if (weight == MatchedWeight::factorial) {
      for (size_t s = 0; s < group_a.size(); ++s) {
        const int da = e.get(group_a[s]);
        if (da != e.get(group_b[s])) {
          keep = false;
          break;
        }
        w *= factorial(da);
      }
    } else {
      for (int v : group_a) {
        const int d = e.get(v);
        if (d % 2 != 0) {
          keep = false;
          break;
        }
        w *= odd_double_factorial(d);
      }
    }
    if (keep) sum += c * w;
  }
  return sum;
}

}  // namespace agsim
