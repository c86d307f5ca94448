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

#ifndef AGSIM_COMMON_HPP
#define AGSIM_COMMON_HPP

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace agsim {

using cdouble = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Centralized tolerances. Structural checks are the tightest; decomposition
// roundtrips and oracle comparisons get progressively more slack.
namespace tol {
inline constexpr double structural = 1e-10;
inline constexpr double roundtrip = 1e-8;
inline constexpr double oracle = 1e-9;
inline constexpr double squeeze_flush = 1e-12;
}  // namespace tol

// ---------------------------------------------------------------------------
// Error hierarchy. Exceptions carry a stable category so the C API can map
// them onto error codes without string matching.

enum class ErrorCode : int {
  spec = 2,       // malformed input / schema violations
  guard = 3,      // size or rank guard exceeded
  numerical = 4,  // numerical failure at runtime
};

class AgsimError : public std::runtime_error {
 public:
  AgsimError(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

#define AGSIM_DEFINE_ERROR(NAME, CODE)                      \
  class NAME : public AgsimError {                          \
   public:                                                  \
    explicit NAME(const std::string& what)                  \
        : AgsimError(ErrorCode::CODE, #NAME ": " + what) {} \
  }

AGSIM_DEFINE_ERROR(DimensionMismatch, spec);
AGSIM_DEFINE_ERROR(NonUnitaryInput, spec);
AGSIM_DEFINE_ERROR(NotSymplectic, spec);
AGSIM_DEFINE_ERROR(CapMismatch, spec);
AGSIM_DEFINE_ERROR(BadGrouping, spec);
AGSIM_DEFINE_ERROR(NotSquare, spec);
AGSIM_DEFINE_ERROR(OddSize, spec);
AGSIM_DEFINE_ERROR(EmptyInput, spec);
AGSIM_DEFINE_ERROR(BranchTableIncomplete, spec);
AGSIM_DEFINE_ERROR(CutoffExceeded, spec);
AGSIM_DEFINE_ERROR(SpecError, spec);
AGSIM_DEFINE_ERROR(TooLarge, guard);
AGSIM_DEFINE_ERROR(RankTooLarge, guard);
AGSIM_DEFINE_ERROR(CapOverflow, guard);
AGSIM_DEFINE_ERROR(GuardExceeded, guard);
AGSIM_DEFINE_ERROR(ZeroNormObservable, spec);
AGSIM_DEFINE_ERROR(NormalizationFailure, numerical);
AGSIM_DEFINE_ERROR(SamplerFailure, numerical);
AGSIM_DEFINE_ERROR(EnvelopeViolation, numerical);
AGSIM_DEFINE_ERROR(QuadratureMismatch, numerical);
AGSIM_DEFINE_ERROR(LeakageAboveTolerance, numerical);
AGSIM_DEFINE_ERROR(NumericalFailure, numerical);

#undef AGSIM_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Deterministic RNG. std::mt19937_64 distributions are not portable across
// standard library implementations, so the uniform/normal transforms live
// here. xoshiro256++ seeded through splitmix64.

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  // Derives an independent substream; used for per-group sampling so that
  // worker count never changes the sample sequence of any group.
  Rng substream(uint64_t index) const {
    uint64_t mix = s_[0] ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    return Rng(mix ^ s_[3]);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; no state cached between calls.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Complex Gaussian with E|z|^2 = var.
  cdouble complex_normal(double var) {
    const double s = std::sqrt(var * 0.5);
    return {s * normal(), s * normal()};
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

// ---------------------------------------------------------------------------
// Small combinatorics, exact in double for the ranges used here.

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

inline double sqrt_factorial(int n) { return std::sqrt(factorial(n)); }

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double b = 1.0;
  for (int i = 0; i < k; ++i) b = b * (n - i) / (i + 1);
  // binomials in this code are exact small integers
  return std::round(b);
}

// (n-1)!! for even n >= 0; by convention (-1)!! = 1.
inline double odd_double_factorial(int n) {
  double f = 1.0;
  for (int i = n - 1; i >= 1; i -= 2) f *= i;
  return f;
}

inline bool approx_zero(double x, double tolv) { return std::abs(x) <= tolv; }

inline double max_abs(const MatrixXcd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace agsim

#endif  // AGSIM_COMMON_HPP
