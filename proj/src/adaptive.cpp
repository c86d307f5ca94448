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

#include "adaptive.hpp"

#include <algorithm>

namespace agsim {

namespace {

// A gate leaves `mode` untouched iff its transform rows/columns there reduce
// to the identity action.
bool acts_trivially_on(const GaussianUnitary& g, int mode) {
  const int m = g.modes();
  for (int k = 0; k < m; ++k) {
    const cdouble a_want = (k == mode) ? cdouble(1, 0) : cdouble(0, 0);
    if (std::abs(g.transformA(mode, k) - a_want) > 1e-9) return false;
    if (std::abs(g.transformA(k, mode) - ((k == mode) ? cdouble(1, 0) : cdouble(0, 0))) > 1e-9)
      return false;
    if (std::abs(g.transformB(mode, k)) > 1e-9) return false;
    if (std::abs(g.transformB(k, mode)) > 1e-9) return false;
  }
  return true;
}

}  // namespace

std::vector<int> AdaptiveCircuit::measured_modes() const {
  std::vector<int> out;
  for (const auto& s : steps) {
    if (s.photon) {
      out.push_back(s.mode);
    } else {
      out.insert(out.end(), s.povm_modes.begin(), s.povm_modes.end());
    }
  }
  return out;
}

bool AdaptiveCircuit::has_gaussian_step() const {
  return std::any_of(steps.begin(), steps.end(),
                     [](const Step& s) { return !s.photon; });
}

GaussianUnitary AdaptiveCircuit::compose_photon_prefix(
    const std::vector<int>& prefix) const {
  GaussianUnitary total = first;
  for (size_t k = 0; k < prefix.size(); ++k) {
    if (k >= steps.size() || !steps[k].photon)
      throw SpecError("compose_photon_prefix: prefix longer than photon steps");
    auto it = steps[k].table.find(prefix[k]);
    if (it == steps[k].table.end())
      throw BranchTableIncomplete("no feedforward entry for outcome " +
                                  std::to_string(prefix[k]));
    total = compose(it->second, total);
  }
  return total;
}

void AdaptiveCircuit::validate(int cutoff) const {
  if (first.modes() != modes) throw DimensionMismatch("adaptive circuit mode count");
  std::vector<int> seen;
  for (const auto& s : steps) {
    std::vector<int> now;
    if (s.photon) {
      now.push_back(s.mode);
      for (int v = 0; v <= cutoff; ++v)
        if (!s.table.count(v))
          throw BranchTableIncomplete("missing outcome " + std::to_string(v));
      for (const auto& [v, g] : s.table) {
        if (g.modes() != modes) throw DimensionMismatch("feedforward gate mode count");
        for (int m : seen)
          if (!acts_trivially_on(g, m))
            throw SpecError("feedforward gate touches an already measured mode");
        if (!acts_trivially_on(g, s.mode))
          throw SpecError("feedforward gate touches the mode it is conditioned on");
      }
    } else {
      now = s.povm_modes;
      if (s.after.modes() != modes) throw DimensionMismatch("post-POVM gate mode count");
      if (s.disp_map.rows() != static_cast<int>(s.disp_targets.size()) ||
          s.disp_map.cols() != static_cast<int>(s.povm_modes.size()))
        throw DimensionMismatch("feedforward displacement map shape");
      for (int t : s.disp_targets)
        for (int m : s.povm_modes)
          if (t == m) throw SpecError("displacement feedforward targets a measured mode");
    }
    for (int m : now) {
      if (m < 0 || m >= modes) throw DimensionMismatch("measured mode out of range");
      if (std::find(seen.begin(), seen.end(), m) != seen.end())
        throw SpecError("mode measured twice");
      seen.push_back(m);
    }
  }
}

}  // namespace agsim
