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

#ifndef AGSIM_ADAPTIVE_HPP
#define AGSIM_ADAPTIVE_HPP

#include <map>
#include <vector>

#include "gaussian.hpp"

namespace agsim {

/// Measurement-and-feedforward circuit: G^(1), then L mid-circuit
/// measurements, each followed by an outcome-conditioned Gaussian layer.
///
/// Photon steps measure one designated mode and pick the next layer from a
/// finite outcome table.  Gaussian steps measure a mode set with a
/// vacuum-seeded Gaussian POVM; feedforward is a displacement linear in the
/// outcome (disp = disp_map * beta on disp_targets) followed by a fixed layer.
struct AdaptiveCircuit {
  struct Step {
    bool photon = true;
    // photon measurement
    int mode = 0;
    std::map<int, GaussianUnitary> table;  // outcome -> next layer
    // gaussian POVM measurement
    std::vector<int> povm_modes;
    MatrixXcd disp_map;  // |disp_targets| x |povm_modes|
    std::vector<int> disp_targets;
    GaussianUnitary after;  // fixed layer applied after a gaussian step
  };

  int modes = 0;
  GaussianUnitary first;
  std::vector<Step> steps;

  int measurement_count() const { return static_cast<int>(steps.size()); }
  std::vector<int> measured_modes() const;
  bool has_gaussian_step() const;

  /// Ghat_n for a photon outcome prefix: layers up to and including the
  /// (prefix.size())-th conditioned gate, composed left to right.
  GaussianUnitary compose_photon_prefix(const std::vector<int>& prefix) const;

  /// Throws if measured modes collide, tables are incomplete for outcomes up
  /// to `cutoff`, or a later layer touches an already measured mode.
  void validate(int cutoff) const;
};

}  // namespace agsim

#endif  // AGSIM_ADAPTIVE_HPP
