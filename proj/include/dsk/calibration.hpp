/*
 * Copyright 2026 the degreesketch authors
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

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dsk {

/// Fitted coefficients of the estimator's bias polynomial for one prefix size.
struct BetaCalibration {
  int p = 0;
  std::array<double, 8> coeffs{};
};

/// Fits the bias polynomial for prefix size p by simulating sketches of known
/// cardinalities and solving a weighted least-squares problem on the implied
/// per-trial correction. The grid should span [1, 5 * 2^p]; trials with no
/// zero register carry no information about the polynomial and are skipped.
///
/// Deterministic given rng_seed. Throws std::invalid_argument when
/// trials_per_point < 100 or the design matrix is rank deficient (e.g. a
/// single-point grid where z never varies) with a hint to widen the grid.
BetaCalibration calibrate_beta(int p, int trials_per_point,
                               std::span<const uint64_t> cardinality_grid, uint64_t rng_seed);

/// Default grid: every cardinality in [1, 40], then geometric steps up to 5r.
std::vector<uint64_t> default_calibration_grid(int p);

/// Calibration file format: line 1 "p=<p>", line 2 the eight coefficients,
/// space separated, 17 significant digits.
void save_calibration(const std::string& path, const BetaCalibration& calibration);
BetaCalibration load_calibration(const std::string& path);

/// Returns the built-in calibration for p (committed files under
/// data/calibration, reproducible with tools/dsk calibrate-beta). Throws
/// std::runtime_error when none exists for this p.
const BetaCalibration& calibration_for(int p);

/// Registers a calibration at runtime (e.g. loaded from a file), replacing
/// any existing entry for the same p.
void register_calibration(const BetaCalibration& calibration);

}  // namespace dsk
