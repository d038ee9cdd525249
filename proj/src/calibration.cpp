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

#include "dsk/calibration.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "dsk/hll.hpp"
#include "dsk/rng.hpp"

namespace dsk {

std::vector<uint64_t> default_calibration_grid(int p) {
  const uint64_t r = 1ull << p;
  const uint64_t top = 5 * r;
  std::vector<uint64_t> grid;
  for (uint64_t n = 1; n <= std::min<uint64_t>(40, top); ++n) grid.push_back(n);
  uint64_t n = grid.back();
  while (n < top) {
    n = std::max<uint64_t>(n + 1, static_cast<uint64_t>(std::ceil(1.15 * static_cast<double>(n))));
    grid.push_back(std::min(n, top));
  }
  return grid;
}

BetaCalibration calibrate_beta(int p, int trials_per_point,
                               std::span<const uint64_t> cardinality_grid, uint64_t rng_seed) {
  if (trials_per_point < 100) {
    throw std::invalid_argument("calibrate_beta: need at least 100 trials per grid point");
  }
  if (cardinality_grid.empty()) {
    throw std::invalid_argument("calibrate_beta: empty cardinality grid");
  }
  const std::array<double, 8> zero_beta{};
  const auto params = make_params_with_beta(p, rng_seed, zero_beta);
  const double r = static_cast<double>(params->r);
  const double alpha = params->alpha;

  // One row per trial with at least one zero register: target is the additive
  // correction that makes the estimator exact for that trial, weighted by the
  // estimator's sensitivity so that squared relative error is what is
  // minimized.
  std::vector<std::array<double, 8>> rows;
  std::vector<double> targets;
  SplitMix64 rng(rng_seed);
  for (const uint64_t n : cardinality_grid) {
    for (int trial = 0; trial < trials_per_point; ++trial) {
      const uint64_t base = rng.next();
      HllSketch sketch(params);
      for (uint64_t i = 0; i < n; ++i) sketch.insert(base + i);
      const double z = static_cast<double>(sketch.zero_count());
      if (z == 0.0) continue;
      double sum = z;
      if (sketch.mode() == HllSketch::Mode::sparse) {
        for (const auto& [index, value] : sketch.sparse_registers()) {
          sum += std::ldexp(1.0, -static_cast<int>(value));
        }
      } else {
        sum = 0.0;
        for (const uint8_t v : sketch.dense_registers()) {
          sum += std::ldexp(1.0, -static_cast<int>(v));
        }
      }
      const double numerator = alpha * r * (r - z);
      const double weight = static_cast<double>(n) / numerator;
      const double target = numerator / static_cast<double>(n) - sum;
      const double lnz1 = std::log1p(z);
      std::array<double, 8> row;
      row[0] = z;
      double pow = 1.0;
      for (int i = 1; i < 8; ++i) {
        pow *= lnz1;
        row[i] = pow;
      }
      for (double& v : row) v *= weight;
      rows.push_back(row);
      targets.push_back(target * weight);
    }
  }

  if (rows.size() < 8) {
    throw std::invalid_argument(
        "calibrate_beta: not enough informative trials; widen the cardinality grid");
  }
  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), 8);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < 8; ++j) design(static_cast<Eigen::Index>(i), j) = rows[i][j];
    rhs(static_cast<Eigen::Index>(i)) = targets[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < 8) {
    throw std::invalid_argument(
        "calibrate_beta: degenerate least-squares system (zero-register counts do not vary); "
        "widen the cardinality grid");
  }
  const Eigen::VectorXd solution = qr.solve(rhs);
  BetaCalibration calibration;
  calibration.p = p;
  for (int j = 0; j < 8; ++j) calibration.coeffs[static_cast<size_t>(j)] = solution(j);
  return calibration;
}

void save_calibration(const std::string& path, const BetaCalibration& calibration) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open calibration file for writing: " + path);
  out << "p=" << calibration.p << "\n";
  char buf[64];
  for (size_t i = 0; i < calibration.coeffs.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", calibration.coeffs[i]);
    out << (i == 0 ? "" : " ") << buf;
  }
  out << "\n";
  if (!out) throw std::runtime_error("failed writing calibration file: " + path);
}

BetaCalibration load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open calibration file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("p=", 0) != 0) {
    throw std::runtime_error("calibration file missing p= header: " + path);
  }
  BetaCalibration calibration;
  calibration.p = std::stoi(line.substr(2));
  if (!std::getline(in, line)) throw std::runtime_error("calibration file truncated: " + path);
  std::istringstream coeffs(line);
  for (double& c : calibration.coeffs) {
    if (!(coeffs >> c)) throw std::runtime_error("calibration file has fewer than 8 coefficients");
  }
  return calibration;
}

namespace {

// Produced by: dsk calibrate-beta --prefix-bits <p> --trials 100 --seed 42
// and committed under data/calibration/. Kept in sync with those files by a
// unit test.
const std::vector<BetaCalibration>& builtin_calibrations() {
  static const std::vector<BetaCalibration> calibrations = {
      {8,
       {-27.072401605131358, 44.349028798924785, -33.625249971904871, 55.133904531294171,
        -27.244392631698805, 9.0143084527536601, -1.419008138658941, 0.11146736601892417}},
      {12,
       {-2.3676111123317964, 1448.6349071481186, -1756.7620844898627, 884.80058369075152,
        -236.33406583901126, 35.584333354808798, -2.87270533383737, 0.099723462017999004}},
  };
  return calibrations;
}

std::map<int, BetaCalibration>& registry() {
  static std::map<int, BetaCalibration>* reg = [] {
    auto* m = new std::map<int, BetaCalibration>();
    for (const auto& c : builtin_calibrations()) (*m)[c.p] = c;
    return m;
  }();
  return *reg;
}

std::mutex& registry_mutex() {
  static std::mutex mu;
  return mu;
}

}  // namespace

const BetaCalibration& calibration_for(int p) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  auto& reg = registry();
  auto it = reg.find(p);
  if (it == reg.end()) {
    throw std::runtime_error(
        "no beta calibration for p=" + std::to_string(p) +
        "; run `dsk calibrate-beta --prefix-bits " + std::to_string(p) +
        "` and register the result, or use a calibrated prefix size (8 or 12)");
  }
  return it->second;
}

void register_calibration(const BetaCalibration& calibration) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  registry()[calibration.p] = calibration;
}

}  // namespace dsk
