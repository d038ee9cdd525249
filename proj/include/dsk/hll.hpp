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
#include <bit>
#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace dsk {

// XXH64 of the 8-byte little-endian encoding of x. All sketch operations
// funnel through this; the seed pins the hash function for a whole run.
uint64_t hash_u64(uint64_t x, uint64_t seed);

/// Bias correction constant alpha_r, computed by adaptive quadrature of the
/// defining integral. Cached per register count. Requires r = 2^p, p in [4,16].
double hll_alpha(uint32_t r);

/// Configuration shared by every sketch in a run: prefix size p (register
/// index bits), rank budget q = 64 - p, hash seed, and the fitted bias
/// polynomial for the small/mid-range estimator.
///
/// beta(z) = beta[0]*z + sum_{i=1..7} beta[i] * ln(z+1)^i, so beta(0) = 0 and
/// the raw harmonic-mean estimator is recovered once no register is zero.
struct HllParams {
  int p = 0;
  int q = 0;
  uint32_t r = 0;
  uint64_t hash_seed = 0;
  double alpha = 0.0;
  std::array<double, 8> beta{};

  /// Constructs params with explicit beta coefficients.
  /// Throws std::invalid_argument unless 4 <= p <= 16.
  static HllParams with_beta(int p, uint64_t hash_seed, const std::array<double, 8>& beta);

  /// Constructs params using the calibration registry (committed calibrations
  /// ship for p = 8 and p = 12). Throws std::runtime_error when no calibration
  /// is known for this p.
  static HllParams calibrated(int p, uint64_t hash_seed);

  bool compatible_with(const HllParams& o) const {
    return p == o.p && q == o.q && hash_seed == o.hash_seed;
  }
};

using HllParamsPtr = std::shared_ptr<const HllParams>;

HllParamsPtr make_params(int p, uint64_t hash_seed);
HllParamsPtr make_params_with_beta(int p, uint64_t hash_seed, const std::array<double, 8>& beta);

/// Splits the hash of an element into (register index, rank).
/// index = top p bits; rank = leading zeros of the remaining q bits plus one,
/// q + 1 when all q bits are zero.
inline std::pair<uint32_t, uint8_t> hash_split(uint64_t element, const HllParams& params) {
  const uint64_t h = hash_u64(element, params.hash_seed);
  const auto index = static_cast<uint32_t>(h >> params.q);
  const uint64_t suffix = h << params.p;
  const uint8_t rank = suffix == 0 ? static_cast<uint8_t>(params.q + 1)
                                   : static_cast<uint8_t>(std::countl_zero(suffix) + 1);
  return {index, rank};
}

/// A single HyperLogLog sketch with a sparse (sorted index/value pairs) and a
/// dense (full register array) representation. Sketches start sparse and
/// saturate to dense once more than r/4 registers are occupied.
class HllSketch {
 public:
  enum class Mode : uint8_t { sparse = 0, dense = 1 };

  explicit HllSketch(HllParamsPtr params);

  const HllParams& params() const { return *params_; }
  const HllParamsPtr& params_ptr() const { return params_; }
  Mode mode() const { return mode_; }
  uint32_t zero_count() const { return z_; }
  bool empty() const { return z_ == params_->r; }

  void insert(uint64_t element);

  /// Applies max(register[index], value) directly. value may be 0 (no-op).
  void insert_register(uint32_t index, uint8_t value);

  uint8_t register_value(uint32_t index) const;

  /// Materializes the dense array from the sparse set.
  /// Throws std::logic_error if already dense.
  void saturate();

  /// Register-wise max merge of another sketch into this one.
  /// Throws std::invalid_argument on parameter mismatch.
  void merge_from(const HllSketch& other);

  static HllSketch merge(std::span<const HllSketch> sketches);

  /// LogLogBeta cardinality estimate. Zero registers contribute 2^0 to the
  /// harmonic sum in both representations.
  double estimate() const;

  bool register_equal(const HllSketch& other) const;

  /// Wire format: mode tag (1 byte) | z (4 bytes LE) | dense: r register
  /// bytes; sparse: count (4 bytes LE) then (index 2 bytes LE, value 1 byte)
  /// pairs in ascending index order.
  std::vector<uint8_t> serialize() const;
  void serialize_into(std::vector<uint8_t>& out) const;
  static HllSketch deserialize(std::span<const uint8_t> bytes, HllParamsPtr params);

  const std::vector<std::pair<uint16_t, uint8_t>>& sparse_registers() const { return sparse_; }
  const std::vector<uint8_t>& dense_registers() const { return dense_; }

 private:
  HllParamsPtr params_;
  Mode mode_ = Mode::sparse;
  uint32_t z_ = 0;
  std::vector<uint8_t> dense_;
  std::vector<std::pair<uint16_t, uint8_t>> sparse_;  // sorted by index, values > 0
};

}  // namespace dsk
