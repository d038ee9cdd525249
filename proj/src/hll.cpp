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

#include "dsk/hll.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>

#include "dsk/calibration.hpp"

namespace dsk {

namespace {

constexpr uint64_t kPrime1 = 0x9E3779B185EBCA87ULL;
constexpr uint64_t kPrime2 = 0xC2B2AE3D27D4EB4FULL;
constexpr uint64_t kPrime3 = 0x165667B19E3779F9ULL;
constexpr uint64_t kPrime4 = 0x85EBCA77C2B2AE63ULL;
constexpr uint64_t kPrime5 = 0x27D4EB2F165667C5ULL;

}  // namespace

uint64_t hash_u64(uint64_t x, uint64_t seed) {
  // XXH64 specialized to an 8-byte input.
  uint64_t h = seed + kPrime5 + 8;
  uint64_t k = x * kPrime2;
  k = std::rotl(k, 31);
  k *= kPrime1;
  h ^= k;
  h = std::rotl(h, 27) * kPrime1 + kPrime4;
  h ^= h >> 33;
  h *= kPrime2;
  h ^= h >> 29;
  h *= kPrime3;
  h ^= h >> 32;
  return h;
}

namespace {

double alpha_integrand(double s, double r) {
  // log2((2 + u) / (1 + u)) raised to the r-th power, with u = s / r so the
  // integrand decays on an O(1) scale in s for every r.
  const double u = s / r;
  const double f = std::log2((2.0 + u) / (1.0 + u));
  return std::exp(r * std::log(f));
}

double adaptive_simpson(double a, double b, double fa, double fm, double fb, double whole,
                        double tol, int depth, double r) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = alpha_integrand(lm, r);
  const double frm = alpha_integrand(rm, r);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, r) +
         adaptive_simpson(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, r);
}

double compute_alpha(uint32_t r) {
  // alpha_r = 1 / integral_0^inf log2((2+u)/(1+u))^r du, after substituting
  // u = s/r the integral in s converges within a few hundred units.
  const double rd = static_cast<double>(r);
  double integral = 0.0;
  // Panels keep the adaptive refinement local to where the integrand varies.
  const double breaks[] = {0.0, 2.0, 8.0, 32.0, 128.0, 400.0};
  for (size_t i = 0; i + 1 < sizeof(breaks) / sizeof(breaks[0]); ++i) {
    const double a = breaks[i], b = breaks[i + 1];
    const double fa = alpha_integrand(a, rd);
    const double fb = alpha_integrand(b, rd);
    const double fm = alpha_integrand(0.5 * (a + b), rd);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    integral += adaptive_simpson(a, b, fa, fm, fb, whole, 1e-10, 24, rd);
  }
  return 1.0 / integral;
}

}  // namespace

double hll_alpha(uint32_t r) {
  static std::mutex mu;
  static std::map<uint32_t, double> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(r);
  if (it != cache.end()) return it->second;
  const double a = compute_alpha(r);
  cache.emplace(r, a);
  return a;
}

HllParams HllParams::with_beta(int p, uint64_t hash_seed, const std::array<double, 8>& beta) {
  if (p < 4 || p > 16) throw std::invalid_argument("prefix size p must be in [4, 16]");
  HllParams params;
  params.p = p;
  params.q = 64 - p;
  params.r = 1u << p;
  params.hash_seed = hash_seed;
  params.alpha = hll_alpha(params.r);
  params.beta = beta;
  return params;
}

HllParams HllParams::calibrated(int p, uint64_t hash_seed) {
  return with_beta(p, hash_seed, calibration_for(p).coeffs);
}

HllParamsPtr make_params(int p, uint64_t hash_seed) {
  return std::make_shared<const HllParams>(HllParams::calibrated(p, hash_seed));
}

HllParamsPtr make_params_with_beta(int p, uint64_t hash_seed, const std::array<double, 8>& beta) {
  return std::make_shared<const HllParams>(HllParams::with_beta(p, hash_seed, beta));
}

HllSketch::HllSketch(HllParamsPtr params) : params_(std::move(params)), z_(params_->r) {}

void HllSketch::insert(uint64_t element) {
  const auto [index, rank] = hash_split(element, *params_);
  insert_register(index, rank);
}

void HllSketch::insert_register(uint32_t index, uint8_t value) {
  if (value == 0) return;
  if (mode_ == Mode::dense) {
    uint8_t& reg = dense_[index];
    if (reg == 0 && value > 0) --z_;
    reg = std::max(reg, value);
    return;
  }
  const auto key = static_cast<uint16_t>(index);
  auto it = std::lower_bound(sparse_.begin(), sparse_.end(), key,
                             [](const auto& entry, uint16_t k) { return entry.first < k; });
  if (it != sparse_.end() && it->first == key) {
    it->second = std::max(it->second, value);
  } else {
    sparse_.insert(it, {key, value});
    --z_;
    if (sparse_.size() > params_->r / 4) saturate();
  }
}

uint8_t HllSketch::register_value(uint32_t index) const {
  if (mode_ == Mode::dense) return dense_[index];
  const auto key = static_cast<uint16_t>(index);
  auto it = std::lower_bound(sparse_.begin(), sparse_.end(), key,
                             [](const auto& entry, uint16_t k) { return entry.first < k; });
  if (it != sparse_.end() && it->first == key) return it->second;
  return 0;
}

void HllSketch::saturate() {
  if (mode_ == Mode::dense) throw std::logic_error("saturate() on a dense sketch");
  dense_.assign(params_->r, 0);
  for (const auto& [index, value] : sparse_) dense_[index] = value;
  sparse_.clear();
  sparse_.shrink_to_fit();
  mode_ = Mode::dense;
}

void HllSketch::merge_from(const HllSketch& other) {
  if (!params_->compatible_with(*other.params_)) {
    throw std::invalid_argument("merging sketches with different parameters");
  }
  if (other.mode_ == Mode::sparse) {
    for (const auto& [index, value] : other.sparse_) insert_register(index, value);
  } else {
    for (uint32_t i = 0; i < params_->r; ++i) {
      if (other.dense_[i] != 0) insert_register(i, other.dense_[i]);
    }
  }
}

HllSketch HllSketch::merge(std::span<const HllSketch> sketches) {
  if (sketches.empty()) throw std::invalid_argument("merge of zero sketches");
  HllSketch out(sketches.front().params_ptr());
  for (const auto& s : sketches) out.merge_from(s);
  return out;
}

double HllSketch::estimate() const {
  const double r = static_cast<double>(params_->r);
  const double z = static_cast<double>(z_);
  // Zero registers contribute 2^0 each; summing them first and the nonzero
  // registers in index order keeps the two representations bit-identical.
  double sum = z;
  if (mode_ == Mode::dense) {
    for (const uint8_t v : dense_) {
      if (v != 0) sum += std::ldexp(1.0, -static_cast<int>(v));
    }
  } else {
    for (const auto& [index, value] : sparse_) sum += std::ldexp(1.0, -static_cast<int>(value));
  }
  const double lnz1 = std::log1p(z);
  double beta = params_->beta[0] * z;
  double pow = 1.0;
  for (int i = 1; i < 8; ++i) {
    pow *= lnz1;
    beta += params_->beta[i] * pow;
  }
  return params_->alpha * r * (r - z) / (beta + sum);
}

bool HllSketch::register_equal(const HllSketch& other) const {
  if (params_->r != other.params_->r) return false;
  if (z_ != other.z_) return false;
  if (mode_ == Mode::sparse && other.mode_ == Mode::sparse) return sparse_ == other.sparse_;
  for (uint32_t i = 0; i < params_->r; ++i) {
    if (register_value(i) != other.register_value(i)) return false;
  }
  return true;
}

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 24));
}

uint32_t get_u32(std::span<const uint8_t> bytes, size_t offset) {
  return static_cast<uint32_t>(bytes[offset]) | static_cast<uint32_t>(bytes[offset + 1]) << 8 |
         static_cast<uint32_t>(bytes[offset + 2]) << 16 |
         static_cast<uint32_t>(bytes[offset + 3]) << 24;
}

}  // namespace

void HllSketch::serialize_into(std::vector<uint8_t>& out) const {
  out.push_back(static_cast<uint8_t>(mode_));
  put_u32(out, z_);
  if (mode_ == Mode::dense) {
    out.insert(out.end(), dense_.begin(), dense_.end());
  } else {
    put_u32(out, static_cast<uint32_t>(sparse_.size()));
    for (const auto& [index, value] : sparse_) {
      out.push_back(static_cast<uint8_t>(index));
      out.push_back(static_cast<uint8_t>(index >> 8));
      out.push_back(value);
    }
  }
}

std::vector<uint8_t> HllSketch::serialize() const {
  std::vector<uint8_t> out;
  serialize_into(out);
  return out;
}

HllSketch HllSketch::deserialize(std::span<const uint8_t> bytes, HllParamsPtr params) {
  if (bytes.size() < 5) throw std::runtime_error("truncated sketch bytes");
  HllSketch sketch(std::move(params));
  const auto mode = static_cast<Mode>(bytes[0]);
  const uint32_t z = get_u32(bytes, 1);
  if (mode == Mode::dense) {
    const uint32_t r = sketch.params_->r;
    if (bytes.size() != 5 + r) throw std::runtime_error("bad dense sketch length");
    sketch.dense_.assign(bytes.begin() + 5, bytes.end());
    sketch.mode_ = Mode::dense;
  } else {
    const uint32_t count = get_u32(bytes, 5);
    if (bytes.size() != 9 + 3 * static_cast<size_t>(count)) {
      throw std::runtime_error("bad sparse sketch length");
    }
    sketch.sparse_.reserve(count);
    uint32_t prev_index = 0;
    for (uint32_t i = 0; i < count; ++i) {
      const size_t off = 9 + 3 * static_cast<size_t>(i);
      const uint16_t index = static_cast<uint16_t>(bytes[off]) |
                             static_cast<uint16_t>(bytes[off + 1]) << 8;
      const uint8_t value = bytes[off + 2];
      if (i > 0 && index <= prev_index) throw std::runtime_error("sparse indices not ascending");
      if (value == 0) throw std::runtime_error("zero-valued sparse register");
      prev_index = index;
      sketch.sparse_.push_back({index, value});
    }
  }
  sketch.z_ = z;
  const uint32_t nonzero = sketch.mode_ == Mode::dense
                               ? static_cast<uint32_t>(std::count_if(
                                     sketch.dense_.begin(), sketch.dense_.end(),
                                     [](uint8_t v) { return v != 0; }))
                               : static_cast<uint32_t>(sketch.sparse_.size());
  if (z != sketch.params_->r - nonzero) throw std::runtime_error("sketch z field inconsistent");
  return sketch;
}

}  // namespace dsk
