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

#include <cstdint>
#include <vector>

#include "dsk/hll.hpp"

namespace dsk {

/// Per-register-value tallies comparing two sketches with shared parameters.
/// For value k in [0, q+1]:
///   a_less[k]    = #registers where A's value is k and k < B's value
///   a_greater[k] = #registers where A's value is k and k > B's value
///   b_less[k]    = #registers where B's value is k and k < A's value
///   b_greater[k] = #registers where B's value is k and k > A's value
///   equal[k]     = #registers where both values are k
struct CountStats {
  int q = 0;
  uint32_t r = 0;
  std::vector<uint32_t> a_less, a_greater, b_less, b_greater, equal;
};

enum class Domination : uint8_t {
  none = 0,
  a_dominates_b,
  a_strictly_dominates_b,
  b_dominates_a,
  b_strictly_dominates_a,
};

enum class IntersectionMethod : uint8_t { inclusion_exclusion, mle };

struct IntersectionEstimate {
  double lambda_a = 0.0;  // |A \ B|
  double lambda_b = 0.0;  // |B \ A|
  double lambda_x = 0.0;  // |A intersect B|
  // Pre-clamp values, kept for diagnostics (inclusion-exclusion can go
  // negative; the MLE never does).
  double raw_lambda_a = 0.0;
  double raw_lambda_b = 0.0;
  double raw_lambda_x = 0.0;
  IntersectionMethod method = IntersectionMethod::inclusion_exclusion;
  Domination domination = Domination::none;
  bool converged = true;
  int iterations = 0;
};

const char* to_string(Domination d);

/// Exact tallies over the r register pairs. Sparse sketches are read with
/// absent entries as zero. Throws std::invalid_argument on parameter mismatch.
CountStats count_stats(const HllSketch& a, const HllSketch& b);

/// Register-wise domination relation. Strict domination takes precedence;
/// register-equal sketches report a_dominates_b.
Domination detect_domination(const CountStats& stats);

/// Inclusion-exclusion on the three cardinality estimates (A, B, and their
/// merge), clamped at zero.
IntersectionEstimate estimate_intersection_ie(const HllSketch& a, const HllSketch& b);

/// Maximum-likelihood estimate of (|A \ B|, |B \ A|, |A intersect B|) under
/// the Poisson register model, computed from the count statistics alone.
/// Initialized from the inclusion-exclusion estimate; stops when the relative
/// change of all three values drops below 1e-4 or after 200 iterations
/// (converged = false). Strict domination also forces converged = false since
/// the likelihood is then flat in the intersection.
IntersectionEstimate estimate_intersection_mle(const HllSketch& a, const HllSketch& b);
IntersectionEstimate estimate_intersection_mle(const CountStats& stats, const HllParams& params,
                                               const IntersectionEstimate& init);

/// Negative log-likelihood of the count statistics and its gradient with
/// respect to the per-register rates (lambda / r). Exposed for tests.
double intersection_nll(const CountStats& stats, double rate_a, double rate_b, double rate_x,
                        double grad[3]);

}  // namespace dsk
