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
#include <string>
#include <tuple>
#include <vector>

namespace dsk {

/// A flat keyed score table. Keys are (a) for vertex tables, (a, b) with
/// a < b for edge tables, and (a, t=b) for neighborhood tables.
struct ScoreTable {
  enum class Kind : uint8_t { vertex, edge, nbhd };

  Kind kind = Kind::vertex;
  std::vector<std::tuple<uint64_t, uint64_t, double>> rows;
};

/// CSV rows "v,value" / "u,v,value" / "x,t,value"; '#' lines skipped. The
/// kind disambiguates the 3-column layouts; pass nullopt to infer vertex vs
/// edge from the column count.
ScoreTable load_score_csv(const std::string& path, ScoreTable::Kind kind);
ScoreTable load_score_csv_infer(const std::string& path);

/// JSON-lines neighborhood estimates as written by the CLI: objects with
/// "x", "t", "est" (per-vertex rows; summary rows without "x" are skipped).
ScoreTable load_nbhd_jsonl(const std::string& path);

struct MreStats {
  double mre = 0.0;
  uint64_t counted = 0;     // rows with truth > 0
  uint64_t zero_truth = 0;  // rows excluded because truth == 0
};

struct PrecisionRecall {
  size_t k = 0;
  size_t k_prime = 0;
  uint64_t true_positives = 0;
  double precision = 0.0;
  double recall = 0.0;
};

struct EvalReport {
  ScoreTable::Kind kind = ScoreTable::Kind::vertex;
  MreStats overall;
  std::vector<std::pair<int, MreStats>> per_t;  // nbhd tables only
  std::vector<PrecisionRecall> precision_recall;
};

/// MRE of estimates against truth (zero-truth rows counted separately), plus
/// precision/recall of the estimated top-k' sets against the true top-k sets
/// for every (k, k') combination. Top-k sets are tie-broken (score desc, key
/// asc). Throws std::runtime_error listing up to ten estimate keys missing
/// from the truth table.
EvalReport evaluate(const ScoreTable& estimates, const ScoreTable& truth,
                    const std::vector<size_t>& ks, const std::vector<size_t>& k_primes);

std::string report_to_json(const EvalReport& report, const std::string& config_json);

}  // namespace dsk
