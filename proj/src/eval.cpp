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

#include "dsk/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace dsk {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

ScoreTable load_csv(const std::string& path, std::optional<ScoreTable::Kind> kind) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open table: " + path);
  ScoreTable table;
  bool kind_known = kind.has_value();
  if (kind_known) table.kind = *kind;
  std::string line;
  uint64_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const size_t pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2 && fields.size() != 3) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) + ": expected 2 or 3 columns");
    }
    // Skip a non-numeric header row.
    if (line_number == 1 && !fields.empty() &&
        fields[0].find_first_not_of("0123456789 \t") != std::string::npos) {
      continue;
    }
    if (!kind_known) {
      table.kind = fields.size() == 2 ? ScoreTable::Kind::vertex : ScoreTable::Kind::edge;
      kind_known = true;
    }
    try {
      if (table.kind == ScoreTable::Kind::vertex) {
        if (fields.size() != 2) throw std::invalid_argument("columns");
        table.rows.emplace_back(std::stoull(fields[0]), 0, std::stod(fields[1]));
      } else {
        if (fields.size() != 3) throw std::invalid_argument("columns");
        uint64_t a = std::stoull(fields[0]);
        uint64_t b = std::stoull(fields[1]);
        if (table.kind == ScoreTable::Kind::edge && a > b) std::swap(a, b);
        table.rows.emplace_back(a, b, std::stod(fields[2]));
      }
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) + ": malformed row");
    }
  }
  return table;
}

}  // namespace

ScoreTable load_score_csv(const std::string& path, ScoreTable::Kind kind) {
  return load_csv(path, kind);
}

ScoreTable load_score_csv_infer(const std::string& path) { return load_csv(path, std::nullopt); }

ScoreTable load_nbhd_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open table: " + path);
  ScoreTable table;
  table.kind = ScoreTable::Kind::nbhd;
  std::string line;
  uint64_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) + ": malformed JSON line");
    }
    if (!row.contains("x") || !row.contains("t") || !row.contains("est")) continue;
    table.rows.emplace_back(row["x"].get<uint64_t>(), row["t"].get<uint64_t>(),
                            row["est"].get<double>());
  }
  return table;
}

namespace {

using Key = std::pair<uint64_t, uint64_t>;

std::vector<Key> topk_keys(const std::vector<std::tuple<uint64_t, uint64_t, double>>& rows,
                           size_t k) {
  std::vector<std::tuple<uint64_t, uint64_t, double>> sorted = rows;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    const double sa = std::get<2>(a), sb = std::get<2>(b);
    if (sa != sb) return sa > sb;
    return Key{std::get<0>(a), std::get<1>(a)} < Key{std::get<0>(b), std::get<1>(b)};
  });
  if (sorted.size() > k) sorted.resize(k);
  std::vector<Key> keys;
  keys.reserve(sorted.size());
  for (const auto& row : sorted) keys.emplace_back(std::get<0>(row), std::get<1>(row));
  return keys;
}

struct KeyHash {
  size_t operator()(const Key& k) const {
    return std::hash<uint64_t>()(k.first * 0x9E3779B97F4A7C15ULL ^ k.second);
  }
};

}  // namespace

EvalReport evaluate(const ScoreTable& estimates, const ScoreTable& truth,
                    const std::vector<size_t>& ks, const std::vector<size_t>& k_primes) {
  if (estimates.kind != truth.kind) {
    throw std::runtime_error("estimate and truth tables have different key kinds");
  }
  EvalReport report;
  report.kind = estimates.kind;

  std::unordered_map<Key, double, KeyHash> truth_by_key;
  truth_by_key.reserve(truth.rows.size());
  for (const auto& [a, b, value] : truth.rows) truth_by_key[{a, b}] = value;

  std::vector<Key> missing;
  std::map<int, MreStats> per_t;
  double total_re = 0.0;
  for (const auto& [a, b, est] : estimates.rows) {
    const auto it = truth_by_key.find({a, b});
    if (it == truth_by_key.end()) {
      if (missing.size() < 10) missing.push_back({a, b});
      continue;
    }
    const double t_value = it->second;
    MreStats* bucket = nullptr;
    if (estimates.kind == ScoreTable::Kind::nbhd) bucket = &per_t[static_cast<int>(b)];
    if (t_value == 0.0) {
      ++report.overall.zero_truth;
      if (bucket != nullptr) ++bucket->zero_truth;
      continue;
    }
    const double re = std::fabs(t_value - est) / std::fabs(t_value);
    total_re += re;
    ++report.overall.counted;
    if (bucket != nullptr) {
      bucket->mre += re;
      ++bucket->counted;
    }
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "estimate table has keys missing from the truth table:";
    for (const auto& [a, b] : missing) msg << " (" << a << "," << b << ")";
    throw std::runtime_error(msg.str());
  }
  if (report.overall.counted > 0) {
    report.overall.mre = total_re / static_cast<double>(report.overall.counted);
  }
  for (auto& [t, stats] : per_t) {
    if (stats.counted > 0) stats.mre /= static_cast<double>(stats.counted);
    report.per_t.emplace_back(t, stats);
  }

  for (const size_t k : ks) {
    if (k == 0) continue;
    const auto true_top = topk_keys(truth.rows, k);
    const std::set<Key> true_set(true_top.begin(), true_top.end());
    for (const size_t k_prime : k_primes) {
      if (k_prime == 0) continue;
      const auto est_top = topk_keys(estimates.rows, k_prime);
      uint64_t tp = 0;
      for (const Key& key : est_top) tp += true_set.count(key);
      PrecisionRecall pr;
      pr.k = k;
      pr.k_prime = k_prime;
      pr.true_positives = tp;
      pr.precision = est_top.empty() ? 0.0 : static_cast<double>(tp) / est_top.size();
      pr.recall = true_top.empty() ? 0.0 : static_cast<double>(tp) / true_top.size();
      report.precision_recall.push_back(pr);
    }
  }
  return report;
}

std::string report_to_json(const EvalReport& report, const std::string& config_json) {
  nlohmann::json j;
  if (!config_json.empty()) j["config"] = nlohmann::json::parse(config_json);
  switch (report.kind) {
    case ScoreTable::Kind::vertex: j["kind"] = "vertex"; break;
    case ScoreTable::Kind::edge: j["kind"] = "edge"; break;
    case ScoreTable::Kind::nbhd: j["kind"] = "nbhd"; break;
  }
  j["mre"] = report.overall.mre;
  j["rows_counted"] = report.overall.counted;
  j["rows_zero_truth"] = report.overall.zero_truth;
  if (!report.per_t.empty()) {
    nlohmann::json per_t = nlohmann::json::array();
    for (const auto& [t, stats] : report.per_t) {
      per_t.push_back({{"t", t},
                       {"mre", stats.mre},
                       {"rows_counted", stats.counted},
                       {"rows_zero_truth", stats.zero_truth}});
    }
    j["per_t"] = per_t;
  }
  if (!report.precision_recall.empty()) {
    nlohmann::json pr = nlohmann::json::array();
    for (const auto& row : report.precision_recall) {
      pr.push_back({{"k", row.k},
                    {"k_prime", row.k_prime},
                    {"true_positives", row.true_positives},
                    {"precision", row.precision},
                    {"recall", row.recall}});
    }
    j["precision_recall"] = pr;
  }
  return j.dump(2);
}

}  // namespace dsk
