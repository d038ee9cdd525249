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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "dsk/eval.hpp"

using namespace dsk;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = "/tmp/dsk_eval_" + name;
  std::ofstream out(path);
  out << content;
  return path;
}

ScoreTable table_of(ScoreTable::Kind kind,
                    std::vector<std::tuple<uint64_t, uint64_t, double>> rows) {
  ScoreTable t;
  t.kind = kind;
  t.rows = std::move(rows);
  return t;
}

}  // namespace

TEST_CASE("csv loading infers vertex and edge layouts") {
  const std::string vpath = write_temp("v.csv", "# comment\n1,10.5\n2,3\n");
  const ScoreTable v = load_score_csv_infer(vpath);
  CHECK(v.kind == ScoreTable::Kind::vertex);
  REQUIRE(v.rows.size() == 2);
  CHECK(std::get<2>(v.rows[0]) == 10.5);

  const std::string epath = write_temp("e.csv", "2,1,5\n3,4,1\n");
  const ScoreTable e = load_score_csv_infer(epath);
  CHECK(e.kind == ScoreTable::Kind::edge);
  CHECK(std::get<0>(e.rows[0]) == 1);  // canonicalized
  CHECK(std::get<1>(e.rows[0]) == 2);

  const std::string bad = write_temp("bad.csv", "1,2\nx,y\n");
  CHECK_THROWS_AS(load_score_csv_infer(bad), std::runtime_error);
  CHECK_THROWS_AS(load_score_csv_infer("/missing/file.csv"), std::runtime_error);
}

TEST_CASE("nbhd jsonl loading keeps only per-vertex rows") {
  const std::string path = write_temp(
      "n.jsonl",
      "{\"config\":{}}\n{\"t\":1,\"global\":5.0}\n{\"x\":3,\"t\":1,\"est\":2.5}\n"
      "{\"x\":4,\"t\":2,\"est\":7.0}\n");
  const ScoreTable t = load_nbhd_jsonl(path);
  CHECK(t.kind == ScoreTable::Kind::nbhd);
  REQUIRE(t.rows.size() == 2);
  CHECK(std::get<0>(t.rows[0]) == 3);
  CHECK(std::get<1>(t.rows[1]) == 2);
}

TEST_CASE("identical tables score perfectly") {
  const auto truth = table_of(ScoreTable::Kind::edge,
                              {{1, 2, 5.0}, {1, 3, 4.0}, {2, 3, 3.0}, {3, 4, 1.0}});
  const EvalReport report = evaluate(truth, truth, {2}, {2});
  CHECK(report.overall.mre == 0.0);
  CHECK(report.overall.counted == 4);
  REQUIRE(report.precision_recall.size() == 1);
  CHECK(report.precision_recall[0].precision == 1.0);
  CHECK(report.precision_recall[0].recall == 1.0);
}

TEST_CASE("recall one, precision one half when k' doubles k") {
  const auto truth = table_of(ScoreTable::Kind::vertex,
                              {{1, 0, 10.0}, {2, 0, 9.0}, {3, 0, 2.0}, {4, 0, 1.0}});
  // Estimates reorder the tail but keep the true top-2 on top.
  const auto est = table_of(ScoreTable::Kind::vertex,
                            {{1, 0, 9.5}, {2, 0, 9.4}, {4, 0, 3.0}, {3, 0, 0.5}});
  const EvalReport report = evaluate(est, truth, {2}, {4});
  REQUIRE(report.precision_recall.size() == 1);
  CHECK(report.precision_recall[0].recall == 1.0);
  CHECK(report.precision_recall[0].precision == 0.5);
}

TEST_CASE("zero-truth rows are excluded and counted") {
  const auto truth = table_of(ScoreTable::Kind::vertex, {{1, 0, 0.0}, {2, 0, 4.0}});
  const auto est = table_of(ScoreTable::Kind::vertex, {{1, 0, 1.0}, {2, 0, 5.0}});
  const EvalReport report = evaluate(est, truth, {}, {});
  CHECK(report.overall.counted == 1);
  CHECK(report.overall.zero_truth == 1);
  CHECK(report.overall.mre == doctest::Approx(0.25));
}

TEST_CASE("estimate keys missing from the truth table raise an error") {
  const auto truth = table_of(ScoreTable::Kind::vertex, {{1, 0, 1.0}});
  const auto est = table_of(ScoreTable::Kind::vertex, {{1, 0, 1.0}, {9, 0, 2.0}});
  CHECK_THROWS_WITH_AS(evaluate(est, truth, {}, {}), doctest::Contains("(9,0)"),
                       std::runtime_error);
  const auto mixed = table_of(ScoreTable::Kind::edge, {{1, 2, 1.0}});
  CHECK_THROWS_AS(evaluate(mixed, truth, {}, {}), std::runtime_error);
}

TEST_CASE("per-t MRE grouping") {
  const auto truth = table_of(ScoreTable::Kind::nbhd,
                              {{1, 1, 4.0}, {2, 1, 4.0}, {1, 2, 10.0}, {2, 2, 10.0}});
  const auto est = table_of(ScoreTable::Kind::nbhd,
                            {{1, 1, 5.0}, {2, 1, 3.0}, {1, 2, 11.0}, {2, 2, 9.0}});
  const EvalReport report = evaluate(est, truth, {}, {});
  REQUIRE(report.per_t.size() == 2);
  CHECK(report.per_t[0].first == 1);
  CHECK(report.per_t[0].second.mre == doctest::Approx(0.25));
  CHECK(report.per_t[1].second.mre == doctest::Approx(0.10));
}

TEST_CASE("top-k ties break deterministically by key") {
  const auto truth = table_of(ScoreTable::Kind::vertex,
                              {{5, 0, 3.0}, {1, 0, 3.0}, {2, 0, 3.0}, {9, 0, 1.0}});
  const auto est = truth;
  // top-2 of the tied scores must be keys 1 and 2.
  const EvalReport report = evaluate(est, truth, {2}, {2});
  CHECK(report.precision_recall[0].true_positives == 2);
  CHECK(report.precision_recall[0].precision == 1.0);
}

TEST_CASE("json report renders and parses") {
  const auto truth = table_of(ScoreTable::Kind::edge, {{1, 2, 5.0}, {2, 3, 1.0}});
  const EvalReport report = evaluate(truth, truth, {1}, {1, 2});
  const std::string rendered = report_to_json(report, "{\"command\":\"eval\"}");
  const auto parsed = nlohmann::json::parse(rendered);
  CHECK(parsed["kind"] == "edge");
  CHECK(parsed["mre"] == 0.0);
  CHECK(parsed["precision_recall"].size() == 2);
  CHECK(parsed["config"]["command"] == "eval");
}
