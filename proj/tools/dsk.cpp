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

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "dsk/calibration.hpp"
#include "dsk/cluster.hpp"
#include "dsk/degreesketch.hpp"
#include "dsk/eval.hpp"
#include "dsk/graph.hpp"
#include "dsk/hll.hpp"
#include "dsk/intersect.hpp"

namespace {

using nlohmann::json;

constexpr uint64_t kPartitionerSalt = 0x517cc1b727220a95ULL;

struct RunConfig {
  std::string command;
  std::string graph_path;
  std::string store_prefix;
  std::string out_path;
  int prefix_bits = 12;
  uint64_t seed = 1;
  uint32_t workers = 1;
  std::string partitioner = "rr";
  std::string estimator = "mle";
  bool drop_dominated = false;
  int t_max = 3;
  size_t k = 10;
  std::vector<size_t> heap_k = {10};
  bool dense_only = false;
  bool full_table = false;
  bool save_layers = false;
  bool threads = false;
  uint64_t scheduler_seed = 0;

  json to_json() const {
    return json{{"command", command},
                {"graph", graph_path},
                {"store", store_prefix},
                {"out", out_path},
                {"prefix_bits", prefix_bits},
                {"seed", seed},
                {"workers", workers},
                {"partitioner", partitioner},
                {"estimator", estimator},
                {"drop_dominated", drop_dominated},
                {"t_max", t_max},
                {"k", k},
                {"heap_k", heap_k},
                {"dense_only", dense_only},
                {"full_table", full_table},
                {"threads", threads},
                {"scheduler_seed", scheduler_seed}};
  }
};

dsk::Partitioner make_partitioner(const RunConfig& config, uint64_t sketch_seed) {
  dsk::Partitioner f;
  f.mode = config.partitioner == "hash" ? dsk::Partitioner::Mode::hash
                                        : dsk::Partitioner::Mode::round_robin;
  f.workers = config.workers;
  f.hash_seed = dsk::hash_u64(sketch_seed, kPartitionerSalt);
  return f;
}

dsk::Cluster make_cluster(const RunConfig& config) {
  dsk::ClusterConfig cc;
  cc.workers = config.workers;
  cc.scheduler_seed = config.scheduler_seed;
  cc.mode = config.threads ? dsk::ClusterConfig::Mode::threads
                           : dsk::ClusterConfig::Mode::deterministic;
  return dsk::Cluster(cc);
}

dsk::HeavyHitterOptions make_hh_options(const RunConfig& config) {
  dsk::HeavyHitterOptions options;
  options.heap_k = config.heap_k.empty() ? config.k : config.heap_k.front();
  options.estimator = config.estimator == "ie" ? dsk::IntersectionMethod::inclusion_exclusion
                                               : dsk::IntersectionMethod::mle;
  options.domination =
      config.drop_dominated ? dsk::DominationPolicy::drop : dsk::DominationPolicy::keep;
  options.full_table = config.full_table;
  return options;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  return out;
}

dsk::DistributedStore load_store_with_config(const RunConfig& config) {
  // Probe once to learn the stored hash seed, then reload with the real
  // partitioner, whose hash mode is derived from that seed.
  const dsk::Partitioner probe = make_partitioner(config, 0);
  const dsk::DistributedStore probed = dsk::load_store(config.store_prefix, 1, probe);
  const dsk::Partitioner partitioner = make_partitioner(config, probed.params->hash_seed);
  return dsk::load_store(config.store_prefix, 1, partitioner);
}

int cmd_accumulate(const RunConfig& config) {
  const dsk::EdgeList graph = dsk::parse_edge_stream(config.graph_path);
  const auto params = dsk::make_params(config.prefix_bits, config.seed);
  const auto partitioner = make_partitioner(config, config.seed);
  dsk::Cluster cluster = make_cluster(config);
  const dsk::DistributedStore store = dsk::accumulate(graph, params, partitioner, cluster);
  dsk::save_store(store, config.out_path);
  std::ofstream meta = open_out(config.out_path + ".json");
  json j = config.to_json();
  j["vertices"] = store.size();
  j["edges"] = graph.edges.size();
  meta << j.dump(2) << "\n";
  std::cout << "accumulated " << store.size() << " vertex sketches from "
            << graph.edges.size() << " edges into " << config.out_path << ".t1.w*.dgsk\n";
  return 0;
}

int cmd_nbhd(const RunConfig& config) {
  const dsk::EdgeList graph = dsk::parse_edge_stream(config.graph_path);
  const dsk::DistributedStore store = load_store_with_config(config);
  dsk::Cluster cluster = make_cluster(config);

  dsk::NeighborhoodOptions options;
  options.t_max = config.t_max;
  options.dense_only = config.dense_only;
  options.keep_layers = config.save_layers;
  const dsk::NeighborhoodResult result =
      dsk::estimate_neighborhoods(graph, store, options, cluster);

  std::ofstream out = open_out(config.out_path);
  out << json{{"config", config.to_json()}}.dump() << "\n";
  for (const auto& layer : result.layers) {
    out << json{{"t", layer.t}, {"global", layer.global}, {"wall_seconds", layer.wall_seconds}}
               .dump()
        << "\n";
    for (const auto& [x, est] : layer.per_vertex) {
      out << json{{"x", x}, {"t", layer.t}, {"est", est}}.dump() << "\n";
    }
  }
  if (config.save_layers) {
    for (const auto& layer_store : result.stores) dsk::save_store(layer_store, config.out_path);
  }
  for (const auto& layer : result.layers) {
    std::cout << "t=" << layer.t << " global=" << layer.global << " (" << layer.wall_seconds
              << "s)\n";
  }
  return 0;
}

template <typename Result>
void write_hh_csv(const RunConfig& config, const Result& result) {
  std::ofstream out = open_out(config.out_path);
  out << "# config " << config.to_json().dump() << "\n";
  out << "# global_estimate " << result.global << "\n";
  out << "# domination_events " << result.domination_events << "\n";
  out << "# nonconverged_events " << result.nonconverged_events << "\n";
  char buf[64];
  for (const auto& entry : result.top) {
    std::snprintf(buf, sizeof(buf), "%.17g", entry.score);
    if constexpr (std::is_same_v<std::decay_t<decltype(entry.id)>, dsk::Edge>) {
      out << entry.id.u << "," << entry.id.v << "," << buf << "\n";
    } else {
      out << entry.id << "," << buf << "\n";
    }
  }
  if (result.full_table.has_value()) {
    std::ofstream full = open_out(config.out_path + ".full.csv");
    full << "# config " << config.to_json().dump() << "\n";
    for (const auto& [key, value] : *result.full_table) {
      std::snprintf(buf, sizeof(buf), "%.17g", value);
      if constexpr (std::is_same_v<std::decay_t<decltype(key)>, dsk::Edge>) {
        full << key.u << "," << key.v << "," << buf << "\n";
      } else {
        full << key << "," << buf << "\n";
      }
    }
  }
}

int cmd_hh(const RunConfig& config, bool vertex_local) {
  const dsk::EdgeList graph = dsk::parse_edge_stream(config.graph_path);
  const dsk::DistributedStore store = load_store_with_config(config);
  dsk::Cluster cluster = make_cluster(config);
  const auto options = make_hh_options(config);
  if (vertex_local) {
    const auto result = dsk::vertex_heavy_hitters(graph, store, options, cluster);
    write_hh_csv(config, result);
    std::cout << "global_estimate=" << result.global << " top=" << result.top.size() << " ("
              << result.wall_seconds << "s)\n";
  } else {
    const auto result = dsk::edge_heavy_hitters(graph, store, options, cluster);
    write_hh_csv(config, result);
    std::cout << "global_estimate=" << result.global << " top=" << result.top.size() << " ("
              << result.wall_seconds << "s)\n";
  }
  return 0;
}

int cmd_kron(const RunConfig& config, const std::string& factor2_path) {
  dsk::KroneckerSpec spec;
  spec.factor1 = dsk::parse_edge_stream(config.graph_path);
  spec.factor2 = factor2_path.empty() ? spec.factor1 : dsk::parse_edge_stream(factor2_path);
  const dsk::EdgeList product = dsk::kronecker_product(spec);
  dsk::write_edge_list(config.out_path + ".txt", product,
                       "kronecker product; config " + config.to_json().dump());

  auto table = dsk::kron_edge_triangle_table(spec);
  std::sort(table.begin(), table.end());
  uint64_t total = 0;
  std::ofstream edges = open_out(config.out_path + ".edge_truth.csv");
  edges << "# config " << config.to_json().dump() << "\n";
  for (const auto& [edge, count] : table) {
    edges << edge.u << "," << edge.v << "," << count << "\n";
    total += count;
  }
  std::map<dsk::VertexId, uint64_t> vertex_counts;
  for (const auto& [edge, count] : table) {
    vertex_counts[edge.u] += count;
    vertex_counts[edge.v] += count;
  }
  std::ofstream vertices = open_out(config.out_path + ".vertex_truth.csv");
  vertices << "# config " << config.to_json().dump() << "\n";
  vertices << "# global_triangles " << total / 3 << "\n";
  for (const auto& [v, doubled] : vertex_counts) vertices << v << "," << doubled / 2 << "\n";
  std::cout << "product: " << product.edges.size() << " edges, global triangles " << total / 3
            << "\n";
  return 0;
}

int cmd_oracle(const RunConfig& config, const std::string& what) {
  const dsk::EdgeList graph = dsk::parse_edge_stream(config.graph_path);
  const dsk::OracleGraph oracle(graph);
  std::ofstream out = open_out(config.out_path);
  out << "# config " << config.to_json().dump() << "\n";
  if (what == "nbhd") {
    for (const auto& [x, t, size] : oracle.neighborhood_table(config.t_max)) {
      out << x << "," << t << "," << size << "\n";
    }
  } else if (what == "edge-tri") {
    auto table = oracle.edge_triangle_table();
    std::sort(table.begin(), table.end());
    for (const auto& [edge, count] : table) out << edge.u << "," << edge.v << "," << count << "\n";
  } else if (what == "vertex-tri") {
    for (const auto& [v, count] : oracle.vertex_triangle_table()) out << v << "," << count << "\n";
  } else if (what == "global") {
    out << oracle.global_triangles() << "\n";
  } else {
    throw std::invalid_argument("--what must be one of nbhd, edge-tri, vertex-tri, global");
  }
  return 0;
}

int cmd_eval(const RunConfig& config, const std::string& estimates_path,
             const std::string& truth_path, const std::string& kind_flag) {
  dsk::ScoreTable estimates;
  {
    std::ifstream probe(estimates_path);
    if (!probe) throw std::runtime_error("cannot open table: " + estimates_path);
    char first = 0;
    probe >> first;
    if (first == '{') {
      estimates = dsk::load_nbhd_jsonl(estimates_path);
    } else if (kind_flag == "vertex") {
      estimates = dsk::load_score_csv(estimates_path, dsk::ScoreTable::Kind::vertex);
    } else if (kind_flag == "edge") {
      estimates = dsk::load_score_csv(estimates_path, dsk::ScoreTable::Kind::edge);
    } else if (kind_flag == "nbhd") {
      estimates = dsk::load_score_csv(estimates_path, dsk::ScoreTable::Kind::nbhd);
    } else {
      estimates = dsk::load_score_csv_infer(estimates_path);
    }
  }
  const dsk::ScoreTable truth = dsk::load_score_csv(truth_path, estimates.kind);
  const std::vector<size_t> ks = {config.k};
  const dsk::EvalReport report = dsk::evaluate(estimates, truth, ks, config.heap_k);
  std::string rendered = dsk::report_to_json(report, config.to_json().dump());

  // Pass counters embedded in the estimate file's comments through to the
  // report (domination events, convergence failures, the global estimate).
  {
    json j = json::parse(rendered);
    std::ifstream in(estimates_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] != '#') continue;
      std::istringstream fields(line.substr(1));
      std::string key;
      double value = 0.0;
      if (fields >> key >> value &&
          (key == "domination_events" || key == "nonconverged_events" ||
           key == "global_estimate")) {
        j["estimates_" + key] = value;
      }
    }
    rendered = j.dump(2);
  }
  if (config.out_path.empty()) {
    std::cout << rendered << "\n";
  } else {
    std::ofstream out = open_out(config.out_path);
    out << rendered << "\n";
    std::cout << "wrote " << config.out_path << "\n";
  }
  return 0;
}

int cmd_calibrate(const RunConfig& config, int trials, uint64_t grid_max) {
  std::vector<uint64_t> grid = dsk::default_calibration_grid(config.prefix_bits);
  if (grid_max > 0) std::erase_if(grid, [grid_max](uint64_t n) { return n > grid_max; });
  const dsk::BetaCalibration calibration =
      dsk::calibrate_beta(config.prefix_bits, trials, grid, config.seed);
  dsk::save_calibration(config.out_path, calibration);
  std::cout << "wrote " << config.out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DegreeSketch: per-vertex cardinality sketches over edge streams, with"
               " neighborhood estimation and triangle count heavy hitters"};
  app.require_subcommand(1);

  RunConfig config;
  std::string factor2_path, what = "edge-tri", estimates_path, truth_path, kind_flag;
  int trials = 100;
  uint64_t grid_max = 0;

  auto add_common = [&](CLI::App* cmd, bool with_params) {
    cmd->add_option("--workers", config.workers, "worker count");
    cmd->add_option("--partitioner", config.partitioner, "vertex partitioner: rr or hash")
        ->check(CLI::IsMember({"rr", "hash"}));
    cmd->add_option("--scheduler-seed", config.scheduler_seed, "deterministic scheduler seed");
    cmd->add_flag("--threads", config.threads, "one thread per worker");
    if (with_params) {
      cmd->add_option("--prefix-bits", config.prefix_bits, "sketch prefix size p")
          ->check(CLI::Range(4, 16));
      cmd->add_option("--seed", config.seed, "sketch hash seed");
    }
  };

  auto* acc = app.add_subcommand("accumulate", "build and persist a sketch store");
  acc->add_option("--graph", config.graph_path, "edge list path")->required();
  acc->add_option("--out", config.out_path, "store path prefix")->required();
  add_common(acc, true);

  auto* nbhd = app.add_subcommand("nbhd", "estimate local t-neighborhood sizes");
  nbhd->add_option("--graph", config.graph_path)->required();
  nbhd->add_option("--store", config.store_prefix, "store path prefix")->required();
  nbhd->add_option("--out", config.out_path, "JSON-lines output")->required();
  nbhd->add_option("--t-max", config.t_max)->check(CLI::PositiveNumber);
  nbhd->add_flag("--dense-only", config.dense_only, "saturate all sketches up front");
  nbhd->add_flag("--save-layers", config.save_layers, "persist every layer's store");
  add_common(nbhd, false);

  auto* ehh = app.add_subcommand("edge-hh", "edge-local triangle count heavy hitters");
  auto* vhh = app.add_subcommand("vertex-hh", "vertex-local triangle count heavy hitters");
  for (auto* cmd : {ehh, vhh}) {
    cmd->add_option("--graph", config.graph_path)->required();
    cmd->add_option("--store", config.store_prefix)->required();
    cmd->add_option("--out", config.out_path, "CSV output")->required();
    cmd->add_option("--heap-k", config.heap_k, "heap capacity k'")->delimiter(',');
    cmd->add_option("--estimator", config.estimator)->check(CLI::IsMember({"mle", "ie"}));
    cmd->add_flag("--drop-dominated", config.drop_dominated, "score dominated edges as zero");
    cmd->add_flag("--full-table", config.full_table, "also dump every estimate");
    add_common(cmd, false);
  }

  auto* kron = app.add_subcommand("kron", "Kronecker product graph with triangle ground truth");
  kron->add_option("--factor", config.graph_path, "factor edge list")->required();
  kron->add_option("--factor2", factor2_path, "second factor (defaults to the first)");
  kron->add_option("--out", config.out_path, "output path prefix")->required();

  auto* orc = app.add_subcommand("oracle", "exact tables for small graphs");
  orc->add_option("--graph", config.graph_path)->required();
  orc->add_option("--what", what, "nbhd, edge-tri, vertex-tri or global");
  orc->add_option("--t-max", config.t_max)->check(CLI::PositiveNumber);
  orc->add_option("--out", config.out_path)->required();

  auto* ev = app.add_subcommand("eval", "MRE and precision/recall report");
  ev->add_option("--estimates", estimates_path)->required();
  ev->add_option("--truth", truth_path)->required();
  ev->add_option("--kind", kind_flag)->check(CLI::IsMember({"vertex", "edge", "nbhd"}));
  ev->add_option("--k", config.k, "ground-truth top-k size");
  ev->add_option("--heap-k", config.heap_k, "estimated top-k' sizes")->delimiter(',');
  ev->add_option("--out", config.out_path, "report path (stdout when omitted)");

  auto* cal = app.add_subcommand("calibrate-beta", "fit the estimator bias polynomial");
  cal->add_option("--prefix-bits", config.prefix_bits)->required()->check(CLI::Range(4, 16));
  cal->add_option("--trials", trials, "trials per grid point");
  cal->add_option("--grid-max", grid_max, "truncate the default grid");
  cal->add_option("--seed", config.seed, "rng seed");
  cal->add_option("--out", config.out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  config.command = app.get_subcommands().front()->get_name();
  try {
    if (acc->parsed()) return cmd_accumulate(config);
    if (nbhd->parsed()) return cmd_nbhd(config);
    if (ehh->parsed()) return cmd_hh(config, false);
    if (vhh->parsed()) return cmd_hh(config, true);
    if (kron->parsed()) return cmd_kron(config, factor2_path);
    if (orc->parsed()) return cmd_oracle(config, what);
    if (ev->parsed()) return cmd_eval(config, estimates_path, truth_path, kind_flag);
    if (cal->parsed()) return cmd_calibrate(config, trials, grid_max);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
