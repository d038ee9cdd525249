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

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dsk/cluster.hpp"

namespace dsk {

struct Edge {
  VertexId u = 0;
  VertexId v = 0;
  auto operator<=>(const Edge&) const = default;
};

/// Undirected simple edge list: no self-loops, no duplicates, endpoints
/// ordered u < v. Stream order is preserved from the source.
struct EdgeList {
  uint64_t vertex_count = 0;  // distinct endpoints
  uint64_t max_vertex = 0;
  std::vector<Edge> edges;
  std::string provenance;
};

/// Canonicalizes raw pairs: drops self-loops, orients u < v, removes
/// duplicates keeping first occurrence.
EdgeList normalize_edges(std::vector<std::pair<VertexId, VertexId>> pairs,
                         std::string provenance = {});

/// Parses a whitespace-separated edge list ("u v" per line, '#' comments).
/// Throws std::runtime_error with the line number on malformed input.
EdgeList parse_edge_stream(const std::string& path);

void write_edge_list(const std::string& path, const EdgeList& graph,
                     const std::string& header_comment = {});

/// Contiguous chunks with sizes differing by at most one; concatenation
/// reproduces the input order.
std::vector<std::span<const Edge>> split_substreams(const EdgeList& graph, uint32_t parts);

/// G(n, m): m distinct uniform non-loop edges on [0, n). Deterministic.
EdgeList random_gnm(uint64_t n, uint64_t m, uint64_t seed);

// ---------------------------------------------------------------------------
// Kronecker products with analytic triangle ground truth.

struct KroneckerSpec {
  EdgeList factor1;
  EdgeList factor2;
  uint64_t edge_cap = 50'000'000;

  uint64_t space1() const { return factor1.max_vertex + 1; }
  uint64_t space2() const { return factor2.max_vertex + 1; }
  VertexId linearize(VertexId i1, VertexId i2) const { return i1 * space2() + i2; }
};

/// Edges of the product graph: (i1,i2)~(j1,j2) iff {i1,j1} and {i2,j2} are
/// factor edges. Undirected factors contribute both orientations, so each
/// factor edge pair yields two product edges. Throws when the product would
/// exceed the edge cap.
EdgeList kronecker_product(const KroneckerSpec& spec);

/// Triangle count of a product edge as the product of the endpoints'
/// common-neighbor counts in each factor. Throws if e is not a product edge.
uint64_t kron_edge_triangles(const KroneckerSpec& spec, Edge e);

/// Full (u, v, triangles) table over every product edge, in product edge
/// enumeration order.
std::vector<std::pair<Edge, uint64_t>> kron_edge_triangle_table(const KroneckerSpec& spec);

// ---------------------------------------------------------------------------
// Exact oracles (adjacency materialized; desk scale).

enum class NeighborhoodConvention : uint8_t {
  /// What the sketch layers actually hold: t = 1 counts neighbors only,
  /// t >= 2 counts the full ball including the start vertex.
  layered,
  ball_with_self,
  ball_without_self,
};

class OracleGraph {
 public:
  explicit OracleGraph(const EdgeList& graph);

  uint64_t vertex_count() const { return ids_.size(); }
  const std::vector<VertexId>& vertices() const { return ids_; }
  uint64_t degree(VertexId x) const;
  std::span<const VertexId> neighbors(VertexId x) const;

  uint64_t neighborhood_size(VertexId x, int t,
                             NeighborhoodConvention convention =
                                 NeighborhoodConvention::layered) const;
  uint64_t edge_triangles(VertexId u, VertexId v) const;
  uint64_t vertex_triangles(VertexId x) const;
  uint64_t global_triangles() const;

  std::vector<std::pair<Edge, uint64_t>> edge_triangle_table() const;
  std::vector<std::pair<VertexId, uint64_t>> vertex_triangle_table() const;
  /// (x, t, size) rows for t in [1, t_max]; BFS parallelized over vertices.
  std::vector<std::tuple<VertexId, int, uint64_t>> neighborhood_table(
      int t_max, NeighborhoodConvention convention = NeighborhoodConvention::layered) const;

 private:
  size_t index_of(VertexId x) const;

  std::vector<VertexId> ids_;         // sorted distinct vertex ids
  std::vector<size_t> offsets_;       // CSR offsets into adjacency_
  std::vector<VertexId> adjacency_;   // neighbor ids, sorted per vertex
  std::vector<uint32_t> adjacency_idx_;  // same neighbors as indices into ids_
  std::vector<Edge> edges_;
};

/// Top-k of a (id, score) table under (score desc, id asc).
template <typename Id>
std::vector<std::pair<Id, double>> oracle_topk(std::vector<std::pair<Id, double>> table,
                                               size_t k) {
  std::sort(table.begin(), table.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (table.size() > k) table.resize(k);
  return table;
}

}  // namespace dsk
