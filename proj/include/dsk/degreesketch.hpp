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

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsk/cluster.hpp"
#include "dsk/graph.hpp"
#include "dsk/hll.hpp"
#include "dsk/intersect.hpp"
#include "dsk/topk.hpp"

namespace dsk {

/// One worker's slice of the distributed vertex -> sketch map.
struct ShardStore {
  std::unordered_map<VertexId, HllSketch> sketches;
};

/// The distributed store: P shards plus everything needed to route to them.
/// Shard w holds exactly the stream vertices v with partitioner(v) == w.
struct DistributedStore {
  HllParamsPtr params;
  Partitioner partitioner;
  int layer = 1;
  std::vector<ShardStore> shards;

  const HllSketch* find(VertexId v) const;
  uint64_t size() const;
  /// (vertex, sketch) pairs over all shards, sorted by vertex id.
  std::vector<std::pair<VertexId, const HllSketch*>> sorted_entries() const;
  bool register_equal(const DistributedStore& other) const;
  void saturate_all();
};

/// One accumulation pass: every stream edge xy inserts y into x's sketch and
/// x into y's sketch, creating sketches on demand.
DistributedStore accumulate(const EdgeList& stream, HllParamsPtr params,
                            const Partitioner& partitioner, Cluster& cluster);

struct NeighborhoodLayer {
  int t = 0;
  std::vector<std::pair<VertexId, double>> per_vertex;  // sorted by vertex id
  double global = 0.0;
  double wall_seconds = 0.0;
};

struct NeighborhoodOptions {
  int t_max = 1;
  bool dense_only = false;
  bool keep_layers = false;
};

struct NeighborhoodResult {
  std::vector<NeighborhoodLayer> layers;          // t = 1 .. t_max
  std::vector<DistributedStore> stores;           // only when keep_layers
};

/// Multi-pass neighborhood estimation: layer t merges each vertex's layer
/// t-1 sketch into the layer-t sketches of its neighbors, so layer t holds
/// the distance-t ball. Per-layer global sizes are reduced sums of the
/// per-vertex estimates. Throws when t_max < 1.
NeighborhoodResult estimate_neighborhoods(const EdgeList& stream, const DistributedStore& store,
                                          const NeighborhoodOptions& options, Cluster& cluster);

enum class DominationPolicy : uint8_t { keep, drop };

struct HeavyHitterOptions {
  size_t heap_k = 10;
  IntersectionMethod estimator = IntersectionMethod::mle;
  DominationPolicy domination = DominationPolicy::keep;
  bool full_table = false;
};

template <typename Key>
struct TriangleResult {
  double global = 0.0;
  std::vector<typename TopKHeap<Key>::Entry> top;  // best first
  std::optional<std::vector<std::pair<Key, double>>> full_table;  // sorted by key
  uint64_t domination_events = 0;
  uint64_t nonconverged_events = 0;
  double wall_seconds = 0.0;
};

using EdgeTriangleResult = TriangleResult<Edge>;
using VertexTriangleResult = TriangleResult<VertexId>;

/// Streams edges once; each edge uv routes to u's owner, which forwards u's
/// sketch to v's owner, which scores the edge by intersection estimation.
/// Returns the global estimate (edge sum over three) and the top-k heap.
EdgeTriangleResult edge_heavy_hitters(const EdgeList& stream, const DistributedStore& store,
                                      const HeavyHitterOptions& options, Cluster& cluster);

/// Same chain as edge_heavy_hitters, but every edge score is credited to both
/// endpoints (the far endpoint via an Est message) and halved at the end.
VertexTriangleResult vertex_heavy_hitters(const EdgeList& stream, const DistributedStore& store,
                                          const HeavyHitterOptions& options, Cluster& cluster);

/// One file per shard at "<prefix>.t<layer>.w<nnn>.dgsk": a DGSK header
/// (magic, version, p, q, seed, layer, entry count) followed by entries
/// (vertex id, 8 bytes LE, then the sketch wire format) sorted by vertex id.
void save_store(const DistributedStore& store, const std::string& prefix);

/// Loads every shard file for a layer and re-partitions into the given
/// worker layout. The estimator calibration for the stored p must be known.
DistributedStore load_store(const std::string& prefix, int layer, const Partitioner& partitioner);

}  // namespace dsk
