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

#include "dsk/degreesketch.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dsk {

namespace {

constexpr size_t kEdgesPerWorkUnit = 256;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void check_layout(const DistributedStore& store, const Cluster& cluster) {
  if (store.partitioner.workers != cluster.workers()) {
    throw std::invalid_argument("store and cluster disagree on worker count");
  }
}

/// Initial work: each worker walks its substream in fixed-size chunks and
/// applies emit to every edge.
template <typename Emit>
std::vector<std::vector<Cluster::WorkUnit>> stream_work(const EdgeList& stream, uint32_t workers,
                                                        Emit emit) {
  auto substreams = split_substreams(stream, workers);
  std::vector<std::vector<Cluster::WorkUnit>> work(workers);
  for (uint32_t w = 0; w < workers; ++w) {
    const auto edges = substreams[w];
    for (size_t begin = 0; begin < edges.size(); begin += kEdgesPerWorkUnit) {
      const size_t end = std::min(edges.size(), begin + kEdgesPerWorkUnit);
      work[w].push_back([edges, begin, end, emit](WorkerContext& ctx) {
        for (size_t i = begin; i < end; ++i) emit(ctx, edges[i]);
      });
    }
  }
  return work;
}

/// Sums (key, value) contributions from all workers in key order, so the
/// result does not depend on worker count or delivery order.
template <typename Key>
double deterministic_sum(std::vector<std::vector<std::pair<Key, double>>>& per_worker,
                         std::vector<std::pair<Key, double>>* merged_out) {
  std::vector<std::pair<Key, double>> all;
  size_t total = 0;
  for (const auto& v : per_worker) total += v.size();
  all.reserve(total);
  for (auto& v : per_worker) all.insert(all.end(), v.begin(), v.end());
  std::sort(all.begin(), all.end());
  double sum = 0.0;
  for (const auto& [key, value] : all) sum += value;
  if (merged_out != nullptr) *merged_out = std::move(all);
  return sum;
}

IntersectionEstimate run_estimator(IntersectionMethod method, const HllSketch& a,
                                   const HllSketch& b) {
  return method == IntersectionMethod::mle ? estimate_intersection_mle(a, b)
                                           : estimate_intersection_ie(a, b);
}

}  // namespace

const HllSketch* DistributedStore::find(VertexId v) const {
  const ShardStore& shard = shards[partitioner(v)];
  auto it = shard.sketches.find(v);
  return it == shard.sketches.end() ? nullptr : &it->second;
}

uint64_t DistributedStore::size() const {
  uint64_t total = 0;
  for (const auto& shard : shards) total += shard.sketches.size();
  return total;
}

std::vector<std::pair<VertexId, const HllSketch*>> DistributedStore::sorted_entries() const {
  std::vector<std::pair<VertexId, const HllSketch*>> entries;
  entries.reserve(size());
  for (const auto& shard : shards) {
    for (const auto& [v, sketch] : shard.sketches) entries.emplace_back(v, &sketch);
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return entries;
}

bool DistributedStore::register_equal(const DistributedStore& other) const {
  const auto mine = sorted_entries();
  const auto theirs = other.sorted_entries();
  if (mine.size() != theirs.size()) return false;
  for (size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].first != theirs[i].first) return false;
    if (!mine[i].second->register_equal(*theirs[i].second)) return false;
  }
  return true;
}

void DistributedStore::saturate_all() {
  for (auto& shard : shards) {
    for (auto& [v, sketch] : shard.sketches) {
      if (sketch.mode() == HllSketch::Mode::sparse) sketch.saturate();
    }
  }
}

DistributedStore accumulate(const EdgeList& stream, HllParamsPtr params,
                            const Partitioner& partitioner, Cluster& cluster) {
  if (partitioner.workers != cluster.workers()) {
    throw std::invalid_argument("partitioner and cluster disagree on worker count");
  }
  DistributedStore store;
  store.params = params;
  store.partitioner = partitioner;
  store.layer = 1;
  store.shards.resize(cluster.workers());

  std::vector<Cluster::Handler> handlers;
  handlers.reserve(cluster.workers());
  for (uint32_t w = 0; w < cluster.workers(); ++w) {
    handlers.push_back([&store, params, w](WorkerContext&, Message msg) {
      const EdgePayload& e = msg.edge();
      auto it = store.shards[w].sketches.try_emplace(e.x, HllSketch(params)).first;
      it->second.insert(e.y);
    });
  }

  const Partitioner f = partitioner;
  auto work = stream_work(stream, cluster.workers(), [f](WorkerContext& ctx, const Edge& e) {
    ctx.send(f(e.u), Message{EdgePayload{e.u, e.v, 0}});
    ctx.send(f(e.v), Message{EdgePayload{e.v, e.u, 0}});
  });
  cluster.run_until_quiescent(handlers, std::move(work));
  return store;
}

namespace {

NeighborhoodLayer layer_estimates(const DistributedStore& store, int t) {
  NeighborhoodLayer layer;
  layer.t = t;
  for (const auto& [v, sketch] : store.sorted_entries()) {
    layer.per_vertex.emplace_back(v, sketch->estimate());
  }
  double sum = 0.0;
  for (const auto& [v, est] : layer.per_vertex) sum += est;
  layer.global = sum;
  return layer;
}

}  // namespace

NeighborhoodResult estimate_neighborhoods(const EdgeList& stream, const DistributedStore& store,
                                          const NeighborhoodOptions& options, Cluster& cluster) {
  if (options.t_max < 1) throw std::invalid_argument("estimate_neighborhoods: t_max must be >= 1");
  check_layout(store, cluster);

  NeighborhoodResult result;
  DistributedStore previous = store;  // layer t-1
  previous.layer = 1;
  if (options.dense_only) previous.saturate_all();

  {
    auto start = std::chrono::steady_clock::now();
    NeighborhoodLayer layer = layer_estimates(previous, 1);
    layer.wall_seconds = seconds_since(start);
    result.layers.push_back(std::move(layer));
  }
  if (options.keep_layers) result.stores.push_back(previous);

  const Partitioner f = store.partitioner;
  const HllParamsPtr params = store.params;
  for (int t = 2; t <= options.t_max; ++t) {
    const auto start = std::chrono::steady_clock::now();
    DistributedStore current = previous;
    current.layer = t;

    std::vector<Cluster::Handler> handlers;
    handlers.reserve(cluster.workers());
    for (uint32_t w = 0; w < cluster.workers(); ++w) {
      handlers.push_back([&previous, &current, params, f, w](WorkerContext& ctx, Message msg) {
        if (msg.tag() == Message::Tag::edge) {
          const EdgePayload& e = msg.edge();
          const auto& shard = previous.shards[w].sketches;
          auto it = shard.find(e.x);
          if (it == shard.end()) throw std::logic_error("edge endpoint missing from store");
          SketchPayload payload;
          it->second.serialize_into(payload.bytes);
          payload.x = e.x;
          payload.y = e.y;
          payload.t = e.t;
          ctx.send(f(e.y), Message{std::move(payload)});
        } else {
          const SketchPayload& s = msg.sketch();
          auto it = current.shards[w].sketches.find(s.y);
          if (it == current.shards[w].sketches.end()) {
            throw std::logic_error("sketch target missing from store");
          }
          it->second.merge_from(HllSketch::deserialize(s.bytes, params));
        }
      });
    }

    auto work = stream_work(stream, cluster.workers(), [f, t](WorkerContext& ctx, const Edge& e) {
      ctx.send(f(e.u), Message{EdgePayload{e.u, e.v, t}});
      ctx.send(f(e.v), Message{EdgePayload{e.v, e.u, t}});
    });
    cluster.run_until_quiescent(handlers, std::move(work));

    NeighborhoodLayer layer = layer_estimates(current, t);
    layer.wall_seconds = seconds_since(start);
    result.layers.push_back(std::move(layer));
    if (options.keep_layers) result.stores.push_back(current);
    previous = std::move(current);
  }
  return result;
}

namespace {

struct HeavyHitterWorkerState {
  std::vector<std::pair<Edge, double>> edge_contributions;
  std::vector<std::pair<VertexId, double>> vertex_contributions;
  uint64_t dominated = 0;
  uint64_t nonconverged = 0;
};

/// Shared message chain of the two heavy-hitter passes. Each stream edge uv
/// goes to f(u) only; f(u) forwards u's sketch to f(v); f(v) scores the edge.
template <typename OnScore>
void run_heavy_hitter_pass(const EdgeList& stream, const DistributedStore& store,
                           const HeavyHitterOptions& options, Cluster& cluster,
                           std::vector<HeavyHitterWorkerState>& states, OnScore on_score) {
  const Partitioner f = store.partitioner;
  const HllParamsPtr params = store.params;

  std::vector<Cluster::Handler> handlers;
  handlers.reserve(cluster.workers());
  for (uint32_t w = 0; w < cluster.workers(); ++w) {
    handlers.push_back([&store, &states, &options, params, f, w, on_score](WorkerContext& ctx,
                                                                           Message msg) {
      if (msg.tag() == Message::Tag::edge) {
        const EdgePayload& e = msg.edge();
        const auto& shard = store.shards[w].sketches;
        auto it = shard.find(e.x);
        if (it == shard.end()) throw std::logic_error("edge endpoint missing from store");
        SketchPayload payload;
        it->second.serialize_into(payload.bytes);
        payload.x = e.x;
        payload.y = e.y;
        ctx.send(f(e.y), Message{std::move(payload)});
      } else if (msg.tag() == Message::Tag::sketch) {
        const SketchPayload& s = msg.sketch();
        const auto& shard = store.shards[w].sketches;
        auto it = shard.find(s.y);
        if (it == shard.end()) throw std::logic_error("edge endpoint missing from store");
        const HllSketch remote = HllSketch::deserialize(s.bytes, params);
        const IntersectionEstimate est = run_estimator(options.estimator, it->second, remote);
        HeavyHitterWorkerState& state = states[w];
        if (est.domination != Domination::none) ++state.dominated;
        if (!est.converged) ++state.nonconverged;
        double value = est.lambda_x;
        if (options.domination == DominationPolicy::drop &&
            est.domination != Domination::none) {
          value = 0.0;
        }
        const Edge edge{std::min(s.x, s.y), std::max(s.x, s.y)};
        state.edge_contributions.emplace_back(edge, value);
        on_score(ctx, state, edge, s, value);
      } else {
        const EstPayload& p = msg.est();
        states[w].vertex_contributions.emplace_back(p.vertex, p.value);
      }
    });
  }

  auto work = stream_work(stream, cluster.workers(), [f](WorkerContext& ctx, const Edge& e) {
    ctx.send(f(e.u), Message{EdgePayload{e.u, e.v, 0}});
  });
  cluster.run_until_quiescent(handlers, std::move(work));
}

}  // namespace

EdgeTriangleResult edge_heavy_hitters(const EdgeList& stream, const DistributedStore& store,
                                      const HeavyHitterOptions& options, Cluster& cluster) {
  check_layout(store, cluster);
  const auto start = std::chrono::steady_clock::now();

  std::vector<HeavyHitterWorkerState> states(cluster.workers());
  std::vector<TopKHeap<Edge>> heaps(cluster.workers(), TopKHeap<Edge>(options.heap_k));

  run_heavy_hitter_pass(stream, store, options, cluster, states,
                        [&heaps](WorkerContext& ctx, HeavyHitterWorkerState&, const Edge& edge,
                                 const SketchPayload&, double value) {
                          heaps[ctx.self()].offer(value, edge);
                        });

  EdgeTriangleResult result;
  std::vector<std::vector<std::pair<Edge, double>>> contributions;
  contributions.reserve(states.size());
  for (auto& state : states) {
    contributions.push_back(std::move(state.edge_contributions));
    result.domination_events += state.dominated;
    result.nonconverged_events += state.nonconverged;
  }
  std::vector<std::pair<Edge, double>> merged;
  const double edge_sum =
      deterministic_sum(contributions, options.full_table ? &merged : nullptr);
  result.global = edge_sum / 3.0;
  if (options.full_table) result.full_table = std::move(merged);
  result.top =
      cluster.reduce_topk<Edge>(heaps, options.heap_k).sorted_entries();
  result.wall_seconds = seconds_since(start);
  return result;
}

VertexTriangleResult vertex_heavy_hitters(const EdgeList& stream, const DistributedStore& store,
                                          const HeavyHitterOptions& options, Cluster& cluster) {
  check_layout(store, cluster);
  const auto start = std::chrono::steady_clock::now();

  std::vector<HeavyHitterWorkerState> states(cluster.workers());
  const Partitioner f = store.partitioner;

  run_heavy_hitter_pass(
      stream, store, options, cluster, states,
      [f](WorkerContext& ctx, HeavyHitterWorkerState& state, const Edge&,
          const SketchPayload& s, double value) {
        state.vertex_contributions.emplace_back(s.y, value);
        ctx.send(f(s.x), Message{EstPayload{value, s.x}});
      });

  VertexTriangleResult result;
  std::vector<std::vector<std::pair<Edge, double>>> edge_contributions;
  for (auto& state : states) {
    edge_contributions.push_back(std::move(state.edge_contributions));
    result.domination_events += state.dominated;
    result.nonconverged_events += state.nonconverged;
  }
  result.global =
      deterministic_sum<Edge>(edge_contributions, nullptr) / 3.0;

  // Per-vertex sums: every stream vertex starts at zero; each incident edge
  // contributed once locally and once via an Est message; halve at the end.
  std::vector<TopKHeap<VertexId>> heaps(cluster.workers(), TopKHeap<VertexId>(options.heap_k));
  std::vector<std::vector<std::pair<VertexId, double>>> tables(cluster.workers());
  for (uint32_t w = 0; w < cluster.workers(); ++w) {
    auto& contributions = states[w].vertex_contributions;
    std::sort(contributions.begin(), contributions.end());
    std::vector<std::pair<VertexId, double>>& table = tables[w];
    for (const auto& [v, sketch] : store.shards[w].sketches) table.emplace_back(v, 0.0);
    std::sort(table.begin(), table.end());
    size_t cursor = 0;
    for (auto& [v, total] : table) {
      while (cursor < contributions.size() && contributions[cursor].first < v) ++cursor;
      while (cursor < contributions.size() && contributions[cursor].first == v) {
        total += contributions[cursor].second;
        ++cursor;
      }
      total *= 0.5;
      heaps[w].offer(total, v);
    }
  }
  result.top = cluster.reduce_topk<VertexId>(heaps, options.heap_k).sorted_entries();
  if (options.full_table) {
    std::vector<std::pair<VertexId, double>> merged;
    deterministic_sum(tables, &merged);
    result.full_table = std::move(merged);
  }
  result.wall_seconds = seconds_since(start);
  return result;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kMagic[4] = {'D', 'G', 'S', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ofstream& out, uint32_t v) {
  const uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                        static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, uint64_t v) {
  uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t read_u32(const std::vector<uint8_t>& bytes, size_t offset) {
  return static_cast<uint32_t>(bytes[offset]) | static_cast<uint32_t>(bytes[offset + 1]) << 8 |
         static_cast<uint32_t>(bytes[offset + 2]) << 16 |
         static_cast<uint32_t>(bytes[offset + 3]) << 24;
}

uint64_t read_u64(const std::vector<uint8_t>& bytes, size_t offset) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[offset + static_cast<size_t>(i)];
  return v;
}

std::string shard_path(const std::string& prefix, int layer, uint32_t worker) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), ".t%d.w%03u.dgsk", layer, worker);
  return prefix + buf;
}

size_t sketch_wire_size(const std::vector<uint8_t>& bytes, size_t offset, uint32_t r) {
  if (offset + 5 > bytes.size()) throw std::runtime_error("truncated sketch in store file");
  const auto mode = static_cast<HllSketch::Mode>(bytes[offset]);
  if (mode == HllSketch::Mode::dense) return 5 + r;
  if (offset + 9 > bytes.size()) throw std::runtime_error("truncated sketch in store file");
  const uint32_t count = read_u32(bytes, offset + 5);
  return 9 + 3 * static_cast<size_t>(count);
}

}  // namespace

void save_store(const DistributedStore& store, const std::string& prefix) {
  for (uint32_t w = 0; w < store.shards.size(); ++w) {
    const std::string path = shard_path(prefix, store.layer, w);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open shard file for writing: " + path);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<uint32_t>(store.params->p));
    put_u32(out, static_cast<uint32_t>(store.params->q));
    put_u64(out, store.params->hash_seed);
    put_u32(out, static_cast<uint32_t>(store.layer));
    put_u64(out, store.shards[w].sketches.size());

    std::vector<std::pair<VertexId, const HllSketch*>> entries;
    entries.reserve(store.shards[w].sketches.size());
    for (const auto& [v, sketch] : store.shards[w].sketches) entries.emplace_back(v, &sketch);
    std::sort(entries.begin(), entries.end());
    std::vector<uint8_t> buffer;
    for (const auto& [v, sketch] : entries) {
      put_u64(out, v);
      buffer.clear();
      sketch->serialize_into(buffer);
      out.write(reinterpret_cast<const char*>(buffer.data()),
                static_cast<std::streamsize>(buffer.size()));
    }
    if (!out) throw std::runtime_error("failed writing shard file: " + path);
  }
}

DistributedStore load_store(const std::string& prefix, int layer,
                            const Partitioner& partitioner) {
  DistributedStore store;
  store.partitioner = partitioner;
  store.layer = layer;
  store.shards.resize(partitioner.workers);

  bool any = false;
  for (uint32_t w = 0;; ++w) {
    const std::string path = shard_path(prefix, layer, w);
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      if (!any) throw std::runtime_error("no shard files found at prefix: " + prefix);
      break;
    }
    any = true;
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    if (bytes.size() < 32 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
      throw std::runtime_error("bad shard file header: " + path);
    }
    const uint32_t version = read_u32(bytes, 4);
    if (version != kVersion) throw std::runtime_error("unsupported shard version in " + path);
    const uint32_t p = read_u32(bytes, 8);
    const uint32_t q = read_u32(bytes, 12);
    const uint64_t seed = read_u64(bytes, 16);
    const uint32_t file_layer = read_u32(bytes, 24);
    const uint64_t count = read_u64(bytes, 28);
    if (q != 64 - p) throw std::runtime_error("inconsistent p/q in shard header: " + path);
    if (static_cast<int>(file_layer) != layer) {
      throw std::runtime_error("layer mismatch in shard file: " + path);
    }
    if (store.params == nullptr) {
      store.params = make_params(static_cast<int>(p), seed);
    } else if (store.params->p != static_cast<int>(p) || store.params->hash_seed != seed) {
      throw std::runtime_error("shard files disagree on sketch parameters: " + path);
    }
    size_t offset = 36;
    for (uint64_t i = 0; i < count; ++i) {
      if (offset + 8 > bytes.size()) throw std::runtime_error("truncated shard file: " + path);
      const VertexId v = read_u64(bytes, offset);
      offset += 8;
      const size_t size = sketch_wire_size(bytes, offset, store.params->r);
      if (offset + size > bytes.size()) throw std::runtime_error("truncated shard file: " + path);
      HllSketch sketch = HllSketch::deserialize(
          std::span<const uint8_t>(bytes.data() + offset, size), store.params);
      offset += size;
      store.shards[partitioner(v)].sketches.emplace(v, std::move(sketch));
    }
    if (offset != bytes.size()) {
      throw std::runtime_error("trailing bytes in shard file: " + path);
    }
  }
  return store;
}

}  // namespace dsk
