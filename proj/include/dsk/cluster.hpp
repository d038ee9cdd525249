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
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "dsk/topk.hpp"

namespace dsk {

using VertexId = uint64_t;
using WorkerId = uint32_t;

/// Maps vertex ids to workers. round_robin is v mod P; hash uses the seeded
/// 64-bit hash. Stable within a run.
struct Partitioner {
  enum class Mode : uint8_t { round_robin, hash };

  Mode mode = Mode::round_robin;
  uint32_t workers = 1;
  uint64_t hash_seed = 0;

  WorkerId operator()(VertexId v) const;
};

/// Wire messages between workers. Edge drives a pass; Sketch carries a
/// serialized register vector; Est carries a partial estimate back to a
/// vertex's owner. t tags the pass for multi-layer runs and is 0 otherwise.
struct EdgePayload {
  VertexId x = 0;
  VertexId y = 0;
  int t = 0;
};

struct SketchPayload {
  std::vector<uint8_t> bytes;
  VertexId x = 0;  // vertex whose sketch this is
  VertexId y = 0;  // vertex the receiver should combine it with
  int t = 0;
};

struct EstPayload {
  double value = 0.0;
  VertexId vertex = 0;
};

struct Message {
  enum class Tag : uint8_t { edge = 0, sketch = 1, est = 2 };

  std::variant<EdgePayload, SketchPayload, EstPayload> payload;

  Tag tag() const { return static_cast<Tag>(payload.index()); }
  const EdgePayload& edge() const { return std::get<EdgePayload>(payload); }
  const SketchPayload& sketch() const { return std::get<SketchPayload>(payload); }
  const EstPayload& est() const { return std::get<EstPayload>(payload); }
};

struct ClusterConfig {
  enum class Mode : uint8_t { deterministic, threads };

  uint32_t workers = 1;
  Mode mode = Mode::deterministic;
  /// Seed for the deterministic scheduler's delivery-order shuffle.
  uint64_t scheduler_seed = 0;
  /// When true the deterministic scheduler picks the next action
  /// pseudo-randomly instead of in scan order (property-test hook).
  bool shuffle_delivery = false;
  /// Aborts the run past this many handled messages (runaway message chain).
  uint64_t message_cap = 1'000'000'000;
};

class Cluster;

/// Handler-side view of the runtime: own worker id plus send().
class WorkerContext {
 public:
  WorkerContext(Cluster& cluster, WorkerId self) : cluster_(&cluster), self_(self) {}

  WorkerId self() const { return self_; }
  void send(WorkerId to, Message message);

 private:
  Cluster* cluster_;
  WorkerId self_;
};

/// Simulated processor universe: P logical workers with per-(sender,receiver)
/// FIFO mailboxes, run to quiescence either by a deterministic single-thread
/// scheduler or by one thread per worker. Handlers own their worker's state;
/// the runtime never runs two handlers of the same worker concurrently.
class Cluster {
 public:
  using Handler = std::function<void(WorkerContext&, Message)>;
  using WorkUnit = std::function<void(WorkerContext&)>;

  explicit Cluster(ClusterConfig config);

  const ClusterConfig& config() const { return config_; }
  uint32_t workers() const { return config_.workers; }

  /// Runs initial work units and all message chains they trigger until every
  /// queue is empty. Returns only at quiescence. Throws std::runtime_error
  /// when the message cap trips.
  void run_until_quiescent(std::span<const Handler> handlers,
                           std::vector<std::vector<WorkUnit>> initial_work);

  /// Global sum of per-worker values, in worker order. Barrier semantics:
  /// throws std::logic_error when called while a run is in progress.
  double reduce_sum(std::span<const double> per_worker) const;

  /// Global top-k from per-worker heaps, deterministic tie-breaking.
  template <typename Id>
  TopKHeap<Id> reduce_topk(std::span<const TopKHeap<Id>> per_worker, size_t capacity) const {
    assert_quiescent("reduce_topk");
    return TopKHeap<Id>::merged(per_worker, capacity);
  }

  uint64_t messages_sent() const { return sent_; }
  uint64_t messages_handled() const { return handled_; }

 private:
  friend class WorkerContext;

  void assert_quiescent(const char* what) const;
  void enqueue(WorkerId from, WorkerId to, Message message);
  void run_deterministic(std::span<const Handler> handlers,
                         std::vector<std::vector<WorkUnit>>& initial_work);
  void run_threads(std::span<const Handler> handlers,
                   std::vector<std::vector<WorkUnit>>& initial_work);

  ClusterConfig config_;
  bool running_ = false;
  uint64_t sent_ = 0;
  uint64_t handled_ = 0;

  struct Impl;
  Impl* impl_ = nullptr;  // live only during a run
};

}  // namespace dsk
