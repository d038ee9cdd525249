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

#include <atomic>
#include <vector>

#include "dsk/cluster.hpp"
#include "dsk/rng.hpp"

using namespace dsk;

namespace {

Cluster::Handler noop_handler() {
  return [](WorkerContext&, Message) {};
}

}  // namespace

TEST_CASE("partition modes") {
  Partitioner rr{Partitioner::Mode::round_robin, 4, 0};
  CHECK(rr(10) == 2);
  CHECK(rr(0) == 0);
  Partitioner single{Partitioner::Mode::round_robin, 1, 0};
  for (VertexId v : {0ull, 17ull, 123456789ull}) CHECK(single(v) == 0);

  // Hash mode spreads 1e4 vertices within 20% of the even share.
  const uint32_t workers = 8;
  Partitioner hashed{Partitioner::Mode::hash, workers, 42};
  std::vector<uint64_t> counts(workers, 0);
  for (VertexId v = 0; v < 10000; ++v) ++counts[hashed(v)];
  for (const uint64_t c : counts) {
    CHECK(c > 10000 / workers * 0.8);
    CHECK(c < 10000 / workers * 1.2);
  }
}

TEST_CASE("no initial work returns immediately") {
  Cluster cluster(ClusterConfig{.workers = 3});
  std::vector<Cluster::Handler> handlers(3, noop_handler());
  cluster.run_until_quiescent(handlers, std::vector<std::vector<Cluster::WorkUnit>>(3));
  CHECK(cluster.messages_sent() == 0);
  CHECK(cluster.messages_handled() == 0);
}

TEST_CASE("one edge message triggering one reply, then quiescence") {
  Cluster cluster(ClusterConfig{.workers = 2});
  std::atomic<int> edges{0}, ests{0};
  std::vector<Cluster::Handler> handlers;
  for (uint32_t w = 0; w < 2; ++w) {
    handlers.push_back([&](WorkerContext& ctx, Message msg) {
      if (msg.tag() == Message::Tag::edge) {
        ++edges;
        ctx.send(0, Message{EstPayload{1.0, msg.edge().x}});
      } else {
        ++ests;
      }
    });
  }
  std::vector<std::vector<Cluster::WorkUnit>> work(2);
  work[0].push_back([](WorkerContext& ctx) { ctx.send(1, Message{EdgePayload{7, 9, 0}}); });
  cluster.run_until_quiescent(handlers, std::move(work));
  CHECK(edges == 1);
  CHECK(ests == 1);
  CHECK(cluster.messages_sent() == 2);
  CHECK(cluster.messages_handled() == 2);
}

TEST_CASE("per-pair delivery is FIFO even when shuffled") {
  Cluster cluster(ClusterConfig{.workers = 2, .scheduler_seed = 9, .shuffle_delivery = true});
  std::vector<uint64_t> received;
  std::vector<Cluster::Handler> handlers(2, noop_handler());
  handlers[1] = [&](WorkerContext&, Message msg) { received.push_back(msg.edge().x); };
  std::vector<std::vector<Cluster::WorkUnit>> work(2);
  work[0].push_back([](WorkerContext& ctx) {
    for (uint64_t i = 0; i < 50; ++i) ctx.send(1, Message{EdgePayload{i, 0, 0}});
  });
  cluster.run_until_quiescent(handlers, std::move(work));
  REQUIRE(received.size() == 50);
  for (uint64_t i = 0; i < 50; ++i) CHECK(received[i] == i);
}

TEST_CASE("message cap aborts runaway chains") {
  for (const auto mode : {ClusterConfig::Mode::deterministic, ClusterConfig::Mode::threads}) {
    Cluster cluster(ClusterConfig{.workers = 2, .mode = mode, .message_cap = 100});
    std::vector<Cluster::Handler> handlers(
        2, Cluster::Handler([](WorkerContext& ctx, Message msg) {
          ctx.send(1 - ctx.self(), std::move(msg));
        }));
    std::vector<std::vector<Cluster::WorkUnit>> work(2);
    work[0].push_back([](WorkerContext& ctx) { ctx.send(1, Message{EdgePayload{1, 2, 0}}); });
    CHECK_THROWS_AS(cluster.run_until_quiescent(handlers, std::move(work)), std::runtime_error);
  }
}

TEST_CASE("reduce_sum and barrier semantics") {
  Cluster cluster(ClusterConfig{.workers = 4});
  const std::vector<double> ones = {1.0, 1.0, 1.0, 1.0};
  CHECK(cluster.reduce_sum(ones) == 4.0);

  // Calling reduce from inside a handler violates the barrier.
  std::vector<Cluster::Handler> handlers(4, Cluster::Handler([&cluster](WorkerContext&, Message) {
                                           const std::vector<double> v = {1.0};
                                           cluster.reduce_sum(v);
                                         }));
  std::vector<std::vector<Cluster::WorkUnit>> work(4);
  work[0].push_back([](WorkerContext& ctx) { ctx.send(2, Message{EdgePayload{0, 0, 0}}); });
  CHECK_THROWS_AS(cluster.run_until_quiescent(handlers, std::move(work)), std::logic_error);
}

TEST_CASE("reduce_topk merges per-worker heaps deterministically") {
  Cluster cluster(ClusterConfig{.workers = 2});
  TopKHeap<VertexId> h1(2), h2(2);
  h1.offer(5.0, 100);
  h1.offer(3.0, 200);
  h2.offer(4.0, 300);
  const std::vector<TopKHeap<VertexId>> heaps = {h1, h2};
  const auto merged = cluster.reduce_topk<VertexId>(heaps, 2).sorted_entries();
  REQUIRE(merged.size() == 2);
  CHECK(merged[0].score == 5.0);
  CHECK(merged[0].id == 100);
  CHECK(merged[1].score == 4.0);
  CHECK(merged[1].id == 300);

  // Oracle: merging many random heaps equals one heap fed everything.
  SplitMix64 rng(5);
  std::vector<TopKHeap<VertexId>> parts(4, TopKHeap<VertexId>(8));
  TopKHeap<VertexId> global(8);
  for (int i = 0; i < 200; ++i) {
    const double score = static_cast<double>(rng.next_below(50));
    const VertexId id = i;
    parts[rng.next_below(4)].offer(score, id);
    global.offer(score, id);
  }
  CHECK(cluster.reduce_topk<VertexId>(parts, 8).sorted_entries() == global.sorted_entries());
}

TEST_CASE("topk heap ordering and eviction") {
  TopKHeap<VertexId> heap(3);
  heap.offer(1.0, 10);
  heap.offer(2.0, 20);
  heap.offer(2.0, 5);   // tie broken by smaller id first
  heap.offer(0.5, 99);  // worse than everything once full
  const auto entries = heap.sorted_entries();
  REQUIRE(entries.size() == 3);
  CHECK(entries[0].id == 5);
  CHECK(entries[1].id == 20);
  CHECK(entries[2].id == 10);
  heap.offer(3.0, 1);
  CHECK(heap.sorted_entries()[0].id == 1);
  CHECK(heap.sorted_entries().back().id == 20);  // (1.0, 10) evicted
  CHECK_THROWS_AS(TopKHeap<VertexId>(0), std::invalid_argument);
}

TEST_CASE("threads mode delivers everything exactly once") {
  for (uint32_t workers : {1u, 4u}) {
    Cluster cluster(ClusterConfig{.workers = workers, .mode = ClusterConfig::Mode::threads});
    std::vector<std::atomic<uint64_t>> received(workers);
    std::vector<Cluster::Handler> handlers;
    for (uint32_t w = 0; w < workers; ++w) {
      handlers.push_back(
          [&received, w](WorkerContext&, Message msg) { received[w] += msg.edge().x; });
    }
    std::vector<std::vector<Cluster::WorkUnit>> work(workers);
    for (uint32_t w = 0; w < workers; ++w) {
      for (int i = 0; i < 100; ++i) {
        work[w].push_back([workers, i](WorkerContext& ctx) {
          ctx.send(static_cast<WorkerId>(i % workers), Message{EdgePayload{1, 0, 0}});
        });
      }
    }
    cluster.run_until_quiescent(handlers, std::move(work));
    uint64_t total = 0;
    for (auto& r : received) total += r.load();
    CHECK(total == 100 * workers);
    CHECK(cluster.messages_sent() == cluster.messages_handled());
    CHECK(cluster.messages_sent() == 100 * workers);
  }
}
