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

#include "dsk/cluster.hpp"

#include <atomic>
#include <deque>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "dsk/hll.hpp"
#include "dsk/rng.hpp"

namespace dsk {

WorkerId Partitioner::operator()(VertexId v) const {
  if (mode == Mode::round_robin) return static_cast<WorkerId>(v % workers);
  return static_cast<WorkerId>(hash_u64(v, hash_seed) % workers);
}

struct Cluster::Impl {
  uint32_t workers;
  // queues[to * workers + from], FIFO per (sender, receiver) pair
  std::vector<std::deque<Message>> queues;
  std::vector<std::unique_ptr<std::mutex>> queue_locks;  // per receiver, threads mode
  std::atomic<uint64_t> sent{0};
  std::atomic<uint64_t> handled{0};
  std::atomic<uint64_t> in_flight{0};
  std::atomic<uint64_t> units_remaining{0};
  std::atomic<bool> cap_tripped{false};
  uint64_t queued = 0;  // deterministic mode only
  bool threaded = false;

  explicit Impl(uint32_t p) : workers(p), queues(static_cast<size_t>(p) * p) {
    for (uint32_t i = 0; i < p; ++i) queue_locks.push_back(std::make_unique<std::mutex>());
  }
};

Cluster::Cluster(ClusterConfig config) : config_(config) {
  if (config_.workers == 0) throw std::invalid_argument("cluster needs at least one worker");
}

void Cluster::assert_quiescent(const char* what) const {
  if (running_) {
    throw std::logic_error(std::string(what) + " called before quiescence (barrier violation)");
  }
}

double Cluster::reduce_sum(std::span<const double> per_worker) const {
  assert_quiescent("reduce_sum");
  double total = 0.0;
  for (const double v : per_worker) total += v;
  return total;
}

void WorkerContext::send(WorkerId to, Message message) {
  cluster_->enqueue(self_, to, std::move(message));
}

void Cluster::enqueue(WorkerId from, WorkerId to, Message message) {
  Impl& impl = *impl_;
  if (to >= impl.workers) throw std::logic_error("send to out-of-range worker");
  const size_t slot = static_cast<size_t>(to) * impl.workers + from;
  if (impl.threaded) {
    impl.in_flight.fetch_add(1, std::memory_order_relaxed);
    std::lock_guard<std::mutex> lock(*impl.queue_locks[to]);
    impl.queues[slot].push_back(std::move(message));
  } else {
    impl.queues[slot].push_back(std::move(message));
    ++impl.queued;
  }
  impl.sent.fetch_add(1, std::memory_order_relaxed);
}

void Cluster::run_until_quiescent(std::span<const Handler> handlers,
                                  std::vector<std::vector<WorkUnit>> initial_work) {
  if (handlers.size() != config_.workers) {
    throw std::invalid_argument("one handler per worker required");
  }
  if (initial_work.size() != config_.workers) {
    throw std::invalid_argument("one initial work list per worker required");
  }
  assert_quiescent("run_until_quiescent");
  Impl impl(config_.workers);
  impl.threaded = config_.mode == ClusterConfig::Mode::threads;
  impl_ = &impl;
  running_ = true;
  try {
    if (impl.threaded) {
      run_threads(handlers, initial_work);
    } else {
      run_deterministic(handlers, initial_work);
    }
  } catch (...) {
    running_ = false;
    impl_ = nullptr;
    throw;
  }
  running_ = false;
  impl_ = nullptr;
  sent_ += impl.sent.load();
  handled_ += impl.handled.load();
  if (impl.sent.load() != impl.handled.load()) {
    throw std::logic_error("message accounting mismatch at quiescence");
  }
}

void Cluster::run_deterministic(std::span<const Handler> handlers,
                                std::vector<std::vector<WorkUnit>>& initial_work) {
  Impl& impl = *impl_;
  const uint32_t p = impl.workers;
  std::vector<size_t> unit_cursor(p, 0);
  uint64_t units_left = 0;
  for (const auto& units : initial_work) units_left += units.size();

  std::vector<WorkerContext> contexts;
  contexts.reserve(p);
  for (uint32_t w = 0; w < p; ++w) contexts.emplace_back(*this, w);

  SplitMix64 rng(config_.scheduler_seed);
  const size_t slots = impl.queues.size();
  size_t slot_cursor = 0;
  uint32_t worker_cursor = 0;

  auto deliver = [&](size_t slot) {
    Message msg = std::move(impl.queues[slot].front());
    impl.queues[slot].pop_front();
    --impl.queued;
    const auto to = static_cast<WorkerId>(slot / p);
    const uint64_t done = impl.handled.fetch_add(1, std::memory_order_relaxed) + 1;
    if (done > config_.message_cap) {
      throw std::runtime_error("cluster message cap exceeded: runaway message chain");
    }
    handlers[to](contexts[to], std::move(msg));
  };

  while (impl.queued > 0 || units_left > 0) {
    if (config_.shuffle_delivery) {
      // Pick uniformly among every deliverable queue head and every worker
      // with remaining initial work.
      std::vector<size_t> nonempty;
      for (size_t s = 0; s < slots; ++s) {
        if (!impl.queues[s].empty()) nonempty.push_back(s);
      }
      std::vector<uint32_t> with_units;
      for (uint32_t w = 0; w < p; ++w) {
        if (unit_cursor[w] < initial_work[w].size()) with_units.push_back(w);
      }
      const uint64_t pick = rng.next_below(nonempty.size() + with_units.size());
      if (pick < nonempty.size()) {
        deliver(nonempty[pick]);
      } else {
        const uint32_t w = with_units[pick - nonempty.size()];
        initial_work[w][unit_cursor[w]++](contexts[w]);
        --units_left;
      }
      continue;
    }
    if (impl.queued > 0) {
      while (impl.queues[slot_cursor].empty()) slot_cursor = (slot_cursor + 1) % slots;
      deliver(slot_cursor);
      continue;
    }
    while (unit_cursor[worker_cursor] >= initial_work[worker_cursor].size()) {
      worker_cursor = (worker_cursor + 1) % p;
    }
    initial_work[worker_cursor][unit_cursor[worker_cursor]++](contexts[worker_cursor]);
    --units_left;
  }
}

void Cluster::run_threads(std::span<const Handler> handlers,
                          std::vector<std::vector<WorkUnit>>& initial_work) {
  Impl& impl = *impl_;
  const uint32_t p = impl.workers;
  uint64_t total_units = 0;
  for (const auto& units : initial_work) total_units += units.size();
  impl.units_remaining.store(total_units);

  std::vector<std::thread> threads;
  threads.reserve(p);
  for (uint32_t w = 0; w < p; ++w) {
    threads.emplace_back([&, w] {
      WorkerContext ctx(*this, w);
      size_t unit_cursor = 0;
      uint32_t from_cursor = 0;
      auto& units = initial_work[w];
      while (!impl.cap_tripped.load(std::memory_order_relaxed)) {
        Message msg;
        bool have = false;
        {
          std::lock_guard<std::mutex> lock(*impl.queue_locks[w]);
          for (uint32_t i = 0; i < p && !have; ++i) {
            const uint32_t from = (from_cursor + i) % p;
            auto& queue = impl.queues[static_cast<size_t>(w) * p + from];
            if (!queue.empty()) {
              msg = std::move(queue.front());
              queue.pop_front();
              from_cursor = (from + 1) % p;
              have = true;
            }
          }
        }
        if (have) {
          const uint64_t done = impl.handled.fetch_add(1, std::memory_order_relaxed) + 1;
          if (done > config_.message_cap) {
            impl.cap_tripped.store(true);
            break;
          }
          handlers[w](ctx, std::move(msg));
          impl.in_flight.fetch_sub(1, std::memory_order_acq_rel);
          continue;
        }
        if (unit_cursor < units.size()) {
          units[unit_cursor++](ctx);
          impl.units_remaining.fetch_sub(1, std::memory_order_acq_rel);
          continue;
        }
        if (impl.in_flight.load(std::memory_order_acquire) == 0 &&
            impl.units_remaining.load(std::memory_order_acquire) == 0) {
          break;
        }
        std::this_thread::yield();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (impl.cap_tripped.load()) {
    throw std::runtime_error("cluster message cap exceeded: runaway message chain");
  }
}

}  // namespace dsk
