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

#include <cstddef>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

namespace dsk {

/// Bounded accumulator of the k best (score, id) pairs under the total order
/// (score descending, id ascending). Ties are therefore broken the same way
/// on every run and every merge order.
template <typename Id>
class TopKHeap {
 public:
  struct Entry {
    double score;
    Id id;
    bool operator==(const Entry&) const = default;
  };

  explicit TopKHeap(size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("TopKHeap capacity must be at least 1");
  }

  size_t capacity() const { return capacity_; }
  size_t size() const { return entries_.size(); }

  static bool better(const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  }

  void offer(double score, const Id& id) {
    const Entry candidate{score, id};
    if (entries_.size() < capacity_) {
      entries_.insert(candidate);
      return;
    }
    const Entry& worst = *entries_.begin();
    if (better(candidate, worst)) {
      entries_.erase(entries_.begin());
      entries_.insert(candidate);
    }
  }

  /// Entries ordered best first.
  std::vector<Entry> sorted_entries() const {
    std::vector<Entry> out(entries_.rbegin(), entries_.rend());
    return out;
  }

  void merge_from(const TopKHeap& other) {
    for (const Entry& e : other.entries_) offer(e.score, e.id);
  }

  static TopKHeap merged(std::span<const TopKHeap> heaps, size_t capacity) {
    TopKHeap out(capacity);
    for (const auto& h : heaps) out.merge_from(h);
    return out;
  }

 private:
  struct WorstFirst {
    bool operator()(const Entry& a, const Entry& b) const { return better(b, a); }
  };

  size_t capacity_;
  std::set<Entry, WorstFirst> entries_;
};

}  // namespace dsk
