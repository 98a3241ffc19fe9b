// Copyright 2026 The Vmem Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VMEM_MEMTYPE_HPP
#define VMEM_MEMTYPE_HPP

#include <cstdint>
#include <map>
#include <vector>

#include "vmem/units.hpp"

namespace vmem {

enum class CacheType : std::uint8_t { kWriteBack };

struct MemtypeCounters {
  std::uint64_t slow_lookups = 0;
  std::uint64_t fast_hits = 0;

  friend bool operator==(const MemtypeCounters&, const MemtypeCounters&) = default;
};

/// Cache-attribute bookkeeping consulted once per installed leaf.
///
/// Slow path: the range is looked up in an ordered tree of tracked ranges
/// and inserted when absent. Fast path: the range lies inside an untracked
/// region (the reserved memory) and gets the default type with no tree
/// access.
class MemtypeRegistry {
 public:
  struct Tracked {
    PhysAddr end = 0;
    CacheType type = CacheType::kWriteBack;
    std::uint64_t refs = 0;
  };

  void add_untracked(PhysAddr start, Bytes length);
  bool is_untracked(PhysAddr start, Bytes length) const;

  /// Resolves the cache type for one leaf. Returns true on a fast-path hit.
  bool reserve(PhysAddr start, Bytes length, bool fast_path);
  /// Drops a tracked reference taken by a slow-path reserve; no-op for
  /// untracked ranges.
  void release(PhysAddr start, Bytes length);

  const MemtypeCounters& counters() const { return counters_; }
  std::size_t tracked_count() const { return tracked_.size(); }
  const std::vector<std::pair<PhysAddr, PhysAddr>>& untracked() const { return untracked_; }

 private:
  std::map<PhysAddr, Tracked> tracked_;
  std::vector<std::pair<PhysAddr, PhysAddr>> untracked_;  // [start, end), sorted
  MemtypeCounters counters_;
};

}  // namespace vmem

#endif  // VMEM_MEMTYPE_HPP
