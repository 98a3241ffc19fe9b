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

#ifndef VMEM_FASTMAP_HPP
#define VMEM_FASTMAP_HPP

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <vector>

#include "vmem/allocator.hpp"
#include "vmem/mapping.hpp"
#include "vmem/units.hpp"

namespace vmem {

struct FastMapEntry {
  NodeId node = 0;
  Pfn start_pfn = 0;  // 4 KiB frame number in the flat physical space
  Bytes size = 0;

  friend bool operator==(const FastMapEntry&, const FastMapEntry&) = default;
};

/// Registry entry for one mapped node group of a grant. Entries are in VA
/// order; entry k starts at va_base plus the sizes of entries 0..k-1.
struct FastMapRecord {
  std::uint64_t record_id = 0;
  Pid owner_pid = 0;
  SpaceId space = 0;
  VirtAddr va_base = 0;
  std::uint64_t grant_id = 0;
  std::vector<FastMapEntry> entries;
  std::uint32_t ops_binding = 0;  // core version whose ops serve this mapping
  std::uint32_t layout_version = kMetadataLayoutVersion;
  std::array<std::uint64_t, kReservedFieldCount> reserved{};

  Bytes bytes() const;

  friend bool operator==(const FastMapRecord&, const FastMapRecord&) = default;
};

struct Translation {
  NodeId node = 0;
  Pfn pfn = 0;
  std::uint64_t offset = 0;  // byte offset inside the 4 KiB frame

  PhysAddr pa() const { return from_pfn(pfn) + offset; }
  friend bool operator==(const Translation&, const Translation&) = default;
};

struct Owner {
  Pid pid = 0;
  VirtAddr va = 0;

  friend bool operator==(const Owner&, const Owner&) = default;
};

struct ExtentRegion {
  VirtAddr va = 0;
  NodeId node = 0;
  PhysAddr phys_start = 0;
  Bytes size = 0;

  friend bool operator==(const ExtentRegion&, const ExtentRegion&) = default;
};

/// Per-mapping registry giving VA <-> PA translation in O(log records +
/// log entries), independent of how many pages are mapped.
///
/// Reads take a shared lock; registration, removal and rebinding take an
/// exclusive one, so a reader sees either the old or the new registry.
class FastMapRegistry {
 public:
  /// One record per node group of the grant's layout at `va_base`.
  std::vector<FastMapRecord> register_mapping(Pid pid, SpaceId space, VirtAddr va_base, const AllocGrant& grant,
                                              const MemoryTopology& topo, std::uint32_t ops_binding);

  /// Removes every record of `grant_id` and returns them.
  std::vector<FastMapRecord> unregister_grant(std::uint64_t grant_id);

  Translation va_to_pa(Pid pid, VirtAddr va) const;
  Owner pa_to_va(NodeId node, Pfn pfn) const;
  std::vector<ExtentRegion> enumerate_extents(Pid pid) const;

  /// Moves all records of `old_pid` to `new_pid` / `new_space`.
  std::size_t rebind_owner(Pid old_pid, Pid new_pid, SpaceId new_space);

  /// Points every record bound to `from` at `to`; returns how many moved.
  std::size_t rebind_ops(std::uint32_t from, std::uint32_t to);
  std::size_t count_bound_to(std::uint32_t version) const;

  /// Runs `fn` on the record under the exclusive lock.
  template <typename Fn>
  void update_record(std::uint64_t record_id, Fn&& fn) {
    std::unique_lock lock(mutex_);
    fn(mutable_record(record_id));
  }

  std::vector<FastMapRecord> records() const;
  std::vector<FastMapRecord> records_of_grant(std::uint64_t grant_id) const;
  std::size_t record_count() const;
  std::size_t entry_count() const;
  bool has_pid(Pid pid) const;

  /// Metadata bytes for the live records: 120 per node per record plus 24
  /// per entry.
  Bytes metadata_bytes(std::uint32_t node_count) const;

 private:
  struct Stored {
    FastMapRecord record;
    std::vector<VirtAddr> entry_va;  // prefix sums, parallel to entries
  };
  FastMapRecord& mutable_record(std::uint64_t record_id);
  void erase_locked(std::uint64_t record_id);

  mutable std::shared_mutex mutex_;
  std::map<std::uint64_t, Stored> records_;
  std::map<Pid, std::map<VirtAddr, std::uint64_t>> by_pid_;
  std::map<PhysAddr, std::pair<std::uint64_t, std::size_t>> by_phys_;  // entry start -> (record, entry)
  std::uint64_t next_record_id_ = 1;
};

}  // namespace vmem

#endif  // VMEM_FASTMAP_HPP
