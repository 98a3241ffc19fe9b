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

#include "vmem/fastmap.hpp"

#include <algorithm>
#include <mutex>
#include <string>

#include "vmem/error.hpp"

namespace vmem {

Bytes FastMapRecord::bytes() const {
  Bytes total = 0;
  for (const FastMapEntry& e : entries) total += e.size;
  return total;
}

std::vector<FastMapRecord> FastMapRegistry::register_mapping(Pid pid, SpaceId space, VirtAddr va_base,
                                                             const AllocGrant& grant, const MemoryTopology& topo,
                                                             std::uint32_t ops_binding) {
  const auto groups = layout_grant(grant, topo, va_base);
  std::unique_lock lock(mutex_);
  for (const auto& [id, stored] : records_) {
    if (stored.record.space == space && stored.record.va_base == va_base) {
      throw VmemError(Errc::kExists, "fastmap already registered at " + to_hex(va_base) + " in space " +
                                         std::to_string(space));
    }
    if (stored.record.grant_id == grant.grant_id) {
      throw VmemError(Errc::kExists, "grant " + std::to_string(grant.grant_id) + " already has a fastmap");
    }
  }

  std::vector<FastMapRecord> out;
  for (const NodeGroup& g : groups) {
    Stored stored;
    FastMapRecord& r = stored.record;
    r.record_id = next_record_id_++;
    r.owner_pid = pid;
    r.space = space;
    r.va_base = g.va_base;
    r.grant_id = grant.grant_id;
    r.ops_binding = ops_binding;
    for (const Segment& s : g.segments) {
      // Adjacent segments (a big run followed by a contiguous small run)
      // still get separate entries, matching the grant's extents.
      r.entries.push_back({s.node, to_pfn(s.pa), s.bytes});
      stored.entry_va.push_back(s.va);
    }
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      by_phys_[from_pfn(r.entries[i].start_pfn)] = {r.record_id, i};
    }
    by_pid_[pid][r.va_base] = r.record_id;
    out.push_back(r);
    records_.emplace(r.record_id, std::move(stored));
  }
  return out;
}

void FastMapRegistry::erase_locked(std::uint64_t record_id) {
  auto it = records_.find(record_id);
  const FastMapRecord& r = it->second.record;
  for (const FastMapEntry& e : r.entries) by_phys_.erase(from_pfn(e.start_pfn));
  auto pid_it = by_pid_.find(r.owner_pid);
  pid_it->second.erase(r.va_base);
  if (pid_it->second.empty()) by_pid_.erase(pid_it);
  records_.erase(it);
}

std::vector<FastMapRecord> FastMapRegistry::unregister_grant(std::uint64_t grant_id) {
  std::unique_lock lock(mutex_);
  std::vector<FastMapRecord> removed;
  for (auto it = records_.begin(); it != records_.end();) {
    const std::uint64_t id = it->first;
    ++it;
    if (records_.at(id).record.grant_id == grant_id) {
      removed.push_back(records_.at(id).record);
      erase_locked(id);
    }
  }
  return removed;
}

Translation FastMapRegistry::va_to_pa(Pid pid, VirtAddr va) const {
  std::shared_lock lock(mutex_);
  auto pid_it = by_pid_.find(pid);
  auto fail = [&] {
    return VmemError(Errc::kNoEnt, "address " + to_hex(va) + " is not mapped for pid " + std::to_string(pid));
  };
  if (pid_it == by_pid_.end()) throw fail();
  auto rec_it = pid_it->second.upper_bound(va);
  if (rec_it == pid_it->second.begin()) throw fail();
  --rec_it;
  const Stored& stored = records_.at(rec_it->second);
  const auto& starts = stored.entry_va;
  auto pos = std::upper_bound(starts.begin(), starts.end(), va);
  if (pos == starts.begin()) throw fail();
  const std::size_t k = static_cast<std::size_t>(pos - starts.begin()) - 1;
  const FastMapEntry& e = stored.record.entries[k];
  const Bytes delta = va - starts[k];
  if (delta >= e.size) throw fail();
  const PhysAddr pa = from_pfn(e.start_pfn) + delta;
  return {e.node, to_pfn(pa), pa % kBasePageBytes};
}

Owner FastMapRegistry::pa_to_va(NodeId node, Pfn pfn) const {
  std::shared_lock lock(mutex_);
  const PhysAddr pa = from_pfn(pfn);
  auto fail = [&] {
    return VmemError(Errc::kNoEnt, "pfn " + to_hex(pfn) + " on node " + std::to_string(node) +
                                       " is not owned by any mapping");
  };
  auto it = by_phys_.upper_bound(pa);
  if (it == by_phys_.begin()) throw fail();
  --it;
  const auto& [record_id, k] = it->second;
  const Stored& stored = records_.at(record_id);
  const FastMapEntry& e = stored.record.entries[k];
  if (e.node != node || pa >= it->first + e.size) throw fail();
  return {stored.record.owner_pid, stored.entry_va[k] + (pa - it->first)};
}

std::vector<ExtentRegion> FastMapRegistry::enumerate_extents(Pid pid) const {
  std::shared_lock lock(mutex_);
  auto pid_it = by_pid_.find(pid);
  if (pid_it == by_pid_.end()) throw VmemError(Errc::kNoEnt, "no fastmap for pid " + std::to_string(pid));
  std::vector<ExtentRegion> out;
  for (const auto& [va_base, record_id] : pid_it->second) {
    const Stored& stored = records_.at(record_id);
    for (std::size_t k = 0; k < stored.record.entries.size(); ++k) {
      const FastMapEntry& e = stored.record.entries[k];
      out.push_back({stored.entry_va[k], e.node, from_pfn(e.start_pfn), e.size});
    }
  }
  return out;
}

std::size_t FastMapRegistry::rebind_owner(Pid old_pid, Pid new_pid, SpaceId new_space) {
  std::unique_lock lock(mutex_);
  auto pid_it = by_pid_.find(old_pid);
  if (pid_it == by_pid_.end()) throw VmemError(Errc::kNoEnt, "no fastmap for pid " + std::to_string(old_pid));
  if (old_pid != new_pid && by_pid_.contains(new_pid)) {
    throw VmemError(Errc::kExists, "pid " + std::to_string(new_pid) + " already owns mappings");
  }
  auto moved = std::move(pid_it->second);
  by_pid_.erase(pid_it);
  for (const auto& [va, record_id] : moved) {
    FastMapRecord& r = records_.at(record_id).record;
    r.owner_pid = new_pid;
    r.space = new_space;
  }
  const std::size_t n = moved.size();
  by_pid_[new_pid] = std::move(moved);
  return n;
}

std::size_t FastMapRegistry::rebind_ops(std::uint32_t from, std::uint32_t to) {
  std::unique_lock lock(mutex_);
  std::size_t n = 0;
  for (auto& [id, stored] : records_) {
    if (stored.record.ops_binding == from) {
      stored.record.ops_binding = to;
      ++n;
    }
  }
  return n;
}

std::size_t FastMapRegistry::count_bound_to(std::uint32_t version) const {
  std::shared_lock lock(mutex_);
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [&](const auto& kv) {
    return kv.second.record.ops_binding == version;
  }));
}

FastMapRecord& FastMapRegistry::mutable_record(std::uint64_t record_id) {
  auto it = records_.find(record_id);
  if (it == records_.end()) throw VmemError(Errc::kNoEnt, "no fastmap record " + std::to_string(record_id));
  return it->second.record;
}

std::vector<FastMapRecord> FastMapRegistry::records() const {
  std::shared_lock lock(mutex_);
  std::vector<FastMapRecord> out;
  out.reserve(records_.size());
  for (const auto& [id, stored] : records_) out.push_back(stored.record);
  return out;
}

std::vector<FastMapRecord> FastMapRegistry::records_of_grant(std::uint64_t grant_id) const {
  std::shared_lock lock(mutex_);
  std::vector<FastMapRecord> out;
  for (const auto& [id, stored] : records_) {
    if (stored.record.grant_id == grant_id) out.push_back(stored.record);
  }
  return out;
}

std::size_t FastMapRegistry::record_count() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

std::size_t FastMapRegistry::entry_count() const {
  std::shared_lock lock(mutex_);
  std::size_t n = 0;
  for (const auto& [id, stored] : records_) n += stored.record.entries.size();
  return n;
}

bool FastMapRegistry::has_pid(Pid pid) const {
  std::shared_lock lock(mutex_);
  return by_pid_.contains(pid);
}

Bytes FastMapRegistry::metadata_bytes(std::uint32_t node_count) const {
  std::shared_lock lock(mutex_);
  Bytes total = 0;
  for (const auto& [id, stored] : records_) total += 120 * Bytes{node_count} + 24 * stored.record.entries.size();
  return total;
}

}  // namespace vmem
