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

#include "vmem/mapping.hpp"

#include <algorithm>
#include <string>

#include "vmem/error.hpp"

namespace vmem {

Bytes NodeGroup::bytes() const {
  Bytes total = 0;
  for (const Segment& s : segments) total += s.bytes;
  return total;
}

std::vector<NodeGroup> layout_grant(const AllocGrant& grant, const MemoryTopology& topo, VirtAddr va_base) {
  std::vector<NodeGroup> groups;
  VirtAddr cursor = va_base;
  for (const Extent& e : grant.extents) {
    if (groups.empty() || groups.back().node != e.node) {
      const bool has_big = std::any_of(grant.extents.begin(), grant.extents.end(), [&](const Extent& x) {
        return x.node == e.node && x.grain == Grain::kBig;
      });
      if (has_big) cursor = align_up(cursor, topo.big_grain_bytes());
      groups.push_back({e.node, cursor, {}});
    }
    Segment seg;
    seg.va = cursor;
    seg.pa = topo.slice_phys(e.node, e.start_slice);
    seg.bytes = e.n_slices * topo.slice_bytes();
    seg.grain = e.grain;
    seg.node = e.node;
    seg.start_slice = e.start_slice;
    groups.back().segments.push_back(seg);
    cursor += seg.bytes;
  }
  return groups;
}

Bytes layout_span(const std::vector<NodeGroup>& groups) {
  if (groups.empty()) return 0;
  const Segment& last = groups.back().segments.back();
  return last.va + last.bytes - groups.front().va_base;
}

namespace {

// Largest page level whose size divides `unit`.
PageLevel leaf_level_for(Bytes unit) {
  for (PageLevel level : {PageLevel::kL3, PageLevel::kL2, PageLevel::kL1}) {
    if (is_aligned(unit, page_level_bytes(level))) return level;
  }
  throw VmemError(Errc::kAlign, "grain " + std::to_string(unit) + " is not a multiple of 4k");
}

}  // namespace

MappingService::MappingService(const MemoryTopology& topology, const Allocator& allocator)
    : topology_(&topology),
      allocator_(&allocator),
      big_level_(leaf_level_for(topology.big_grain_bytes())),
      small_level_(leaf_level_for(topology.slice_bytes())) {
  for (const NodeDesc& node : topology.nodes()) memtype_.add_untracked(node.phys_base, node.reserved_bytes);
}

void MappingService::create_space(SpaceId id) {
  if (!spaces_.try_emplace(id).second) {
    throw VmemError(Errc::kExists, "address space " + std::to_string(id) + " already exists");
  }
  spaces_.at(id).id = id;
}

void MappingService::destroy_space(SpaceId id) {
  const AddressSpace& as = space(id);
  if (!as.mappings.empty()) {
    throw VmemError(Errc::kBusy, "address space " + std::to_string(id) + " still has mappings");
  }
  spaces_.erase(id);
}

const AddressSpace& MappingService::space(SpaceId id) const {
  auto it = spaces_.find(id);
  if (it == spaces_.end()) throw VmemError(Errc::kNoEnt, "no address space " + std::to_string(id));
  return it->second;
}

AddressSpace& MappingService::mutable_space(SpaceId id) {
  auto it = spaces_.find(id);
  if (it == spaces_.end()) throw VmemError(Errc::kNoEnt, "no address space " + std::to_string(id));
  return it->second;
}

void MappingService::install_leaf(AddressSpace& as, const Mapping& m, VirtAddr va, PhysAddr pa, Grain grain,
                                  MapReport& report) {
  const PageLevel level = level_for(grain);
  const Bytes size = page_level_bytes(level);
  as.table.install(va, pa, level);
  if (memtype_.reserve(pa, size, m.fast_path)) {
    ++report.fast_hits;
  } else {
    ++report.slow_lookups;
  }
  ++(grain == Grain::kBig ? report.leaves_big : report.leaves_small);
}

MapReport MappingService::map_grant(SpaceId space_id, const AllocGrant& grant, VirtAddr va_base, MapMode mode,
                                    bool fast_path) {
  AddressSpace& as = mutable_space(space_id);
  if (!allocator_->contains(grant.grant_id)) {
    throw VmemError(Errc::kNoEnt, "grant " + std::to_string(grant.grant_id) + " is not live");
  }
  if (grant_space_.contains(grant.grant_id)) {
    throw VmemError(Errc::kExists, "grant " + std::to_string(grant.grant_id) + " is already mapped");
  }
  const bool has_big = std::any_of(grant.extents.begin(), grant.extents.end(),
                                   [](const Extent& e) { return e.grain == Grain::kBig; });
  const Bytes align = has_big ? topology_->big_grain_bytes() : topology_->slice_bytes();
  if (!is_aligned(va_base, align)) {
    throw VmemError(Errc::kAlign, "va_base " + to_hex(va_base) + " must be aligned to " + format_size(align));
  }

  Mapping m;
  m.grant_id = grant.grant_id;
  m.va_base = va_base;
  m.mode = mode;
  m.fast_path = fast_path;
  m.groups = layout_grant(grant, *topology_, va_base);
  m.va_end = va_base + layout_span(m.groups);
  if (m.va_end > kVirtAddrLimit) throw VmemError(Errc::kInvalid, "mapping exceeds the virtual address space");

  // Reject overlap with any existing mapping of this space up front so a
  // failed map never leaves partial leaves behind.
  auto next = as.mappings.lower_bound(va_base);
  if ((next != as.mappings.end() && next->second.va_base < m.va_end) ||
      (next != as.mappings.begin() && std::prev(next)->second.va_end > va_base)) {
    throw VmemError(Errc::kOverlap, "range " + to_hex(va_base) + ".." + to_hex(m.va_end) + " is occupied");
  }

  MapReport report;
  if (mode == MapMode::kEager) {
    for (const NodeGroup& g : m.groups) {
      for (const Segment& s : g.segments) {
        const Bytes leaf = page_level_bytes(level_for(s.grain));
        for (Bytes off = 0; off < s.bytes; off += leaf) install_leaf(as, m, s.va + off, s.pa + off, s.grain, report);
      }
    }
  } else {
    fault_log_.try_emplace(grant.grant_id);
  }
  grant_space_[grant.grant_id] = space_id;
  as.mappings.emplace(va_base, std::move(m));
  return report;
}

void MappingService::unmap_grant(SpaceId space_id, std::uint64_t grant_id) {
  AddressSpace& as = mutable_space(space_id);
  auto owner = grant_space_.find(grant_id);
  if (owner == grant_space_.end() || owner->second != space_id) {
    throw VmemError(Errc::kNoEnt, "grant " + std::to_string(grant_id) + " is not mapped in space " +
                                      std::to_string(space_id));
  }
  auto it = std::find_if(as.mappings.begin(), as.mappings.end(),
                         [&](const auto& kv) { return kv.second.grant_id == grant_id; });
  const Mapping& m = it->second;
  for (const NodeGroup& g : m.groups) {
    for (const Segment& s : g.segments) {
      const PageLevel level = level_for(s.grain);
      const Bytes leaf = page_level_bytes(level);
      for (Bytes off = 0; off < s.bytes; off += leaf) {
        if (!as.table.walk(s.va + off)) continue;  // never faulted in
        as.table.remove(s.va + off, level);
        if (!m.fast_path) memtype_.release(s.pa + off, leaf);
      }
    }
  }
  as.mappings.erase(it);
  grant_space_.erase(owner);
}

const Mapping* MappingService::find_mapping(SpaceId space_id, VirtAddr va) const {
  const AddressSpace& as = space(space_id);
  auto it = as.mappings.upper_bound(va);
  if (it == as.mappings.begin()) return nullptr;
  --it;
  return va < it->second.va_end ? &it->second : nullptr;
}

FaultOutcome MappingService::fault(SpaceId space_id, VirtAddr va) {
  AddressSpace& as = mutable_space(space_id);
  const Mapping* m = find_mapping(space_id, va);
  const Segment* seg = nullptr;
  if (m != nullptr) {
    for (const NodeGroup& g : m->groups) {
      for (const Segment& s : g.segments) {
        if (va >= s.va && va < s.va + s.bytes) seg = &s;
      }
    }
  }
  if (seg == nullptr) throw VmemError(Errc::kViolation, "access to unmapped address " + to_hex(va));

  FaultOutcome out;
  out.grain = seg->grain;
  const Bytes leaf = page_level_bytes(level_for(seg->grain));
  out.leaf_va = seg->va + align_down(va - seg->va, leaf);
  out.pa = seg->pa + (out.leaf_va - seg->va);
  if (as.table.walk(va)) return out;

  MapReport ignored;
  install_leaf(as, *m, out.leaf_va, out.pa, seg->grain, ignored);
  GrantFaults& log = fault_log_[m->grant_id];
  ++log.count;
  log.events.push_back({out.leaf_va, seg->grain, tick_++});
  out.installed = true;
  return out;
}

std::optional<WalkResult> MappingService::walk(SpaceId space_id, VirtAddr va) const {
  return space(space_id).table.walk(va);
}

const Mapping* MappingService::mapping_of(std::uint64_t grant_id) const {
  auto owner = grant_space_.find(grant_id);
  if (owner == grant_space_.end()) return nullptr;
  for (const auto& [va, m] : spaces_.at(owner->second).mappings) {
    if (m.grant_id == grant_id) return &m;
  }
  return nullptr;
}

std::optional<SpaceId> MappingService::space_of(std::uint64_t grant_id) const {
  auto owner = grant_space_.find(grant_id);
  if (owner == grant_space_.end()) return std::nullopt;
  return owner->second;
}

const GrantFaults* MappingService::faults_for(std::uint64_t grant_id) const {
  auto it = fault_log_.find(grant_id);
  return it == fault_log_.end() ? nullptr : &it->second;
}

std::uint64_t MappingService::leaf_count() const {
  std::uint64_t n = 0;
  for (const auto& [id, as] : spaces_) n += as.table.leaf_count();
  return n;
}

}  // namespace vmem
