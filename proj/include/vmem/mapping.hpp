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

#ifndef VMEM_MAPPING_HPP
#define VMEM_MAPPING_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "vmem/allocator.hpp"
#include "vmem/memtype.hpp"
#include "vmem/page_table.hpp"
#include "vmem/topology.hpp"

namespace vmem {

using SpaceId = std::uint64_t;

enum class MapMode : std::uint8_t { kEager, kOnDemand };

/// One extent of a grant placed in virtual memory.
struct Segment {
  VirtAddr va = 0;
  PhysAddr pa = 0;
  Bytes bytes = 0;
  Grain grain = Grain::kSmall;
  NodeId node = 0;
  SliceIndex start_slice = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Contiguous VA run of a grant that lives on one node.
struct NodeGroup {
  NodeId node = 0;
  VirtAddr va_base = 0;
  std::vector<Segment> segments;

  Bytes bytes() const;
};

/// Virtual layout of a grant at `va_base`: node groups in extent order,
/// each starting big-grain aligned when it holds big extents, big extents
/// first inside a group. Segments are contiguous within a group.
std::vector<NodeGroup> layout_grant(const AllocGrant& grant, const MemoryTopology& topo, VirtAddr va_base);

/// Bytes of virtual space the layout spans, including alignment gaps.
Bytes layout_span(const std::vector<NodeGroup>& groups);

struct MapReport {
  std::uint64_t leaves_big = 0;
  std::uint64_t leaves_small = 0;
  std::uint64_t slow_lookups = 0;
  std::uint64_t fast_hits = 0;

  friend bool operator==(const MapReport&, const MapReport&) = default;
};

struct FaultEvent {
  VirtAddr va = 0;
  Grain grain = Grain::kSmall;
  std::uint64_t tick = 0;  // logical clock, not wall time

  friend bool operator==(const FaultEvent&, const FaultEvent&) = default;
};

struct GrantFaults {
  std::uint64_t count = 0;
  std::vector<FaultEvent> events;

  friend bool operator==(const GrantFaults&, const GrantFaults&) = default;
};

struct Mapping {
  std::uint64_t grant_id = 0;
  VirtAddr va_base = 0;
  VirtAddr va_end = 0;
  MapMode mode = MapMode::kEager;
  bool fast_path = true;
  std::vector<NodeGroup> groups;
};

struct AddressSpace {
  SpaceId id = 0;
  SimPageTable table;
  std::map<VirtAddr, Mapping> mappings;  // keyed by va_base
};

struct FaultOutcome {
  bool installed = false;
  Grain grain = Grain::kSmall;
  VirtAddr leaf_va = 0;
  PhysAddr pa = 0;
};

/// Page-table side of the manager. Not internally synchronized.
class MappingService {
 public:
  MappingService(const MemoryTopology& topology, const Allocator& allocator);

  void create_space(SpaceId id);
  void destroy_space(SpaceId id);
  bool has_space(SpaceId id) const { return spaces_.contains(id); }
  const AddressSpace& space(SpaceId id) const;

  MapReport map_grant(SpaceId space, const AllocGrant& grant, VirtAddr va_base, MapMode mode, bool fast_path);
  void unmap_grant(SpaceId space, std::uint64_t grant_id);

  /// Demand-maps the leaf covering `va`. Returns installed = false if the
  /// leaf was already present. Throws kViolation outside every mapping.
  FaultOutcome fault(SpaceId space, VirtAddr va);

  std::optional<WalkResult> walk(SpaceId space, VirtAddr va) const;
  const Mapping* find_mapping(SpaceId space, VirtAddr va) const;
  const Mapping* mapping_of(std::uint64_t grant_id) const;
  std::optional<SpaceId> space_of(std::uint64_t grant_id) const;

  const MemtypeRegistry& memtype() const { return memtype_; }
  const std::map<std::uint64_t, GrantFaults>& fault_log() const { return fault_log_; }
  const GrantFaults* faults_for(std::uint64_t grant_id) const;

  std::uint64_t leaf_count() const;

  /// Leaf level used for each grain; L3/L2 with the default 1g/2m geometry.
  PageLevel level_for(Grain grain) const { return grain == Grain::kBig ? big_level_ : small_level_; }

 private:
  AddressSpace& mutable_space(SpaceId id);
  void install_leaf(AddressSpace& as, const Mapping& m, VirtAddr va, PhysAddr pa, Grain grain, MapReport& report);

  const MemoryTopology* topology_;
  const Allocator* allocator_;
  PageLevel big_level_;
  PageLevel small_level_;
  std::map<SpaceId, AddressSpace> spaces_;
  std::map<std::uint64_t, SpaceId> grant_space_;
  MemtypeRegistry memtype_;
  std::map<std::uint64_t, GrantFaults> fault_log_;
  std::uint64_t tick_ = 0;
};

}  // namespace vmem

#endif  // VMEM_MAPPING_HPP
