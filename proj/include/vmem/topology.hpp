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

#ifndef VMEM_TOPOLOGY_HPP
#define VMEM_TOPOLOGY_HPP

#include <cstdint>
#include <map>
#include <vector>

#include "vmem/placement.hpp"
#include "vmem/slice_state.hpp"
#include "vmem/units.hpp"

namespace vmem {

/// Balanced per-node reservation. Every node reserves the same number of
/// bytes; the fault reserve is carved from the top of each node's region.
struct ReservationPlan {
  std::uint32_t node_count = 1;
  Bytes host_total_bytes = 0;
  Bytes host_os_bytes = 0;
  Bytes per_node_reserved_bytes = 0;
  Bytes per_node_fault_reserve_bytes = kDefaultFaultReserveBytes;
  Bytes slice_bytes = kDefaultSliceBytes;
  Bytes big_grain_bytes = kDefaultBigGrainBytes;

  Bytes per_node_sellable_bytes() const { return per_node_reserved_bytes - per_node_fault_reserve_bytes; }
  std::uint64_t slices_per_node() const { return per_node_reserved_bytes / slice_bytes; }
  std::uint64_t slices_per_block() const { return big_grain_bytes / slice_bytes; }

  /// Throws VmemError(kInvalid) if any invariant is broken.
  void validate() const;

  friend bool operator==(const ReservationPlan&, const ReservationPlan&) = default;
};

/// Splits host memory evenly across nodes after the host OS share. The
/// per-node figure is the slice-aligned floor of (total - os) / nodes; any
/// remainder goes back to the host, never to a single node.
ReservationPlan plan_reservation(Bytes host_total, Bytes host_os, std::uint32_t nodes,
                                 Bytes slice = kDefaultSliceBytes,
                                 Bytes big_grain = kDefaultBigGrainBytes,
                                 Bytes fault_reserve = kDefaultFaultReserveBytes);

struct NodeDesc {
  NodeId node_id = 0;
  PhysAddr phys_base = 0;
  Bytes reserved_bytes = 0;
  Bytes sellable_bytes = 0;
  Bytes fault_reserve_bytes = 0;
  SliceArray slices;

  friend bool operator==(const NodeDesc&, const NodeDesc&) = default;
};

/// Slices lent to the host OS. `runs` is usually a single run; `start_slice`
/// and `n_slices` describe the first run and the total.
struct BorrowExtent {
  NodeId node_id = 0;
  SliceIndex start_slice = 0;
  std::uint64_t n_slices = 0;
  std::vector<SliceRun> runs;
  std::uint64_t token = 0;

  friend bool operator==(const BorrowExtent&, const BorrowExtent&) = default;
};

class MemoryTopology {
 public:
  explicit MemoryTopology(const ReservationPlan& plan);

  const ReservationPlan& plan() const { return plan_; }
  std::uint32_t node_count() const { return static_cast<std::uint32_t>(nodes_.size()); }
  Bytes slice_bytes() const { return plan_.slice_bytes; }
  Bytes big_grain_bytes() const { return plan_.big_grain_bytes; }
  std::uint64_t slices_per_block() const { return plan_.slices_per_block(); }

  const NodeDesc& node(NodeId id) const;
  const std::vector<NodeDesc>& nodes() const { return nodes_; }
  const SliceArray& slices(NodeId id) const { return node(id).slices; }
  SliceArray& mutable_slices(NodeId id);

  std::uint64_t total_slices() const;
  SliceHistogram histogram() const;

  PhysAddr slice_phys(NodeId node, SliceIndex slice) const;
  /// Node and slice containing `pa`; throws kNoEnt outside reserved memory.
  std::pair<NodeId, SliceIndex> locate(PhysAddr pa) const;
  bool is_reserved(PhysAddr pa) const;

  /// Lends `size` bytes of Free slices on `node` to the host OS. Placement
  /// follows small-grain preference so fully free big blocks survive.
  BorrowExtent borrow_to_host(NodeId node, Bytes size);
  void reclaim_from_host(std::uint64_t token);
  const std::map<std::uint64_t, BorrowExtent>& borrowed() const { return borrowed_; }

  /// Machine check on a slice: Free -> Mce, Used -> MceUsed.
  SliceState inject_mce(NodeId node, SliceIndex slice);
  std::uint64_t mce_count() const { return mce_count_; }

  /// Marks a Free slice permanently bad (discovered at init, not an MCE).
  void mark_error(NodeId node, SliceIndex slice);

  friend bool operator==(const MemoryTopology&, const MemoryTopology&) = default;

 private:
  ReservationPlan plan_;
  std::vector<NodeDesc> nodes_;
  std::map<std::uint64_t, BorrowExtent> borrowed_;
  std::uint64_t next_borrow_token_ = 1;
  std::uint64_t mce_count_ = 0;
};

}  // namespace vmem

#endif  // VMEM_TOPOLOGY_HPP
