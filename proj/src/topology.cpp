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

#include "vmem/topology.hpp"

#include <string>

#include "vmem/error.hpp"

namespace vmem {

void ReservationPlan::validate() const {
  auto fail = [](const std::string& msg) { throw VmemError(Errc::kInvalid, msg); };
  if (node_count == 0) fail("node count must be >= 1");
  if (slice_bytes == 0 || !is_aligned(slice_bytes, kBasePageBytes)) {
    fail("slice size must be a non-zero multiple of 4k");
  }
  if (big_grain_bytes == 0 || !is_aligned(big_grain_bytes, slice_bytes)) {
    fail("slice size must divide the big grain");
  }
  if (!is_aligned(per_node_reserved_bytes, slice_bytes) || per_node_reserved_bytes == 0) {
    fail("per-node reservation must be a non-zero multiple of the slice size");
  }
  if (!is_aligned(per_node_fault_reserve_bytes, slice_bytes)) {
    fail("fault reserve must be slice-aligned");
  }
  if (per_node_fault_reserve_bytes > per_node_reserved_bytes) {
    fail("per-node reservation is smaller than the fault reserve");
  }
  if (host_total_bytes != 0 &&
      node_count * per_node_reserved_bytes + host_os_bytes > host_total_bytes) {
    fail("reservation plus host OS share exceeds host memory");
  }
}

ReservationPlan plan_reservation(Bytes host_total, Bytes host_os, std::uint32_t nodes, Bytes slice,
                                 Bytes big_grain, Bytes fault_reserve) {
  if (nodes == 0) throw VmemError(Errc::kInvalid, "node count must be >= 1");
  if (host_os >= host_total) throw VmemError(Errc::kInvalid, "host OS share must be below host memory");
  if (slice == 0 || big_grain == 0 || big_grain % slice != 0) {
    throw VmemError(Errc::kInvalid, "slice size must divide the big grain");
  }
  ReservationPlan plan;
  plan.node_count = nodes;
  plan.host_total_bytes = host_total;
  plan.host_os_bytes = host_os;
  plan.slice_bytes = slice;
  plan.big_grain_bytes = big_grain;
  plan.per_node_fault_reserve_bytes = fault_reserve;
  plan.per_node_reserved_bytes = align_down((host_total - host_os) / nodes, slice);
  if (plan.per_node_reserved_bytes < fault_reserve || plan.per_node_reserved_bytes == 0) {
    throw VmemError(Errc::kInvalid, "per-node reservation of " + format_size(plan.per_node_reserved_bytes) +
                                        " is smaller than the fault reserve");
  }
  plan.validate();
  return plan;
}

MemoryTopology::MemoryTopology(const ReservationPlan& plan) : plan_(plan) {
  plan_.validate();
  const Bytes span = align_up(plan_.per_node_reserved_bytes, plan_.big_grain_bytes);
  const std::uint64_t slice_count = plan_.slices_per_node();
  const std::uint64_t reserve_slices = plan_.per_node_fault_reserve_bytes / plan_.slice_bytes;
  nodes_.reserve(plan_.node_count);
  for (NodeId id = 0; id < plan_.node_count; ++id) {
    NodeDesc node;
    node.node_id = id;
    node.phys_base = static_cast<PhysAddr>(id) * span;
    node.reserved_bytes = plan_.per_node_reserved_bytes;
    node.fault_reserve_bytes = plan_.per_node_fault_reserve_bytes;
    node.sellable_bytes = node.reserved_bytes - node.fault_reserve_bytes;
    node.slices = SliceArray(id, slice_count);
    for (SliceIndex s = slice_count - reserve_slices; s < slice_count; ++s) {
      node.slices.transition(s, SliceState::kFree, SliceState::kHole);
    }
    nodes_.push_back(std::move(node));
  }
}

const NodeDesc& MemoryTopology::node(NodeId id) const {
  if (id >= nodes_.size()) throw VmemError(Errc::kNoEnt, "no node " + std::to_string(id));
  return nodes_[id];
}

SliceArray& MemoryTopology::mutable_slices(NodeId id) {
  if (id >= nodes_.size()) throw VmemError(Errc::kNoEnt, "no node " + std::to_string(id));
  return nodes_[id].slices;
}

std::uint64_t MemoryTopology::total_slices() const {
  std::uint64_t n = 0;
  for (const auto& node : nodes_) n += node.slices.size();
  return n;
}

SliceHistogram MemoryTopology::histogram() const {
  SliceHistogram total{};
  for (const auto& node : nodes_) {
    for (std::size_t i = 0; i < kSliceStateCount; ++i) total[i] += node.slices.histogram()[i];
  }
  return total;
}

PhysAddr MemoryTopology::slice_phys(NodeId node_id, SliceIndex slice) const {
  return node(node_id).phys_base + slice * plan_.slice_bytes;
}

std::pair<NodeId, SliceIndex> MemoryTopology::locate(PhysAddr pa) const {
  for (const auto& node : nodes_) {
    if (pa >= node.phys_base && pa < node.phys_base + node.reserved_bytes) {
      return {node.node_id, (pa - node.phys_base) / plan_.slice_bytes};
    }
  }
  throw VmemError(Errc::kNoEnt, "physical address " + to_hex(pa) + " is not reserved memory");
}

bool MemoryTopology::is_reserved(PhysAddr pa) const {
  for (const auto& node : nodes_) {
    if (pa >= node.phys_base && pa < node.phys_base + node.reserved_bytes) return true;
  }
  return false;
}

BorrowExtent MemoryTopology::borrow_to_host(NodeId node_id, Bytes size) {
  SliceArray& slices = mutable_slices(node_id);
  if (size == 0 || !is_aligned(size, plan_.slice_bytes)) {
    throw VmemError(Errc::kAlign, "borrow size " + std::to_string(size) + " is not slice-aligned");
  }
  const std::uint64_t want = size / plan_.slice_bytes;
  auto runs = pick_small_slices(slices, plan_.slices_per_block(), want);
  if (!runs) {
    throw VmemError(Errc::kNoSpace, "node " + std::to_string(node_id) + " has " +
                                        std::to_string(slices.count(SliceState::kFree)) +
                                        " free slices, borrow needs " + std::to_string(want));
  }
  for (const SliceRun& r : *runs) {
    for (SliceIndex s = r.start; s < r.end(); ++s) slices.transition(s, SliceState::kFree, SliceState::kBorrow);
  }
  BorrowExtent extent;
  extent.node_id = node_id;
  extent.start_slice = runs->front().start;
  extent.n_slices = want;
  extent.runs = std::move(*runs);
  extent.token = next_borrow_token_++;
  borrowed_.emplace(extent.token, extent);
  return extent;
}

void MemoryTopology::reclaim_from_host(std::uint64_t token) {
  auto it = borrowed_.find(token);
  if (it == borrowed_.end()) {
    throw VmemError(Errc::kNoEnt, "borrow token " + std::to_string(token) + " is not outstanding");
  }
  SliceArray& slices = mutable_slices(it->second.node_id);
  for (const SliceRun& r : it->second.runs) {
    for (SliceIndex s = r.start; s < r.end(); ++s) slices.transition(s, SliceState::kBorrow, SliceState::kFree);
  }
  borrowed_.erase(it);
}

SliceState MemoryTopology::inject_mce(NodeId node_id, SliceIndex slice) {
  SliceArray& slices = mutable_slices(node_id);
  const SliceState current = slices.at(slice);
  SliceState next;
  switch (current) {
    case SliceState::kFree: next = SliceState::kMce; break;
    case SliceState::kUsed: next = SliceState::kMceUsed; break;
    default:
      throw VmemError(Errc::kIllegalTransition, "cannot inject MCE into " +
                                                    std::string(slice_state_name(current)) + " slice " +
                                                    std::to_string(slice));
  }
  slices.transition(slice, current, next);
  ++mce_count_;
  return next;
}

void MemoryTopology::mark_error(NodeId node_id, SliceIndex slice) {
  // Free -> Error is not an edge of the state machine; a bad range found at
  // init goes through Used so the quarantine stays terminal.
  SliceArray& slices = mutable_slices(node_id);
  slices.transition(slice, SliceState::kFree, SliceState::kUsed);
  slices.transition(slice, SliceState::kUsed, SliceState::kError);
}

}  // namespace vmem
