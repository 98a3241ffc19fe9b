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

#ifndef VMEM_TESTS_TEST_SUPPORT_HPP
#define VMEM_TESTS_TEST_SUPPORT_HPP

#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "reference_allocator.hpp"
#include "vmem/allocator.hpp"
#include "vmem/error.hpp"
#include "vmem/topology.hpp"

namespace vmem::testing {

/// A plan with explicit slice counts and 2 MiB slices; host totals are left
/// at zero so no host arithmetic is involved.
inline ReservationPlan slice_plan(std::uint32_t nodes, std::uint64_t per_node_slices, std::uint64_t per_block,
                                  std::uint64_t reserve_slices = 0) {
  ReservationPlan p;
  p.node_count = nodes;
  p.slice_bytes = 2 * kMiB;
  p.big_grain_bytes = per_block * p.slice_bytes;
  p.per_node_reserved_bytes = per_node_slices * p.slice_bytes;
  p.per_node_fault_reserve_bytes = reserve_slices * p.slice_bytes;
  p.validate();
  return p;
}

inline std::vector<RefExtent> to_ref(const AllocGrant& g) {
  std::vector<RefExtent> out;
  for (const Extent& e : g.extents) out.push_back({e.node, e.start_slice, e.n_slices, e.grain == Grain::kBig});
  return out;
}

inline RefError to_ref(Errc e) {
  switch (e) {
    case Errc::kAlign: return RefError::kAlign;
    case Errc::kNoSpace: return RefError::kNoSpace;
    case Errc::kFragBig: return RefError::kFragBig;
    default: return RefError::kNone;
  }
}

inline std::string describe(const std::vector<RefExtent>& extents) {
  std::ostringstream out;
  for (const RefExtent& e : extents) out << '[' << e.node << ':' << e.start << '+' << e.count << (e.big ? 'B' : 's') << ']';
  return out.str();
}

inline bool same_memory(const MemoryTopology& topo, const ReferenceAllocator& ref) {
  for (NodeId n = 0; n < topo.node_count(); ++n) {
    const SliceArray& s = topo.slices(n);
    const std::string& m = ref.memory()[n];
    for (SliceIndex i = 0; i < s.size(); ++i) {
      const char want = s[i] == SliceState::kFree ? 'F' : s[i] == SliceState::kUsed ? 'U' : 'H';
      if (m[i] != want) return false;
    }
  }
  return true;
}

/// One randomized alloc/free sequence on a reduced geometry, run against
/// both the library and the reference. Returns a description of the first
/// divergence, if any.
inline std::optional<std::string> oracle_sequence(std::mt19937_64& rng, int steps) {
  const std::uint64_t spb = 4;
  const auto nodes = static_cast<std::uint32_t>(std::uniform_int_distribution<int>(1, 3)(rng));
  const std::uint64_t per_node = std::uniform_int_distribution<std::uint64_t>(8, 64)(rng);
  const std::uint64_t reserve = std::uniform_int_distribution<std::uint64_t>(0, 3)(rng);

  MemoryTopology topo(slice_plan(nodes, per_node, spb, reserve));
  ReferenceAllocator ref(nodes, per_node, spb, reserve);
  // A few quarantined slices so some blocks start out fragmented.
  const int bad = std::uniform_int_distribution<int>(0, 3)(rng);
  for (int i = 0; i < bad; ++i) {
    const NodeId n = std::uniform_int_distribution<NodeId>(0, nodes - 1)(rng);
    const SliceIndex s = std::uniform_int_distribution<SliceIndex>(0, per_node - reserve - 1)(rng);
    if (topo.slices(n)[s] != SliceState::kFree) continue;
    topo.mark_error(n, s);
    ref.poison(n, s);
  }
  Allocator alloc(topo);

  std::ostringstream log;
  log << "nodes=" << nodes << " per_node=" << per_node << " reserve=" << reserve << ':';
  for (int step = 0; step < steps; ++step) {
    const auto live = ref.live_ids();
    if (!live.empty() && std::uniform_int_distribution<int>(0, 2)(rng) == 0) {
      const std::uint64_t id = live[std::uniform_int_distribution<std::size_t>(0, live.size() - 1)(rng)];
      ref.free(id);
      alloc.free(id);
      log << " free " << id;
    } else {
      const auto psize = static_cast<PageSize>(std::uniform_int_distribution<int>(0, 2)(rng));
      const std::uint64_t slices = std::uniform_int_distribution<std::uint64_t>(0, per_node)(rng);
      const bool balanced = nodes > 1 && std::uniform_int_distribution<int>(0, 1)(rng) == 1;
      const int node = balanced ? -1 : std::uniform_int_distribution<int>(0, static_cast<int>(nodes) - 1)(rng);
      log << " alloc " << slices << ' ' << page_size_name(psize) << ' ' << node;

      const RefResult want = ref.alloc(slices, static_cast<RefPsize>(psize), node);
      AllocRequest req;
      req.size = slices * topo.slice_bytes();
      req.psize = psize;
      req.policy = balanced ? NodePolicy::balanced() : NodePolicy::single(static_cast<NodeId>(node));
      RefError got_error = RefError::kNone;
      std::vector<RefExtent> got;
      std::uint64_t got_id = 0;
      try {
        const AllocGrant& g = alloc.alloc(req);
        got = to_ref(g);
        got_id = g.grant_id;
      } catch (const VmemError& e) {
        got_error = to_ref(e.code());
      }
      if (got_error != want.error) {
        return log.str() + " -> error mismatch: got " + std::to_string(static_cast<int>(got_error)) + " want " +
               std::to_string(static_cast<int>(want.error));
      }
      if (got != want.extents || got_id != want.id) {
        return log.str() + " -> extents mismatch: got " + describe(got) + " want " + describe(want.extents);
      }
    }
    if (!same_memory(topo, ref)) return log.str() + " -> slice state mismatch";
  }
  return std::nullopt;
}

}  // namespace vmem::testing

#endif  // VMEM_TESTS_TEST_SUPPORT_HPP
