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

#include "vmem/core.hpp"

#include <sstream>

#include "vmem/error.hpp"

namespace vmem {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

VmemState::VmemState(const ReservationPlan& plan, bool bench_backing)
    : topology(plan), allocator(topology), mapping(topology, allocator), backing(topology, bench_backing) {}

SpaceId VmemState::space_of_pid(Pid pid) const {
  auto it = open_files.find(pid);
  if (it == open_files.end()) throw VmemError(Errc::kNoEnt, "pid " + std::to_string(pid) + " has no open device");
  return it->second;
}

std::string_view slot_name(Slot slot) {
  switch (slot) {
    case Slot::kOpen: return "open";
    case Slot::kClose: return "close";
    case Slot::kMap: return "map";
    case Slot::kUnmap: return "unmap";
    case Slot::kAlloc: return "alloc";
    case Slot::kFree: return "free";
    case Slot::kTranslate: return "translate";
    case Slot::kIntrospect: return "introspect";
  }
  return "?";
}

Slot slot_for(const CallArgs& args) {
  return std::visit(Overloaded{
                        [](const OpenArgs&) { return Slot::kOpen; },
                        [](const RebindOwnerArgs&) { return Slot::kOpen; },
                        [](const CloseArgs&) { return Slot::kClose; },
                        [](const MapArgs&) { return Slot::kMap; },
                        [](const FaultArgs&) { return Slot::kMap; },
                        [](const UnmapArgs&) { return Slot::kUnmap; },
                        [](const AllocArgs&) { return Slot::kAlloc; },
                        [](const BorrowArgs&) { return Slot::kAlloc; },
                        [](const FreeArgs&) { return Slot::kFree; },
                        [](const ReclaimArgs&) { return Slot::kFree; },
                        [](const MceArgs&) { return Slot::kFree; },
                        [](const VaToPaArgs&) { return Slot::kTranslate; },
                        [](const PaToVaArgs&) { return Slot::kTranslate; },
                        [](const EnumerateArgs&) { return Slot::kTranslate; },
                        [](const WalkArgs&) { return Slot::kTranslate; },
                        [](const IntrospectArgs&) { return Slot::kIntrospect; },
                    },
                    args);
}

bool needs_exclusion(const CallArgs& args) {
  // FastMap lookups synchronize on the registry's own reader lock.
  return !std::holds_alternative<VaToPaArgs>(args) && !std::holds_alternative<PaToVaArgs>(args) &&
         !std::holds_alternative<EnumerateArgs>(args);
}

CallResult CoreOps::call(VmemState& state, const CallArgs& args, const FrameworkView& view) {
  return std::visit(
      Overloaded{
          [&](const OpenArgs& a) -> CallResult { return open(state, a.pid); },
          [&](const RebindOwnerArgs& a) -> CallResult { return rebind_owner(state, a.old_pid, a.new_pid); },
          [&](const CloseArgs& a) -> CallResult { return close(state, a.pid); },
          [&](const MapArgs& a) -> CallResult { return map(state, a); },
          [&](const FaultArgs& a) -> CallResult { return fault(state, a); },
          [&](const UnmapArgs& a) -> CallResult { return unmap(state, a); },
          [&](const AllocArgs& a) -> CallResult { return alloc(state, a); },
          [&](const BorrowArgs& a) -> CallResult { return state.topology.borrow_to_host(a.node, a.size); },
          [&](const FreeArgs& a) -> CallResult { return free(state, a.grant_id); },
          [&](const ReclaimArgs& a) -> CallResult {
            state.topology.reclaim_from_host(a.token);
            return std::monostate{};
          },
          [&](const MceArgs& a) -> CallResult { return state.topology.inject_mce(a.node, a.slice); },
          [&](const VaToPaArgs& a) -> CallResult { return state.fastmap.va_to_pa(a.pid, a.va); },
          [&](const PaToVaArgs& a) -> CallResult { return state.fastmap.pa_to_va(a.node, a.pfn); },
          [&](const EnumerateArgs& a) -> CallResult { return state.fastmap.enumerate_extents(a.pid); },
          [&](const WalkArgs& a) -> CallResult { return state.mapping.walk(state.space_of_pid(a.pid), a.va); },
          [&](const IntrospectArgs&) -> CallResult { return introspect(state, view); },
      },
      args);
}

Opened CoreOps::open(VmemState& state, Pid pid) {
  if (state.open_files.contains(pid)) {
    throw VmemError(Errc::kExists, "pid " + std::to_string(pid) + " already has the device open");
  }
  const SpaceId space = state.next_space_id++;
  state.mapping.create_space(space);
  state.open_files.emplace(pid, space);
  return Opened{space};
}

std::size_t CoreOps::rebind_owner(VmemState& state, Pid old_pid, Pid new_pid) {
  const SpaceId space = state.space_of_pid(old_pid);
  if (state.open_files.contains(new_pid)) {
    throw VmemError(Errc::kExists, "pid " + std::to_string(new_pid) + " already has the device open");
  }
  // The address space survives the process swap; only ownership moves.
  const std::size_t n = state.fastmap.has_pid(old_pid) ? state.fastmap.rebind_owner(old_pid, new_pid, space) : 0;
  state.open_files.erase(old_pid);
  state.open_files.emplace(new_pid, space);
  for (auto& [grant, owner] : state.grant_owner) {
    if (owner == old_pid) owner = new_pid;
  }
  return n;
}

RecordDelta CoreOps::close(VmemState& state, Pid pid) {
  const SpaceId space = state.space_of_pid(pid);
  RecordDelta delta;
  std::vector<std::uint64_t> owned;
  for (const auto& [grant, owner] : state.grant_owner) {
    if (owner == pid) owned.push_back(grant);
  }
  for (std::uint64_t grant : owned) {
    RecordDelta d = free(state, grant);
    delta.removed.insert(delta.removed.end(), d.removed.begin(), d.removed.end());
  }
  // Grants allocated elsewhere but mapped here are unmapped, not freed.
  while (!state.mapping.space(space).mappings.empty()) {
    const std::uint64_t grant = state.mapping.space(space).mappings.begin()->second.grant_id;
    RecordDelta d = unmap(state, {pid, grant});
    delta.removed.insert(delta.removed.end(), d.removed.begin(), d.removed.end());
  }
  state.mapping.destroy_space(space);
  state.open_files.erase(pid);
  return delta;
}

MapOutcome CoreOps::map(VmemState& state, const MapArgs& args) {
  const SpaceId space = state.space_of_pid(args.pid);
  const AllocGrant& grant = state.allocator.grant(args.grant_id);
  MapOutcome out;
  out.report = state.mapping.map_grant(space, grant, args.va_base, args.mode, args.fast_path);
  try {
    out.records = state.fastmap.register_mapping(args.pid, space, args.va_base, grant, state.topology, version());
  } catch (...) {
    state.mapping.unmap_grant(space, args.grant_id);
    throw;
  }
  return out;
}

FaultOutcome CoreOps::fault(VmemState& state, const FaultArgs& args) {
  return state.mapping.fault(state.space_of_pid(args.pid), args.va);
}

RecordDelta CoreOps::unmap(VmemState& state, const UnmapArgs& args) {
  const SpaceId space = state.space_of_pid(args.pid);
  state.mapping.unmap_grant(space, args.grant_id);
  return {{}, state.fastmap.unregister_grant(args.grant_id)};
}

AllocGrant CoreOps::alloc(VmemState& state, const AllocArgs& args) {
  const AllocGrant& grant = state.allocator.alloc(args.request);
  ++state.alloc_sequence;
  if (args.owner != 0) state.grant_owner[grant.grant_id] = args.owner;
  return grant;
}

RecordDelta CoreOps::free(VmemState& state, std::uint64_t grant_id) {
  state.allocator.grant(grant_id);  // ENOENT before touching anything
  RecordDelta delta;
  if (auto space = state.mapping.space_of(grant_id)) {
    state.mapping.unmap_grant(*space, grant_id);
    delta.removed = state.fastmap.unregister_grant(grant_id);
  }
  state.allocator.free(grant_id);
  state.grant_owner.erase(grant_id);
  return delta;
}

std::string CoreOps::common_status(const VmemState& state, const FrameworkView& view) const {
  std::ostringstream out;
  out << "active_version " << view.active_version << '\n';
  out << "layout_version " << state.layout_version << '\n';
  for (const CoreView& c : view.cores) {
    out << "core v" << c.version << " state=" << c.state << " refcnt=" << c.refcnt << " calls=" << c.calls << '\n';
  }
  for (std::size_t i = 0; i < kSlotCount; ++i) {
    out << "slot " << slot_name(static_cast<Slot>(i)) << " v" << view.slot_versions[i] << '\n';
  }
  out << "open_files " << state.open_files.size() << '\n';
  out << "grants " << state.allocator.grants().size() << '\n';
  out << "fastmap_records " << state.fastmap.record_count() << '\n';
  out << "borrowed_extents " << state.topology.borrowed().size() << '\n';
  for (const NodeDesc& node : state.topology.nodes()) {
    out << "node " << node.node_id;
    for (std::size_t s = 0; s < kSliceStateCount; ++s) {
      out << ' ' << slice_state_name(static_cast<SliceState>(s)) << '=' << node.slices.histogram()[s];
    }
    out << '\n';
  }
  out << state.metadata().to_text();
  return out.str();
}

std::string CoreOps::introspect(const VmemState& state, const FrameworkView& view) const {
  return "vmem_mm v" + std::to_string(version()) + '\n' + common_status(state, view);
}

AllocGrant CoreOpsV1::alloc(VmemState& state, const AllocArgs& args) {
  AllocGrant grant = CoreOps::alloc(state, args);
  AllocGrant& stored = state.allocator.mutable_grant(grant.grant_id);
  stored.reserved[kGrantStatAllocSeq] = state.alloc_sequence;
  return stored;
}

FaultOutcome CoreOpsV1::fault(VmemState& state, const FaultArgs& args) {
  FaultOutcome out = CoreOps::fault(state, args);
  if (out.installed) {
    const SpaceId space = state.space_of_pid(args.pid);
    if (const Mapping* m = state.mapping.find_mapping(space, args.va)) {
      ++state.allocator.mutable_grant(m->grant_id).reserved[kGrantStatFaults];
    }
  }
  return out;
}

std::string CoreOpsV1::introspect(const VmemState& state, const FrameworkView& view) const {
  std::ostringstream out;
  out << "vmem_mm v" << version() << " (grant stats)\n" << common_status(state, view);
  for (const auto& [id, grant] : state.allocator.grants()) {
    out << "grant " << id << " bytes=" << grant.total_bytes << " alloc_seq=" << grant.reserved[kGrantStatAllocSeq]
        << " faults=" << grant.reserved[kGrantStatFaults] << '\n';
  }
  return out.str();
}

std::unique_ptr<CoreOps> make_core_ops(std::uint32_t version) {
  if (version == 0) return std::make_unique<CoreOps>(version);
  return std::make_unique<CoreOpsV1>(version);
}

}  // namespace vmem
