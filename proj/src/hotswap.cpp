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

#include "vmem/hotswap.hpp"

#include <algorithm>
#include <thread>

#include "vmem/error.hpp"

namespace vmem {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t elapsed_ns(Clock::time_point since) {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - since).count());
}

std::optional<Export> export_for(const CallArgs& args) {
  if (std::holds_alternative<VaToPaArgs>(args)) return Export::kVaToPa;
  if (std::holds_alternative<PaToVaArgs>(args)) return Export::kPaToVa;
  if (std::holds_alternative<EnumerateArgs>(args)) return Export::kEnumerate;
  if (std::holds_alternative<RebindOwnerArgs>(args)) return Export::kRebindOwner;
  return std::nullopt;
}

// Spin briefly, then yield, until `done` or the deadline.
template <typename Pred>
bool wait_until(Pred done, Clock::time_point deadline) {
  for (int spins = 0;; ++spins) {
    if (done()) return true;
    if (Clock::now() >= deadline) return done();
    if (spins >= 64) std::this_thread::yield();
  }
}

}  // namespace

std::string_view core_state_name(CoreState state) {
  switch (state) {
    case CoreState::kLoaded: return "loaded";
    case CoreState::kActive: return "active";
    case CoreState::kDraining: return "draining";
    case CoreState::kUnloaded: return "unloaded";
  }
  return "?";
}

std::string_view export_name(Export e) {
  switch (e) {
    case Export::kVaToPa: return "va_to_pa";
    case Export::kPaToVa: return "pa_to_va";
    case Export::kEnumerate: return "enumerate";
    case Export::kRebindOwner: return "rebind_owner";
  }
  return "?";
}

ObservableState observe(VmemState& state) {
  std::lock_guard lock(state.manager_mutex);
  ObservableState s;
  for (const NodeDesc& node : state.topology.nodes()) s.slices.push_back(node.slices);
  s.grants = state.allocator.grants();
  s.records = state.fastmap.records();
  for (FastMapRecord& r : s.records) r.ops_binding = 0;
  s.borrowed = state.topology.borrowed();
  s.open_files = state.open_files;
  s.grant_owner = state.grant_owner;
  s.leaves = state.mapping.leaf_count();
  s.metadata = state.metadata();
  return s;
}

Framework::Framework(VmemState& state, Options options) : state_(&state), options_(options) {
  tables_.push_back(std::make_unique<OpsTable>());
  table_.store(tables_.back().get());
}

Framework::~Framework() = default;

void Framework::publish(std::unique_ptr<OpsTable> table) {
  tables_.push_back(std::move(table));
  table_.store(tables_.back().get());
}

CoreModule* Framework::live_core(std::uint32_t version) const {
  for (CoreModule* c : table_.load()->loaded) {
    if (c != nullptr && c->version == version) return c;
  }
  return nullptr;
}

CoreModule& Framework::load_core(std::uint32_t version, std::uint32_t layout_version,
                                 std::uint32_t reserved_field_count) {
  std::lock_guard control(control_mutex_);
  auto table = std::make_unique<OpsTable>(*table_.load());
  auto slot = std::find(table->loaded.begin(), table->loaded.end(), nullptr);
  if (live_core(version) != nullptr) {
    throw VmemError(Errc::kExists, "core v" + std::to_string(version) + " is already loaded");
  }
  if (slot == table->loaded.end()) {
    throw VmemError(Errc::kBusy, "two core versions are already loaded");
  }
  auto module = std::make_unique<CoreModule>();
  module->version = version;
  module->layout_version = layout_version;
  module->reserved_field_count = reserved_field_count;
  module->ops = make_core_ops(version);
  *slot = module.get();
  modules_.push_back(std::move(module));
  publish(std::move(table));
  return *modules_.back();
}

void Framework::unload_core(std::uint32_t version) {
  std::lock_guard control(control_mutex_);
  CoreModule* core = live_core(version);
  if (core == nullptr) throw VmemError(Errc::kNoEnt, "core v" + std::to_string(version) + " is not loaded");
  if (core->state.load() != CoreState::kLoaded) {
    throw VmemError(Errc::kBusy, "core v" + std::to_string(version) + " is " +
                                     std::string(core_state_name(core->state.load())));
  }
  if (core->refcnt.load() != 0) {
    throw VmemError(Errc::kBusy, "core v" + std::to_string(version) + " still holds " +
                                     std::to_string(core->refcnt.load()) + " references");
  }
  auto table = std::make_unique<OpsTable>(*table_.load());
  for (CoreModule*& c : table->loaded) {
    if (c == core) c = nullptr;
  }
  core->state.store(CoreState::kUnloaded);
  publish(std::move(table));
}

void Framework::activate(std::uint32_t version) {
  std::lock_guard control(control_mutex_);
  CoreModule* core = live_core(version);
  if (core == nullptr) throw VmemError(Errc::kNoEnt, "core v" + std::to_string(version) + " is not loaded");
  if (active_version()) throw VmemError(Errc::kBusy, "a core is already active");
  std::lock_guard manager(state_->manager_mutex);
  auto table = std::make_unique<OpsTable>(*table_.load());
  table->slots.fill(core);
  table->exports.fill(core);
  core->refcnt.store(state_->fastmap.count_bound_to(version));
  core->state.store(CoreState::kActive);
  publish(std::move(table));
  endpoint_ = core;
}

UpgradeReport Framework::upgrade(std::uint32_t old_version, std::uint32_t new_version) {
  return upgrade(old_version, new_version, options_.upgrade_timeout);
}

UpgradeReport Framework::upgrade(std::uint32_t old_version, std::uint32_t new_version,
                                 std::chrono::nanoseconds timeout) {
  const auto start = Clock::now();
  const auto deadline = start + timeout;
  std::lock_guard control(control_mutex_);

  CoreModule* old_core = live_core(old_version);
  CoreModule* new_core = live_core(new_version);
  if (old_core == nullptr || old_core->state.load() != CoreState::kActive) {
    throw VmemError(Errc::kStateMismatch, "core v" + std::to_string(old_version) + " is not active");
  }
  if (new_core == nullptr || new_core->state.load() != CoreState::kLoaded) {
    throw VmemError(Errc::kStateMismatch, "core v" + std::to_string(new_version) + " is not loaded and idle");
  }
  if (new_core->layout_version < old_core->layout_version ||
      new_core->reserved_field_count != old_core->reserved_field_count) {
    throw VmemError(Errc::kIncompatible, "core v" + std::to_string(new_version) + " cannot read layout " +
                                             std::to_string(old_core->layout_version) + " metadata");
  }

  // Mutators are excluded across the whole swap so that the registry walk
  // sees a frozen set of mappings and an abort restores exactly.
  std::unique_lock manager(state_->manager_mutex, std::defer_lock);
  if (!manager.try_lock_until(deadline)) {
    throw VmemError(Errc::kTimeout, "manager lock not acquired before the upgrade deadline");
  }

  UpgradeReport report;
  report.from = old_version;
  report.to = new_version;
  const std::uint64_t ref_sum = old_core->refcnt.load() + new_core->refcnt.load();

  // 1. Rebind slots and exports in one table swap.
  const OpsTable* before = table_.load();
  auto table = std::make_unique<OpsTable>(*before);
  for (CoreModule*& c : table->slots) {
    if (c != old_core) continue;
    c = new_core;
    ++report.rebound_slots;
  }
  for (CoreModule*& c : table->exports) {
    if (c != old_core) continue;
    c = new_core;
    ++report.rebound_exports;
  }
  old_core->state.store(CoreState::kDraining);
  publish(std::move(table));
  const OpsTable* swapped = table_.load();

  // 2. Per-mapping rebinding and reference transfer.
  report.rebound_mappings = state_->fastmap.rebind_ops(old_version, new_version);
  for (std::uint64_t i = 0; i < report.rebound_mappings; ++i) {
    old_core->refcnt.fetch_sub(1);
    new_core->refcnt.fetch_add(1);
    ++report.transferred_refs;
    if (old_core->refcnt.load() + new_core->refcnt.load() != ref_sum) report.conservation_held = false;
  }

  // 3. Grace period: calls pinned to the old core drain out.
  const auto wait_start = Clock::now();
  const bool quiesced = wait_until([&] { return old_core->inflight.load() == 0; }, deadline);
  report.wait_time_ns = elapsed_ns(wait_start);
  if (!quiesced) {
    // Put back the previous binding. The old table object is still alive,
    // but republishing a copy keeps every published table distinct.
    auto restored = std::make_unique<OpsTable>(*swapped);
    restored->slots = before->slots;
    restored->exports = before->exports;
    publish(std::move(restored));
    state_->fastmap.rebind_ops(new_version, old_version);
    for (std::uint64_t i = 0; i < report.transferred_refs; ++i) {
      new_core->refcnt.fetch_sub(1);
      old_core->refcnt.fetch_add(1);
    }
    old_core->state.store(CoreState::kActive);
    throw VmemError(Errc::kTimeout, "core v" + std::to_string(old_version) + " still has " +
                                        std::to_string(old_core->inflight.load()) +
                                        " calls in flight at the upgrade deadline");
  }

  // 4. Rebuild the introspection endpoint. Nothing of the old format is
  // carried over; the new core renders its own.
  endpoint_ = new_core;
  report.introspection_rebuilt = true;

  // 5. Retire the old core.
  report.old_refcnt_final = old_core->refcnt.load();
  if (report.old_refcnt_final != 0) report.conservation_held = false;
  auto retired = std::make_unique<OpsTable>(*table_.load());
  for (CoreModule*& c : retired->loaded) {
    if (c == old_core) c = nullptr;
  }
  old_core->state.store(CoreState::kUnloaded);
  new_core->state.store(CoreState::kActive);
  publish(std::move(retired));
  report.total_ns = elapsed_ns(start);
  return report;
}

CoreModule* Framework::pin(bool is_export, std::size_t index) {
  for (;;) {
    const OpsTable* table = table_.load();
    CoreModule* core = is_export ? table->exports[index] : table->slots[index];
    if (core == nullptr) {
      throw VmemError(Errc::kNoEnt, std::string(is_export ? "export " : "slot ") +
                                        std::string(is_export ? export_name(static_cast<Export>(index))
                                                              : slot_name(static_cast<Slot>(index))) +
                                        " is not bound");
    }
    core->inflight.fetch_add(1);
    const OpsTable* now = table_.load();
    if ((is_export ? now->exports[index] : now->slots[index]) == core) return core;
    core->inflight.fetch_sub(1);
  }
}

void Framework::account(CoreModule& core, const CallResult& result) {
  // Mutators run under the manager lock, which upgrades also hold, so
  // every record touched here is bound to the core executing the call.
  auto& refcnt = core.refcnt;
  if (const auto* map = std::get_if<MapOutcome>(&result)) {
    refcnt.fetch_add(map->records.size());
  } else if (const auto* delta = std::get_if<RecordDelta>(&result)) {
    refcnt.fetch_add(delta->added.size());
    refcnt.fetch_sub(delta->removed.size());
  }
}

FrameworkView Framework::view() const {
  FrameworkView v;
  const OpsTable* table = table_.load();
  if (auto active = active_version()) v.active_version = *active;
  for (const CoreModule* c : cores()) {
    v.cores.push_back({c->version, c->refcnt.load(), c->calls.load(), std::string(core_state_name(c->state.load()))});
  }
  for (std::size_t i = 0; i < kSlotCount; ++i) {
    v.slot_versions[i] = table->slots[i] != nullptr ? table->slots[i]->version : 0;
  }
  return v;
}

CallResult Framework::invoke(bool is_export, std::size_t index, const CallArgs& args) {
  std::unique_lock<std::timed_mutex> manager(state_->manager_mutex, std::defer_lock);
  if (needs_exclusion(args)) manager.lock();
  CoreModule* core = pin(is_export, index);
  struct Unpin {
    CoreModule* core;
    ~Unpin() { core->inflight.fetch_sub(1); }
  } unpin{core};
  if (pinned_hook_) pinned_hook_(core->version);
  const bool introspection = std::holds_alternative<IntrospectArgs>(args);
  if (!introspection) core->calls.fetch_add(1);
  CallResult result = core->ops->call(*state_, args, introspection ? view() : FrameworkView{});
  account(*core, result);
  return result;
}

CallResult Framework::dispatch(Slot slot, const CallArgs& args) {
  if (slot_for(args) != slot) {
    throw VmemError(Errc::kInvalid, "arguments do not belong to slot " + std::string(slot_name(slot)));
  }
  return invoke(false, static_cast<std::size_t>(slot), args);
}

CallResult Framework::call_export(Export e, const CallArgs& args) {
  if (export_for(args) != e) {
    throw VmemError(Errc::kInvalid, "arguments do not belong to export " + std::string(export_name(e)));
  }
  return invoke(true, static_cast<std::size_t>(e), args);
}

SpaceId Framework::open(Pid pid) { return std::get<Opened>(dispatch(Slot::kOpen, OpenArgs{pid})).space; }

void Framework::close(Pid pid) { dispatch(Slot::kClose, CloseArgs{pid}); }

AllocGrant Framework::alloc(Pid owner, const AllocRequest& request) {
  return std::get<AllocGrant>(dispatch(Slot::kAlloc, AllocArgs{owner, request}));
}

void Framework::free(std::uint64_t grant_id) { dispatch(Slot::kFree, FreeArgs{grant_id}); }

MapOutcome Framework::map(const MapArgs& args) { return std::get<MapOutcome>(dispatch(Slot::kMap, args)); }

void Framework::unmap(Pid pid, std::uint64_t grant_id) { dispatch(Slot::kUnmap, UnmapArgs{pid, grant_id}); }

FaultOutcome Framework::fault(Pid pid, VirtAddr va) {
  return std::get<FaultOutcome>(dispatch(Slot::kMap, FaultArgs{pid, va}));
}

BorrowExtent Framework::borrow(NodeId node, Bytes size) {
  return std::get<BorrowExtent>(dispatch(Slot::kAlloc, BorrowArgs{node, size}));
}

void Framework::reclaim(std::uint64_t token) { dispatch(Slot::kFree, ReclaimArgs{token}); }

SliceState Framework::inject_mce(NodeId node, SliceIndex slice) {
  return std::get<SliceState>(dispatch(Slot::kFree, MceArgs{node, slice}));
}

Translation Framework::va_to_pa(Pid pid, VirtAddr va) {
  return std::get<Translation>(call_export(Export::kVaToPa, VaToPaArgs{pid, va}));
}

Owner Framework::pa_to_va(NodeId node, Pfn pfn) {
  return std::get<Owner>(call_export(Export::kPaToVa, PaToVaArgs{node, pfn}));
}

std::vector<ExtentRegion> Framework::enumerate(Pid pid) {
  return std::get<std::vector<ExtentRegion>>(call_export(Export::kEnumerate, EnumerateArgs{pid}));
}

std::optional<WalkResult> Framework::walk(Pid pid, VirtAddr va) {
  return std::get<std::optional<WalkResult>>(dispatch(Slot::kTranslate, WalkArgs{pid, va}));
}

std::size_t Framework::rebind_owner(Pid old_pid, Pid new_pid) {
  return std::get<std::size_t>(call_export(Export::kRebindOwner, RebindOwnerArgs{old_pid, new_pid}));
}

std::string Framework::introspect() {
  std::lock_guard manager(state_->manager_mutex);
  if (endpoint_ == nullptr) throw VmemError(Errc::kNoEnt, "no introspection endpoint registered");
  return endpoint_->ops->introspect(*state_, view());
}

std::optional<std::uint32_t> Framework::active_version() const {
  for (const CoreModule* c : table_.load()->loaded) {
    if (c != nullptr && c->state.load() == CoreState::kActive) return c->version;
  }
  return std::nullopt;
}

std::vector<const CoreModule*> Framework::cores() const {
  std::vector<const CoreModule*> out;
  for (const CoreModule* c : table_.load()->loaded) {
    if (c != nullptr) out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const CoreModule* a, const CoreModule* b) { return a->version < b->version; });
  return out;
}

const CoreModule* Framework::core(std::uint32_t version) const { return live_core(version); }

std::array<std::optional<std::uint32_t>, kSlotCount> Framework::slot_versions() const {
  std::array<std::optional<std::uint32_t>, kSlotCount> out;
  const OpsTable* table = table_.load();
  for (std::size_t i = 0; i < kSlotCount; ++i) {
    if (table->slots[i] != nullptr) out[i] = table->slots[i]->version;
  }
  return out;
}

std::array<std::optional<std::uint32_t>, kExportCount> Framework::export_versions() const {
  std::array<std::optional<std::uint32_t>, kExportCount> out;
  const OpsTable* table = table_.load();
  for (std::size_t i = 0; i < kExportCount; ++i) {
    if (table->exports[i] != nullptr) out[i] = table->exports[i]->version;
  }
  return out;
}

std::optional<std::uint32_t> Framework::endpoint_owner() const {
  std::lock_guard manager(state_->manager_mutex);
  if (endpoint_ == nullptr) return std::nullopt;
  return endpoint_->version;
}

void Framework::set_pinned_hook(std::function<void(std::uint32_t)> hook) { pinned_hook_ = std::move(hook); }

}  // namespace vmem
