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

#ifndef VMEM_HOTSWAP_HPP
#define VMEM_HOTSWAP_HPP

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vmem/core.hpp"

namespace vmem {

enum class CoreState : std::uint8_t { kLoaded, kActive, kDraining, kUnloaded };
std::string_view core_state_name(CoreState state);

/// Functions the core exports to other modules (the hypervisor-side
/// fastmap hooks). They are rebound together with the slots.
enum class Export : std::uint8_t { kVaToPa, kPaToVa, kEnumerate, kRebindOwner };
inline constexpr std::size_t kExportCount = 4;
std::string_view export_name(Export e);

/// A loaded core version. Shells are never destroyed while the framework
/// lives: a dispatcher that read an old table may still touch `inflight`.
struct CoreModule {
  std::uint32_t version = 0;
  std::uint32_t layout_version = 0;
  std::uint32_t reserved_field_count = 0;
  std::atomic<std::uint64_t> refcnt{0};
  std::atomic<std::uint64_t> inflight{0};
  std::atomic<std::uint64_t> calls{0};
  std::atomic<CoreState> state{CoreState::kLoaded};
  std::unique_ptr<CoreOps> ops;
};

inline constexpr std::size_t kMaxLoadedCores = 2;

/// Immutable binding of every slot and export to a core, plus the set of
/// loaded cores. Replaced whole, so dispatchers never take a lock to read it.
struct OpsTable {
  std::array<CoreModule*, kSlotCount> slots{};
  std::array<CoreModule*, kExportCount> exports{};
  std::array<CoreModule*, kMaxLoadedCores> loaded{};
};

struct UpgradeReport {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  std::uint64_t rebound_slots = 0;
  std::uint64_t rebound_exports = 0;
  std::uint64_t rebound_mappings = 0;
  std::uint64_t transferred_refs = 0;
  std::uint64_t wait_time_ns = 0;
  std::uint64_t total_ns = 0;
  std::uint64_t old_refcnt_final = 0;
  bool introspection_rebuilt = false;
  bool conservation_held = true;
};

/// Everything a caller can observe about VmemState, for before/after
/// comparisons. Wall-clock and call counters are excluded.
struct ObservableState {
  std::vector<SliceArray> slices;
  std::map<std::uint64_t, AllocGrant> grants;
  std::vector<FastMapRecord> records;
  std::map<std::uint64_t, BorrowExtent> borrowed;
  std::map<Pid, SpaceId> open_files;
  std::map<std::uint64_t, Pid> grant_owner;
  std::uint64_t leaves = 0;
  MetadataReport metadata;

  friend bool operator==(const ObservableState&, const ObservableState&) = default;
};
/// Takes the manager lock; ops bindings of records are left out because
/// upgrades legitimately change them.
ObservableState observe(VmemState& state);

class Framework {
 public:
  struct Options {
    std::chrono::nanoseconds upgrade_timeout = std::chrono::seconds(1);
  };

  explicit Framework(VmemState& state) : Framework(state, Options{}) {}
  Framework(VmemState& state, Options options);
  ~Framework();
  Framework(const Framework&) = delete;
  Framework& operator=(const Framework&) = delete;

  VmemState& state() { return *state_; }

  /// Loads an inert core. Errors: EBUSY with two cores already loaded,
  /// EEXIST for a version that is already loaded.
  CoreModule& load_core(std::uint32_t version, std::uint32_t layout_version = kMetadataLayoutVersion,
                        std::uint32_t reserved_field_count = kReservedFieldCount);
  /// Unloads a Loaded core with no references (EBUSY otherwise).
  void unload_core(std::uint32_t version);
  /// Binds every slot and export to `version` when nothing is active yet.
  void activate(std::uint32_t version);

  /// The upgrade protocol. ELAYOUT leaves everything untouched;
  /// ETIMEDOUT restores the previous bindings and references.
  UpgradeReport upgrade(std::uint32_t old_version, std::uint32_t new_version);
  UpgradeReport upgrade(std::uint32_t old_version, std::uint32_t new_version, std::chrono::nanoseconds timeout);

  /// Routes a call through `slot`. EINVAL when `args` belong to another
  /// slot, ENOENT when the slot is unbound.
  CallResult dispatch(Slot slot, const CallArgs& args);
  CallResult call_export(Export e, const CallArgs& args);

  // Typed wrappers over dispatch.
  SpaceId open(Pid pid);
  void close(Pid pid);
  AllocGrant alloc(Pid owner, const AllocRequest& request);
  void free(std::uint64_t grant_id);
  MapOutcome map(const MapArgs& args);
  void unmap(Pid pid, std::uint64_t grant_id);
  FaultOutcome fault(Pid pid, VirtAddr va);
  BorrowExtent borrow(NodeId node, Bytes size);
  void reclaim(std::uint64_t token);
  SliceState inject_mce(NodeId node, SliceIndex slice);
  Translation va_to_pa(Pid pid, VirtAddr va);
  Owner pa_to_va(NodeId node, Pfn pfn);
  std::vector<ExtentRegion> enumerate(Pid pid);
  std::optional<WalkResult> walk(Pid pid, VirtAddr va);
  std::size_t rebind_owner(Pid old_pid, Pid new_pid);

  /// Reads the introspection endpoint registered by the active core.
  std::string introspect();

  std::optional<std::uint32_t> active_version() const;
  /// Live (not Unloaded) cores, ordered by version.
  std::vector<const CoreModule*> cores() const;
  const CoreModule* core(std::uint32_t version) const;
  std::array<std::optional<std::uint32_t>, kSlotCount> slot_versions() const;
  std::array<std::optional<std::uint32_t>, kExportCount> export_versions() const;
  /// Version owning the introspection endpoint, if any.
  std::optional<std::uint32_t> endpoint_owner() const;

  /// Test hook run after a call is pinned to its core and before it
  /// executes. Used to stall a call inside the old version.
  void set_pinned_hook(std::function<void(std::uint32_t version)> hook);

 private:
  CallResult invoke(bool is_export, std::size_t index, const CallArgs& args);
  CoreModule* pin(bool is_export, std::size_t index);
  void account(CoreModule& core, const CallResult& result);
  CoreModule* live_core(std::uint32_t version) const;
  FrameworkView view() const;
  void publish(std::unique_ptr<OpsTable> table);

  VmemState* state_;
  Options options_;
  std::atomic<const OpsTable*> table_;

  // Control plane: load/unload/upgrade run one at a time. Dispatchers
  // never take this lock.
  mutable std::mutex control_mutex_;
  std::vector<std::unique_ptr<CoreModule>> modules_;  // every shell ever loaded
  std::vector<std::unique_ptr<OpsTable>> tables_;     // every table ever published

  // Introspection endpoint; guarded by the manager lock.
  CoreModule* endpoint_ = nullptr;

  std::function<void(std::uint32_t)> pinned_hook_;
};

}  // namespace vmem

#endif  // VMEM_HOTSWAP_HPP
