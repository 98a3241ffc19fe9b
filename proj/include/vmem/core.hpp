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

#ifndef VMEM_CORE_HPP
#define VMEM_CORE_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "vmem/allocator.hpp"
#include "vmem/fastmap.hpp"
#include "vmem/mapping.hpp"
#include "vmem/metadata.hpp"
#include "vmem/topology.hpp"
#include "vmem/zeroing.hpp"

namespace vmem {

/// Everything the core versions share and hand over on upgrade. Owned by
/// the interface layer; a core holds no state of its own beyond counters.
struct VmemState {
  explicit VmemState(const ReservationPlan& plan, bool bench_backing = false);
  VmemState(const VmemState&) = delete;
  VmemState& operator=(const VmemState&) = delete;

  MemoryTopology topology;
  Allocator allocator;
  MappingService mapping;
  FastMapRegistry fastmap;
  BackingStore backing;

  std::map<Pid, SpaceId> open_files;
  std::map<std::uint64_t, Pid> grant_owner;
  SpaceId next_space_id = 1;
  std::uint64_t alloc_sequence = 0;
  std::uint32_t layout_version = kMetadataLayoutVersion;

  /// Manager-wide exclusion: one mutator at a time.
  std::timed_mutex manager_mutex;

  SpaceId space_of_pid(Pid pid) const;
  MetadataReport metadata() const { return metadata_bytes(topology, fastmap, topology.mce_count()); }
};

// Call surface of the eight interface slots. Several management requests
// share a slot with the closest file operation: borrow rides alloc,
// reclaim and MCE injection ride free, owner rebinding rides open, and
// demand faults ride map.
enum class Slot : std::uint8_t { kOpen, kClose, kMap, kUnmap, kAlloc, kFree, kTranslate, kIntrospect };
inline constexpr std::size_t kSlotCount = 8;
std::string_view slot_name(Slot slot);

struct OpenArgs { Pid pid = 0; };
struct RebindOwnerArgs { Pid old_pid = 0; Pid new_pid = 0; };
struct CloseArgs { Pid pid = 0; };
struct MapArgs {
  Pid pid = 0;
  std::uint64_t grant_id = 0;
  VirtAddr va_base = 0;
  MapMode mode = MapMode::kEager;
  bool fast_path = true;
};
struct FaultArgs { Pid pid = 0; VirtAddr va = 0; };
struct UnmapArgs { Pid pid = 0; std::uint64_t grant_id = 0; };
struct AllocArgs { Pid owner = 0; AllocRequest request; };
struct BorrowArgs { NodeId node = 0; Bytes size = 0; };
struct FreeArgs { std::uint64_t grant_id = 0; };
struct ReclaimArgs { std::uint64_t token = 0; };
struct MceArgs { NodeId node = 0; SliceIndex slice = 0; };
struct VaToPaArgs { Pid pid = 0; VirtAddr va = 0; };
struct PaToVaArgs { NodeId node = 0; Pfn pfn = 0; };
struct EnumerateArgs { Pid pid = 0; };
struct WalkArgs { Pid pid = 0; VirtAddr va = 0; };
struct IntrospectArgs {};

using CallArgs = std::variant<OpenArgs, RebindOwnerArgs, CloseArgs, MapArgs, FaultArgs, UnmapArgs, AllocArgs,
                              BorrowArgs, FreeArgs, ReclaimArgs, MceArgs, VaToPaArgs, PaToVaArgs, EnumerateArgs,
                              WalkArgs, IntrospectArgs>;

/// Slot an argument type is dispatched through.
Slot slot_for(const CallArgs& args);
/// Whether the call must run under the manager-wide exclusion.
bool needs_exclusion(const CallArgs& args);

struct Opened {
  SpaceId space = 0;
};

struct MapOutcome {
  MapReport report;
  std::vector<FastMapRecord> records;
};

/// Records that a call added (map) or removed (unmap/free/close). The
/// interface layer moves module references according to their bindings.
struct RecordDelta {
  std::vector<FastMapRecord> added;
  std::vector<FastMapRecord> removed;
};

using CallResult = std::variant<std::monostate, Opened, std::size_t, AllocGrant, MapOutcome, FaultOutcome,
                                RecordDelta, BorrowExtent, SliceState, Translation, Owner,
                                std::vector<ExtentRegion>, std::optional<WalkResult>, std::string>;

/// Facts about the framework an introspection snapshot may report.
struct CoreView {
  std::uint32_t version = 0;
  std::uint64_t refcnt = 0;
  std::uint64_t calls = 0;
  std::string state;
};
struct FrameworkView {
  std::uint32_t active_version = 0;
  std::vector<CoreView> cores;
  std::array<std::uint32_t, kSlotCount> slot_versions{};
};

/// One implementation of the memory-management logic. Versions differ in
/// behavior only through overrides; all state lives in VmemState.
class CoreOps {
 public:
  explicit CoreOps(std::uint32_t version) : version_(version) {}
  virtual ~CoreOps() = default;

  std::uint32_t version() const { return version_; }

  /// Executes one call. The caller holds the manager lock when
  /// needs_exclusion(args) is true.
  CallResult call(VmemState& state, const CallArgs& args, const FrameworkView& view);

  virtual std::string introspect(const VmemState& state, const FrameworkView& view) const;

 protected:
  virtual Opened open(VmemState& state, Pid pid);
  virtual std::size_t rebind_owner(VmemState& state, Pid old_pid, Pid new_pid);
  virtual RecordDelta close(VmemState& state, Pid pid);
  virtual MapOutcome map(VmemState& state, const MapArgs& args);
  virtual FaultOutcome fault(VmemState& state, const FaultArgs& args);
  virtual RecordDelta unmap(VmemState& state, const UnmapArgs& args);
  virtual AllocGrant alloc(VmemState& state, const AllocArgs& args);
  virtual RecordDelta free(VmemState& state, std::uint64_t grant_id);

  std::string common_status(const VmemState& state, const FrameworkView& view) const;

 private:
  std::uint32_t version_;
};

/// Version 1 stamps per-grant statistics into reserved metadata fields:
/// reserved[0] = allocation sequence number, reserved[1] = demand faults
/// served. Older cores carry the fields through untouched.
class CoreOpsV1 : public CoreOps {
 public:
  using CoreOps::CoreOps;
  std::string introspect(const VmemState& state, const FrameworkView& view) const override;

 protected:
  AllocGrant alloc(VmemState& state, const AllocArgs& args) override;
  FaultOutcome fault(VmemState& state, const FaultArgs& args) override;
};

inline constexpr std::size_t kGrantStatAllocSeq = 0;
inline constexpr std::size_t kGrantStatFaults = 1;

/// Version 0 is the base implementation; every later version uses the
/// reserved-field extension.
std::unique_ptr<CoreOps> make_core_ops(std::uint32_t version);

}  // namespace vmem

#endif  // VMEM_CORE_HPP
