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

#include <gtest/gtest.h>

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <random>
#include <thread>

#include "vmem/error.hpp"
#include "vmem/hotswap.hpp"

namespace vmem {
namespace {

using namespace std::chrono_literals;

constexpr VirtAddr kBase = VirtAddr{1} << 42;

Errc error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const VmemError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return Errc::kInvalid;
}

struct Harness {
  Harness() : state(plan_reservation(18 * kGiB, 2 * kGiB, 2)), fw(state) {
    fw.load_core(0);
    fw.activate(0);
  }

  // One VM: open, allocate, map eagerly (or on demand) at kBase.
  std::uint64_t vm(Pid pid, Bytes size, bool on_demand = false, NodePolicy policy = NodePolicy::single(0)) {
    fw.open(pid);
    const AllocGrant g = fw.alloc(pid, {size, PageSize::kMix, policy, on_demand});
    fw.map({pid, g.grant_id, kBase, on_demand ? MapMode::kOnDemand : MapMode::kEager, true});
    return g.grant_id;
  }

  VmemState state;
  Framework fw;
};

std::uint32_t other(std::uint32_t v) { return v == 0 ? 1 : 0; }

TEST(Hotswap, CoreLifecycleErrors) {
  Harness h;
  EXPECT_EQ(error_of([&] { h.fw.load_core(0); }), Errc::kExists);
  h.fw.load_core(1);
  EXPECT_EQ(error_of([&] { h.fw.load_core(2); }), Errc::kBusy);
  EXPECT_EQ(error_of([&] { h.fw.unload_core(0); }), Errc::kBusy);  // active
  EXPECT_EQ(error_of([&] { h.fw.unload_core(5); }), Errc::kNoEnt);
  EXPECT_EQ(error_of([&] { h.fw.activate(1); }), Errc::kBusy);
  EXPECT_EQ(error_of([&] { h.fw.upgrade(1, 0); }), Errc::kStateMismatch);
  h.fw.unload_core(1);
  ASSERT_EQ(h.fw.cores().size(), 1u);
  h.fw.load_core(2);
  EXPECT_EQ(h.fw.cores().size(), 2u);
}

TEST(Hotswap, DispatchChecksSlotAndBinding) {
  VmemState state(plan_reservation(18 * kGiB, 2 * kGiB, 2));
  Framework fw(state);
  EXPECT_EQ(error_of([&] { fw.open(1); }), Errc::kNoEnt);  // nothing bound yet
  fw.load_core(0);
  fw.activate(0);
  EXPECT_EQ(error_of([&] { fw.dispatch(Slot::kClose, OpenArgs{1}); }), Errc::kInvalid);
  EXPECT_EQ(error_of([&] { fw.call_export(Export::kPaToVa, VaToPaArgs{1, 0}); }), Errc::kInvalid);
  EXPECT_EQ(fw.open(1), 1u);
  EXPECT_EQ(error_of([&] { fw.open(1); }), Errc::kExists);
  EXPECT_EQ(fw.core(0)->calls.load(), 2u);
}

// ten single-node mappings: 8 slots, 4 exports, 10 references.
TEST(Hotswap, UpgradeMovesEveryReference) {
  Harness h;
  for (Pid pid = 1; pid <= 10; ++pid) h.vm(pid, 256 * kMiB + 2 * kMiB * pid, false, NodePolicy::single(pid % 2));
  EXPECT_EQ(h.fw.core(0)->refcnt.load(), 10u);
  h.fw.load_core(1);
  const UpgradeReport r = h.fw.upgrade(0, 1);
  EXPECT_EQ(r.rebound_slots, 8u);
  EXPECT_EQ(r.rebound_exports, 4u);
  EXPECT_EQ(r.rebound_mappings, 10u);
  EXPECT_EQ(r.transferred_refs, 10u);
  EXPECT_EQ(r.old_refcnt_final, 0u);
  EXPECT_TRUE(r.conservation_held);
  EXPECT_TRUE(r.introspection_rebuilt);
  EXPECT_EQ(h.fw.core(1)->refcnt.load(), 10u);
  EXPECT_EQ(h.fw.core(0), nullptr);
  EXPECT_EQ(h.fw.active_version(), 1u);
  EXPECT_EQ(h.fw.endpoint_owner(), 1u);
  for (auto v : h.fw.slot_versions()) EXPECT_EQ(v, 1u);
  for (auto v : h.fw.export_versions()) EXPECT_EQ(v, 1u);
  EXPECT_EQ(h.state.fastmap.count_bound_to(1), 10u);
}

TEST(Hotswap, BalancedMappingsCountPerRecord) {
  Harness h;
  h.vm(1, 3 * kGiB, false, NodePolicy::balanced());
  EXPECT_EQ(h.fw.core(0)->refcnt.load(), 2u);
  h.fw.load_core(1);
  EXPECT_EQ(h.fw.upgrade(0, 1).rebound_mappings, 2u);
  h.fw.close(1);
  EXPECT_EQ(h.fw.core(1)->refcnt.load(), 0u);
}

TEST(Hotswap, RefusesIncompatibleLayout) {
  Harness h;
  h.vm(1, kGiB);
  h.fw.load_core(1, kMetadataLayoutVersion - 1);
  const ObservableState before = observe(h.state);
  EXPECT_EQ(error_of([&] { h.fw.upgrade(0, 1); }), Errc::kIncompatible);
  h.fw.unload_core(1);
  h.fw.load_core(1, kMetadataLayoutVersion, kReservedFieldCount + 1);
  EXPECT_EQ(error_of([&] { h.fw.upgrade(0, 1); }), Errc::kIncompatible);
  for (auto v : h.fw.slot_versions()) EXPECT_EQ(v, 0u);
  EXPECT_EQ(h.fw.core(0)->refcnt.load(), 1u);
  EXPECT_EQ(h.fw.core(1)->refcnt.load(), 0u);
  EXPECT_EQ(observe(h.state), before);
}

TEST(Hotswap, StateIsIdenticalAcrossUpgrade) {
  Harness h;
  h.vm(1, 2 * kGiB + 6 * kMiB);
  h.vm(2, 64 * kMiB, true, NodePolicy::balanced());
  h.fw.fault(2, kBase);
  const auto token = h.fw.borrow(1, 8 * kMiB).token;
  h.fw.inject_mce(1, 3);
  const ObservableState before = observe(h.state);
  for (std::uint32_t v = 0; v < 6; ++v) {
    h.fw.load_core(other(v % 2));
    h.fw.upgrade(v % 2, other(v % 2));
    ASSERT_EQ(observe(h.state), before);
  }
  h.fw.reclaim(token);
}

TEST(Hotswap, AllocateBeforeFreeAfter) {
  Harness h;
  h.fw.open(1);
  const AllocGrant g = h.fw.alloc(1, {3 * kGiB, PageSize::kMix, NodePolicy::balanced()});
  h.fw.load_core(1);
  h.fw.upgrade(0, 1);
  h.fw.free(g.grant_id);
  EXPECT_EQ(h.state.topology.histogram()[static_cast<std::size_t>(SliceState::kUsed)], 0u);
  EXPECT_TRUE(h.state.allocator.grants().empty());
  EXPECT_EQ(error_of([&] { h.fw.free(g.grant_id); }), Errc::kNoEnt);
}

TEST(Hotswap, VersionOneStampsReservedFields) {
  Harness h;
  h.vm(1, 8 * kMiB, true);
  h.fw.load_core(1);
  h.fw.upgrade(0, 1);
  h.fw.open(2);
  const AllocGrant g = h.fw.alloc(2, {8 * kMiB, PageSize::kSmall, NodePolicy::single(1), true});
  EXPECT_EQ(g.reserved[0], 2u);  // second allocation overall
  h.fw.map({2, g.grant_id, kBase, MapMode::kOnDemand, true});
  h.fw.fault(2, kBase);
  h.fw.fault(2, kBase + 1);  // same leaf, no new fault
  h.fw.fault(2, kBase + 6 * kMiB);
  EXPECT_EQ(h.state.allocator.grant(g.grant_id).reserved[1], 2u);
  EXPECT_EQ(h.state.allocator.grant(1).reserved[0], 0u);  // allocated under v0
  const std::string text = h.fw.introspect();
  EXPECT_EQ(text.rfind("vmem_mm v1 (grant stats)\n", 0), 0u);
  EXPECT_NE(text.find("grant 2 bytes=8388608 alloc_seq=2 faults=2\n"), std::string::npos);
  // Back to v0: the fields survive untouched and v0 ignores them.
  h.fw.load_core(0);
  h.fw.upgrade(1, 0);
  EXPECT_EQ(h.state.allocator.grant(g.grant_id).reserved[1], 2u);
  EXPECT_EQ(h.fw.introspect().rfind("vmem_mm v0\n", 0), 0u);
}

TEST(Hotswap, RetiredCoreGetsNoCalls) {
  Harness h;
  h.vm(1, kGiB);
  const CoreModule* v0 = h.fw.core(0);
  h.fw.load_core(1);
  h.fw.upgrade(0, 1);
  const std::uint64_t calls = v0->calls.load();
  h.fw.va_to_pa(1, kBase);
  h.fw.close(1);
  EXPECT_EQ(v0->calls.load(), calls);
  EXPECT_EQ(v0->state.load(), CoreState::kUnloaded);
  EXPECT_EQ(v0->inflight.load(), 0u);
}

TEST(Hotswap, RebindOwnerKeepsTranslations) {
  Harness h;
  h.vm(1, kGiB + 2 * kMiB, false, NodePolicy::balanced());
  const Translation t = h.fw.va_to_pa(1, kBase + 5);
  EXPECT_EQ(h.fw.rebind_owner(1, 9), 2u);
  EXPECT_EQ(h.fw.va_to_pa(9, kBase + 5), t);
  EXPECT_EQ(error_of([&] { h.fw.va_to_pa(1, kBase); }), Errc::kNoEnt);
  EXPECT_EQ(h.fw.pa_to_va(t.node, t.pfn).pid, 9);
  EXPECT_EQ(h.state.open_files.count(9), 1u);
  h.fw.close(9);
  EXPECT_EQ(h.fw.core(0)->refcnt.load(), 0u);
}

// A lock-free translation stalled inside v0 keeps the grace period open;
// the upgrade must time out and put everything back.
TEST(Hotswap, TimeoutRestoresBindingsAndReferences) {
  Harness h;
  for (Pid pid = 1; pid <= 4; ++pid) h.vm(pid, kGiB);
  h.fw.load_core(1);

  std::mutex m;
  std::condition_variable cv;
  bool stalled = false;
  bool release = false;
  h.fw.set_pinned_hook([&](std::uint32_t version) {
    if (version != 0) return;
    std::unique_lock lock(m);
    if (release) return;
    stalled = true;
    cv.notify_all();
    cv.wait(lock, [&] { return release; });
  });
  std::thread reader([&] { h.fw.va_to_pa(1, kBase); });
  {
    std::unique_lock lock(m);
    cv.wait(lock, [&] { return stalled; });
  }

  const auto slots = h.fw.slot_versions();
  const auto exports = h.fw.export_versions();
  const ObservableState before = observe(h.state);
  EXPECT_EQ(error_of([&] { h.fw.upgrade(0, 1, 20ms); }), Errc::kTimeout);
  EXPECT_EQ(h.fw.slot_versions(), slots);
  EXPECT_EQ(h.fw.export_versions(), exports);
  EXPECT_EQ(h.fw.core(0)->refcnt.load(), 4u);
  EXPECT_EQ(h.fw.core(1)->refcnt.load(), 0u);
  EXPECT_EQ(h.fw.core(0)->state.load(), CoreState::kActive);
  EXPECT_EQ(h.fw.core(1)->state.load(), CoreState::kLoaded);
  EXPECT_EQ(h.fw.endpoint_owner(), 0u);
  EXPECT_EQ(h.state.fastmap.count_bound_to(0), 4u);
  EXPECT_EQ(observe(h.state), before);

  {
    std::lock_guard lock(m);
    release = true;
  }
  cv.notify_all();
  reader.join();
  const UpgradeReport r = h.fw.upgrade(0, 1, 1s);
  EXPECT_EQ(r.transferred_refs, 4u);
  EXPECT_EQ(r.old_refcnt_final, 0u);
}

// Translations racing alternating upgrades always see a whole core and
// the right answer.
TEST(Hotswap, ConcurrentTranslationsDuringUpgrades) {
  Harness h;
  h.vm(1, 2 * kGiB + 8 * kMiB, false, NodePolicy::balanced());
  std::vector<std::pair<VirtAddr, Translation>> expected;
  for (const ExtentRegion& r : h.fw.enumerate(1)) {
    for (Bytes off = 0; off < r.size; off += 64 * kMiB) expected.push_back({r.va + off, h.fw.va_to_pa(1, r.va + off)});
  }
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> wrong{0};
  std::atomic<std::uint64_t> done{0};
  std::thread reader([&] {
    std::size_t i = 0;
    while (!stop.load()) {
      const auto& [va, t] = expected[i++ % expected.size()];
      if (h.fw.va_to_pa(1, va) != t) ++wrong;
      ++done;
    }
  });
  while (done.load() == 0) std::this_thread::yield();
  std::uint32_t v = 0;
  for (int i = 0; i < 300; ++i) {
    std::this_thread::yield();
    h.fw.load_core(other(v));
    const UpgradeReport r = h.fw.upgrade(v, other(v));
    ASSERT_EQ(r.old_refcnt_final, 0u);
    ASSERT_TRUE(r.conservation_held);
    v = other(v);
  }
  stop = true;
  reader.join();
  EXPECT_EQ(wrong.load(), 0u);
  EXPECT_GT(done.load(), 0u);
}

}  // namespace
}  // namespace vmem
