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

#include <algorithm>
#include <functional>
#include <random>
#include <set>

#include "test_support.hpp"
#include "vmem/allocator.hpp"
#include "vmem/error.hpp"
#include "vmem/mapping.hpp"
#include "vmem/page_table.hpp"

namespace vmem {
namespace {

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

TEST(PageTable, InstallWalkRemove) {
  SimPageTable t;
  t.install(kBase, 3 * kGiB, PageLevel::kL3);
  t.install(kBase + kGiB, 8 * kMiB, PageLevel::kL2);
  t.install(kBase + kGiB + 2 * kMiB, 4 * kKiB, PageLevel::kL1);
  EXPECT_EQ(t.leaf_count(), 3u);
  EXPECT_EQ(t.leaf_count(PageLevel::kL3), 1u);

  auto w = t.walk(kBase + 12345);
  ASSERT_TRUE(w);
  EXPECT_EQ(w->pa, 3 * kGiB + 12345);
  EXPECT_EQ(w->level, PageLevel::kL3);
  EXPECT_EQ(w->leaf_va, kBase);
  w = t.walk(kBase + kGiB + kMiB);
  ASSERT_TRUE(w);
  EXPECT_EQ(w->pa, 9 * kMiB);
  EXPECT_EQ(w->level, PageLevel::kL2);
  w = t.walk(kBase + kGiB + 2 * kMiB + 5);
  ASSERT_TRUE(w);
  EXPECT_EQ(w->pa, 4 * kKiB + 5);
  EXPECT_FALSE(t.walk(kBase + kGiB + 2 * kMiB + 4 * kKiB));
  EXPECT_FALSE(t.walk(kBase - 1));

  std::uint64_t visited = t.for_each_leaf([](const WalkResult&) {});
  EXPECT_EQ(visited, 3u);

  t.remove(kBase + kGiB + 2 * kMiB, PageLevel::kL1);
  t.remove(kBase + kGiB, PageLevel::kL2);
  t.remove(kBase, PageLevel::kL3);
  EXPECT_EQ(t.leaf_count(), 0u);
  EXPECT_EQ(t.table_count(), 1u);  // intermediate tables released
}

TEST(PageTable, RejectsOverlapAndMisalignment) {
  SimPageTable t;
  t.install(kBase, 0, PageLevel::kL3);
  EXPECT_EQ(error_of([&] { t.install(kBase + 2 * kMiB, 0, PageLevel::kL2); }), Errc::kOverlap);
  EXPECT_EQ(error_of([&] { t.install(kBase, 0, PageLevel::kL3); }), Errc::kOverlap);
  t.install(kBase + kGiB + 2 * kMiB, 0, PageLevel::kL2);
  EXPECT_EQ(error_of([&] { t.install(kBase + kGiB, 0, PageLevel::kL3); }), Errc::kOverlap);
  EXPECT_EQ(error_of([&] { t.install(kBase + 4 * kKiB, 0, PageLevel::kL2); }), Errc::kAlign);
  EXPECT_EQ(error_of([&] { t.install(kBase + 2 * kGiB, 4 * kKiB, PageLevel::kL2); }), Errc::kAlign);
  EXPECT_EQ(error_of([&] { t.install(kVirtAddrLimit, 0, PageLevel::kL2); }), Errc::kInvalid);
  EXPECT_EQ(error_of([&] { t.remove(kBase, PageLevel::kL2); }), Errc::kNoEnt);
  EXPECT_EQ(t.leaf_count(), 2u);
}

struct Fixture {
  explicit Fixture(const ReservationPlan& plan) : topo(plan), alloc(topo), maps(topo, alloc) { maps.create_space(1); }
  MemoryTopology topo;
  Allocator alloc;
  MappingService maps;
};

ReservationPlan eight_gib() { return plan_reservation(8 * kGiB, 0, 1, 2 * kMiB, kGiB, 0); }

// 3.5 GiB = 3 one-GiB leaves + 256 two-MiB leaves.
TEST(Mapping, EagerLeafCounts) {
  for (bool fast : {true, false}) {
    Fixture f(eight_gib());
    const AllocGrant& g = f.alloc.alloc({3 * kGiB + 512 * kMiB, PageSize::kMix, NodePolicy::single(0)});
    const MapReport r = f.maps.map_grant(1, g, kBase, MapMode::kEager, fast);
    EXPECT_EQ(r.leaves_big, 3u);
    EXPECT_EQ(r.leaves_small, 256u);
    EXPECT_EQ(r.leaves_big * kGiB + r.leaves_small * 2 * kMiB, g.total_bytes);
    EXPECT_EQ(r.slow_lookups, fast ? 0u : 259u);
    EXPECT_EQ(r.fast_hits, fast ? 259u : 0u);
    EXPECT_EQ(f.maps.memtype().tracked_count(), fast ? 0u : 259u);
    EXPECT_EQ(f.maps.level_for(Grain::kBig), PageLevel::kL3);
    // Eager mappings never fault, whatever gets touched.
    for (Bytes off = 0; off < g.total_bytes; off += 64 * kMiB) EXPECT_FALSE(f.maps.fault(1, kBase + off).installed);
    EXPECT_EQ(f.maps.faults_for(g.grant_id), nullptr);
    f.maps.unmap_grant(1, g.grant_id);
    EXPECT_EQ(f.maps.memtype().tracked_count(), 0u);
    EXPECT_EQ(f.maps.leaf_count(), 0u);
  }
}

// a 16 MiB on-demand grant touched everywhere takes 8 faults.
TEST(Mapping, OnDemandFaultsOncePerLeaf) {
  Fixture f(eight_gib());
  const AllocGrant& g = f.alloc.alloc({16 * kMiB, PageSize::kSmall, NodePolicy::single(0), true});
  const MapReport r = f.maps.map_grant(1, g, kBase, MapMode::kOnDemand, true);
  EXPECT_EQ(r.leaves_big + r.leaves_small, 0u);
  for (Bytes off = 0; off < 16 * kMiB; off += 512 * kKiB) f.maps.fault(1, kBase + off);
  ASSERT_NE(f.maps.faults_for(g.grant_id), nullptr);
  EXPECT_EQ(f.maps.faults_for(g.grant_id)->count, 8u);
  EXPECT_EQ(f.maps.leaf_count(), 8u);
  const auto& events = f.maps.faults_for(g.grant_id)->events;
  for (std::size_t i = 0; i < events.size(); ++i) {
    EXPECT_EQ(events[i].va, kBase + i * 2 * kMiB);
    EXPECT_EQ(events[i].tick, i);
  }
}

TEST(Mapping, AccessOutsideMappingIsViolation) {
  Fixture f(eight_gib());
  const AllocGrant& g = f.alloc.alloc({4 * kMiB, PageSize::kSmall, NodePolicy::single(0)});
  f.maps.map_grant(1, g, kBase, MapMode::kOnDemand, true);
  EXPECT_EQ(error_of([&] { f.maps.fault(1, kBase + 4 * kMiB); }), Errc::kViolation);
  EXPECT_EQ(error_of([&] { f.maps.fault(1, kBase - 1); }), Errc::kViolation);
  EXPECT_EQ(error_of([&] { f.maps.fault(7, kBase); }), Errc::kNoEnt);
}

TEST(Mapping, RejectsBadMaps) {
  Fixture f(eight_gib());
  const AllocGrant& a = f.alloc.alloc({kGiB + 4 * kMiB, PageSize::kMix, NodePolicy::single(0)});
  const AllocGrant& b = f.alloc.alloc({4 * kMiB, PageSize::kSmall, NodePolicy::single(0)});
  EXPECT_EQ(error_of([&] { f.maps.map_grant(1, a, kBase + 2 * kMiB, MapMode::kEager, true); }), Errc::kAlign);
  f.maps.map_grant(1, a, kBase, MapMode::kEager, true);
  EXPECT_EQ(error_of([&] { f.maps.map_grant(1, a, kBase + 4 * kGiB, MapMode::kEager, true); }), Errc::kExists);
  EXPECT_EQ(error_of([&] { f.maps.map_grant(1, b, kBase + kGiB, MapMode::kEager, true); }), Errc::kOverlap);
  EXPECT_EQ(error_of([&] { f.maps.map_grant(2, b, kBase, MapMode::kEager, true); }), Errc::kNoEnt);
  EXPECT_EQ(error_of([&] { f.maps.destroy_space(1); }), Errc::kBusy);
  const std::uint64_t leaves = f.maps.leaf_count();
  f.maps.map_grant(1, b, kBase + kGiB + 4 * kMiB, MapMode::kEager, true);
  EXPECT_EQ(f.maps.leaf_count(), leaves + 2);
}

TEST(Mapping, RemapAfterUnmap) {
  Fixture f(eight_gib());
  const AllocGrant& g = f.alloc.alloc({kGiB + 2 * kMiB, PageSize::kMix, NodePolicy::single(0)});
  const MapReport first = f.maps.map_grant(1, g, kBase, MapMode::kEager, true);
  f.maps.unmap_grant(1, g.grant_id);
  EXPECT_FALSE(f.maps.walk(1, kBase));
  EXPECT_EQ(f.maps.space(1).table.table_count(), 1u);
  EXPECT_EQ(f.maps.map_grant(1, g, kBase, MapMode::kEager, true), first);
  EXPECT_EQ(error_of([&] { f.maps.unmap_grant(1, 999); }), Errc::kNoEnt);
}

TEST(Mapping, BalancedLayoutStartsEachNodeOnABlock) {
  Fixture f(plan_reservation(8 * kGiB, 0, 2, 2 * kMiB, kGiB, 0));
  const AllocGrant& g = f.alloc.alloc({3 * kGiB, PageSize::kMix, NodePolicy::balanced()});
  const auto groups = layout_grant(g, f.topo, kBase);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].va_base, kBase);
  EXPECT_EQ(groups[0].bytes(), 1536 * kMiB);
  EXPECT_EQ(groups[1].va_base, kBase + 2 * kGiB);  // 1.5 GiB rounded up to a block
  EXPECT_EQ(layout_span(groups), 3 * kGiB + 512 * kMiB);
}

// Every leaf installed for a grant points where the grant's extents say,
// computed here from the extents directly.
TEST(Mapping, WalkAgreesWithExtents) {
  std::mt19937_64 rng(21);
  for (int round = 0; round < 30; ++round) {
    Fixture f(plan_reservation(16 * kGiB, 0, 2, 2 * kMiB, kGiB, 32 * kMiB));
    std::vector<std::uint64_t> ids;
    for (int i = 0; i < 6; ++i) {
      try {
        const auto psize = static_cast<PageSize>(rng() % 3);
        const Bytes size = psize == PageSize::kBig ? (1 + rng() % 2) * kGiB : (1 + rng() % 700) * 2 * kMiB;
        const NodePolicy pol = rng() % 2 ? NodePolicy::balanced() : NodePolicy::single(rng() % 2);
        ids.push_back(f.alloc.alloc({size, psize, pol}).grant_id);
      } catch (const VmemError&) {
      }
      if (!ids.empty() && rng() % 4 == 0) {
        f.alloc.free(ids.back());
        ids.pop_back();
      }
    }
    VirtAddr va = kBase;
    for (std::uint64_t id : ids) {
      const AllocGrant& g = f.alloc.grant(id);
      f.maps.map_grant(1, g, va, MapMode::kEager, true);
      VirtAddr cursor = va;
      NodeId node = g.extents.front().node;
      bool first = true;
      for (const Extent& e : g.extents) {
        const bool node_has_big = std::any_of(g.extents.begin(), g.extents.end(), [&](const Extent& x) {
          return x.node == e.node && x.grain == Grain::kBig;
        });
        if ((first || e.node != node) && node_has_big) cursor = align_up(cursor, kGiB);
        first = false;
        node = e.node;
        const PhysAddr pa = f.topo.nodes()[e.node].phys_base + e.start_slice * 2 * kMiB;
        for (std::uint64_t s = 0; s < e.n_slices; ++s) {
          const VirtAddr probe = cursor + s * 2 * kMiB + (rng() % (2 * kMiB));
          const auto w = f.maps.walk(1, probe);
          ASSERT_TRUE(w);
          ASSERT_EQ(w->pa, pa + (probe - cursor));
          ASSERT_EQ(w->level, e.grain == Grain::kBig ? PageLevel::kL3 : PageLevel::kL2);
        }
        cursor += e.n_slices * 2 * kMiB;
      }
      va = align_up(cursor, kGiB) + kGiB;
    }
  }
}

TEST(Memtype, UntrackedCoversReservedMemory) {
  Fixture f(plan_reservation(8 * kGiB, 0, 2, 2 * kMiB, kGiB));
  const auto& ranges = f.maps.memtype().untracked();
  ASSERT_EQ(ranges.size(), 2u);
  for (NodeId n = 0; n < 2; ++n) {
    EXPECT_EQ(ranges[n].first, f.topo.nodes()[n].phys_base);
    EXPECT_EQ(ranges[n].second - ranges[n].first, f.topo.nodes()[n].reserved_bytes);
  }
  EXPECT_TRUE(f.maps.memtype().is_untracked(0, 2 * kMiB));
  EXPECT_FALSE(f.maps.memtype().is_untracked(4 * kGiB - 2 * kMiB, 4 * kMiB));
}

TEST(Memtype, SlowPathTracksNonOverlappingRanges) {
  MemtypeRegistry reg;
  EXPECT_FALSE(reg.reserve(0, 2 * kMiB, true));  // nothing untracked yet
  EXPECT_FALSE(reg.reserve(0, 2 * kMiB, false));
  EXPECT_EQ(reg.tracked_count(), 1u);
  EXPECT_THROW(reg.reserve(kMiB, 2 * kMiB, false), VmemError);
  reg.release(0, 2 * kMiB);
  EXPECT_EQ(reg.tracked_count(), 1u);
  reg.release(0, 2 * kMiB);
  EXPECT_EQ(reg.tracked_count(), 0u);
  EXPECT_EQ(reg.counters().slow_lookups, 3u);
}

}  // namespace
}  // namespace vmem
