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

#include <random>
#include <vector>

#include "test_support.hpp"
#include "vmem/core.hpp"
#include "vmem/metadata.hpp"

namespace vmem {
namespace {

// Fixed module and auxiliary footprints.
TEST(Metadata, FixedParts) {
  const MetadataReport r = compute_metadata(2, 0, {}, 0);
  EXPECT_EQ(r.module_data_bytes, 16'384u + 225'280u);  // "236 KB"
  EXPECT_EQ(r.module_data_bytes, 236 * kKiB);
  EXPECT_EQ(r.other_bytes, 224u + 16u + 1'520u);       // "1760 B"
  EXPECT_EQ(r.other_bytes, 1'760u);
  EXPECT_EQ(r.mce_bytes, 8u);
}

// Fully sliced 2-node 384 GiB host: 196,608 slices.
TEST(Metadata, SliceStateBytesForTwoNode384GiBHost) {
  const MetadataReport r = compute_metadata(2, 384 * kGiB / (2 * kMiB), {}, 0);
  EXPECT_EQ(r.ms_bytes, 196'832u);
  // 192 KiB when truncated.
  EXPECT_EQ(r.ms_bytes / kKiB, 192u);
}

// Worst case: every slice its own fastmap entry.
TEST(Metadata, WorstCaseFastmapEntries) {
  const std::vector<std::uint64_t> one_record = {196'608};
  const MetadataReport r = compute_metadata(2, 196'608, one_record, 0);
  EXPECT_EQ(r.fastmap_bytes - 120 * 2, 4'718'592u);
  EXPECT_EQ((r.fastmap_bytes - 120 * 2) / kKiB, 4'608u);  // "4608 KB"
}

TEST(Metadata, MceFormula) {
  for (std::uint64_t m : {0, 1, 2, 17, 1000}) {
    EXPECT_EQ(compute_metadata(1, 8, {}, m).mce_bytes, 8 + 24 * 8 * m);
  }
}

TEST(Metadata, TotalIsSumOfParts) {
  const std::vector<std::uint64_t> counts = {3, 1, 7};
  const MetadataReport r = compute_metadata(4, 1000, counts, 5);
  EXPECT_EQ(r.fastmap_bytes, 3 * 120 * 4 + 24 * 11u);
  EXPECT_EQ(r.total_bytes, r.module_data_bytes + r.ms_bytes + r.fastmap_bytes + r.mce_bytes + r.other_bytes);
  const std::string text = r.to_text();
  EXPECT_NE(text.find("ms_bytes 1448\n"), std::string::npos);
  EXPECT_NE(text.find("mce_bytes 968\n"), std::string::npos);
}

// Live state on random topologies against arithmetic done here.
TEST(Metadata, LiveStateMatchesIndependentArithmetic) {
  std::mt19937_64 rng(8);
  for (int round = 0; round < 40; ++round) {
    const auto nodes = static_cast<std::uint32_t>(1 + rng() % 4);
    const Bytes total = (4 + rng() % 60) * kGiB;
    VmemState s(plan_reservation(total, kGiB, nodes));
    std::uint64_t mces = 0;
    std::uint64_t entries_bytes = 0;
    for (int i = 0; i < 8; ++i) {
      try {
        const AllocGrant& g = s.allocator.alloc({(1 + rng() % 600) * 2 * kMiB, PageSize::kMix,
                                                 rng() % 2 ? NodePolicy::balanced() : NodePolicy::single(0)});
        const SpaceId space = s.next_space_id++;
        s.mapping.create_space(space);
        s.mapping.map_grant(space, g, VirtAddr{1} << 42, MapMode::kOnDemand, true);
        for (const FastMapRecord& r :
             s.fastmap.register_mapping(static_cast<Pid>(space), space, VirtAddr{1} << 42, g, s.topology, 0)) {
          entries_bytes += 120 * nodes + 24 * r.entries.size();
        }
      } catch (const VmemError&) {
      }
      if (rng() % 2) {
        try {
          s.topology.inject_mce(rng() % nodes, rng() % 100);
          ++mces;
        } catch (const VmemError&) {
        }
      }
    }
    const std::uint64_t slices = nodes * (align_down((total - kGiB) / nodes, 2 * kMiB) / (2 * kMiB));
    const MetadataReport r = s.metadata();
    EXPECT_EQ(r.ms_bytes, 112 * nodes + slices);
    EXPECT_EQ(r.fastmap_bytes, entries_bytes);
    EXPECT_EQ(s.fastmap.metadata_bytes(nodes), entries_bytes);
    EXPECT_EQ(r.mce_bytes, 8 + 192 * mces);
    EXPECT_EQ(r.total_bytes, 241'664 + 112 * nodes + slices + entries_bytes + 8 + 192 * mces + 1'760);
  }
}

}  // namespace
}  // namespace vmem
