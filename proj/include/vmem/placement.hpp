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

#ifndef VMEM_PLACEMENT_HPP
#define VMEM_PLACEMENT_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "vmem/slice_state.hpp"

namespace vmem {

struct SliceRun {
  SliceIndex start = 0;
  std::uint64_t count = 0;

  SliceIndex end() const { return start + count; }
  friend bool operator==(const SliceRun&, const SliceRun&) = default;
};

/// Block-level view of one node's slice array. A block is the big-grain
/// aligned group of `slices_per_block` slices starting at a multiple of it.
///
/// - big-capable: the block lies entirely inside the array and every slice
///   is Free.
/// - fragmented: the block has at least one Free slice but is not
///   big-capable (partially used, quarantined, or cut short by holes).
class BlockView {
 public:
  BlockView(const SliceArray& slices, std::uint64_t slices_per_block);

  std::uint64_t block_count() const { return free_.size(); }
  std::uint64_t slices_per_block() const { return slices_per_block_; }
  std::uint64_t free_in_block(std::uint64_t block) const { return free_[block]; }
  bool big_capable(std::uint64_t block) const;
  bool fragmented(std::uint64_t block) const;
  SliceRun block_range(std::uint64_t block) const;

 private:
  const SliceArray& slices_;
  std::uint64_t slices_per_block_;
  std::vector<std::uint64_t> free_;
};

/// Lowest-address big-capable blocks, at most `max_blocks`, merged into
/// contiguous runs in ascending order.
std::vector<SliceRun> pick_big_blocks(const SliceArray& slices, std::uint64_t slices_per_block,
                                      std::uint64_t max_blocks);

std::uint64_t count_big_capable(const SliceArray& slices, std::uint64_t slices_per_block);

/// Small-grain placement: repeatedly choose the fragmented block with the
/// fewest Free slices (ties to the higher block), or when none remain the
/// highest big-capable block, and take its Free slices from the top down.
/// Returns maximal ascending runs, or nullopt when fewer than `count` Free
/// slices exist. Does not mutate `slices`.
std::optional<std::vector<SliceRun>> pick_small_slices(const SliceArray& slices,
                                                       std::uint64_t slices_per_block,
                                                       std::uint64_t count);

}  // namespace vmem

#endif  // VMEM_PLACEMENT_HPP
