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

#include "vmem/placement.hpp"

#include <algorithm>

namespace vmem {

namespace {

std::vector<SliceRun> merge_runs(std::vector<SliceIndex> picked) {
  std::sort(picked.begin(), picked.end());
  std::vector<SliceRun> runs;
  for (SliceIndex s : picked) {
    if (!runs.empty() && runs.back().end() == s) {
      ++runs.back().count;
    } else {
      runs.push_back({s, 1});
    }
  }
  return runs;
}

}  // namespace

BlockView::BlockView(const SliceArray& slices, std::uint64_t slices_per_block)
    : slices_(slices),
      slices_per_block_(slices_per_block),
      free_((slices.size() + slices_per_block - 1) / slices_per_block, 0) {
  const auto states = slices.states();
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == SliceState::kFree) ++free_[i / slices_per_block_];
  }
}

SliceRun BlockView::block_range(std::uint64_t block) const {
  const SliceIndex start = block * slices_per_block_;
  const SliceIndex end = std::min<SliceIndex>(start + slices_per_block_, slices_.size());
  return {start, end - start};
}

bool BlockView::big_capable(std::uint64_t block) const {
  return block_range(block).count == slices_per_block_ && free_[block] == slices_per_block_;
}

bool BlockView::fragmented(std::uint64_t block) const {
  return free_[block] > 0 && !big_capable(block);
}

std::vector<SliceRun> pick_big_blocks(const SliceArray& slices, std::uint64_t slices_per_block,
                                      std::uint64_t max_blocks) {
  const BlockView view(slices, slices_per_block);
  std::vector<SliceRun> runs;
  std::uint64_t taken = 0;
  for (std::uint64_t b = 0; b < view.block_count() && taken < max_blocks; ++b) {
    if (!view.big_capable(b)) continue;
    const SliceRun r = view.block_range(b);
    if (!runs.empty() && runs.back().end() == r.start) {
      runs.back().count += r.count;
    } else {
      runs.push_back(r);
    }
    ++taken;
  }
  return runs;
}

std::uint64_t count_big_capable(const SliceArray& slices, std::uint64_t slices_per_block) {
  const BlockView view(slices, slices_per_block);
  std::uint64_t n = 0;
  for (std::uint64_t b = 0; b < view.block_count(); ++b) n += view.big_capable(b) ? 1 : 0;
  return n;
}

std::optional<std::vector<SliceRun>> pick_small_slices(const SliceArray& slices,
                                                       std::uint64_t slices_per_block,
                                                       std::uint64_t count) {
  if (slices.count(SliceState::kFree) < count) return std::nullopt;

  // A chosen block is either exhausted or satisfies the rest of the request,
  // so every block is visited at most once and the view's counts stay valid
  // for the blocks not yet visited.
  const BlockView view(slices, slices_per_block);
  std::vector<bool> visited(view.block_count(), false);
  std::vector<SliceIndex> picked;
  picked.reserve(count);

  std::uint64_t need = count;
  while (need > 0) {
    std::optional<std::uint64_t> chosen;
    for (std::uint64_t b = view.block_count(); b-- > 0;) {
      if (visited[b] || !view.fragmented(b)) continue;
      if (!chosen || view.free_in_block(b) < view.free_in_block(*chosen)) chosen = b;
    }
    if (!chosen) {
      for (std::uint64_t b = view.block_count(); b-- > 0;) {
        if (!visited[b] && view.big_capable(b)) {
          chosen = b;
          break;
        }
      }
    }
    // The free-count precheck guarantees a candidate exists.
    const std::uint64_t b = *chosen;
    visited[b] = true;
    const SliceRun range = view.block_range(b);
    for (SliceIndex s = range.end(); s-- > range.start && need > 0;) {
      if (slices[s] != SliceState::kFree) continue;
      picked.push_back(s);
      --need;
    }
  }
  return merge_runs(std::move(picked));
}

}  // namespace vmem
