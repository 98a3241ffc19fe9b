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

#include "vmem/memtype.hpp"

#include <algorithm>

#include "vmem/error.hpp"

namespace vmem {

void MemtypeRegistry::add_untracked(PhysAddr start, Bytes length) {
  untracked_.emplace_back(start, start + length);
  std::sort(untracked_.begin(), untracked_.end());
}

bool MemtypeRegistry::is_untracked(PhysAddr start, Bytes length) const {
  auto it = std::upper_bound(untracked_.begin(), untracked_.end(), std::make_pair(start, ~PhysAddr{0}));
  if (it == untracked_.begin()) return false;
  --it;
  return start >= it->first && start + length <= it->second;
}

bool MemtypeRegistry::reserve(PhysAddr start, Bytes length, bool fast_path) {
  if (fast_path && is_untracked(start, length)) {
    ++counters_.fast_hits;
    return true;
  }
  ++counters_.slow_lookups;
  const PhysAddr end = start + length;
  auto next = tracked_.lower_bound(start);
  if (next != tracked_.end() && next->first == start && next->second.end == end) {
    ++next->second.refs;
    return false;
  }
  const bool overlaps_next = next != tracked_.end() && next->first < end;
  const bool overlaps_prev = next != tracked_.begin() && std::prev(next)->second.end > start;
  if (overlaps_next || overlaps_prev) {
    throw VmemError(Errc::kOverlap, "memtype range " + to_hex(start) + "+" + to_hex(length) +
                                        " conflicts with a tracked range");
  }
  tracked_.emplace_hint(next, start, Tracked{end, CacheType::kWriteBack, 1});
  return false;
}

void MemtypeRegistry::release(PhysAddr start, Bytes length) {
  auto it = tracked_.find(start);
  if (it == tracked_.end() || it->second.end != start + length) return;
  if (--it->second.refs == 0) tracked_.erase(it);
}

}  // namespace vmem
