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

#ifndef VMEM_PAGE_TABLE_HPP
#define VMEM_PAGE_TABLE_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

#include "vmem/units.hpp"

namespace vmem {

// Leaf level of a translation. The numeric value is the table depth the
// leaf lives in (L4 is the root and never holds leaves).
enum class PageLevel : std::uint8_t {
  kL1 = 1,  // 4 KiB
  kL2 = 2,  // 2 MiB, PMD analog
  kL3 = 3,  // 1 GiB, PUD analog
};

Bytes page_level_bytes(PageLevel level);

inline constexpr VirtAddr kVirtAddrLimit = VirtAddr{1} << 48;

struct WalkResult {
  PhysAddr pa = 0;
  PageLevel level = PageLevel::kL2;
  VirtAddr leaf_va = 0;
  PhysAddr leaf_pa = 0;
  bool present = true;
};

/// Four-level radix page table with 512-entry tables and huge leaves at L3
/// and L2. Intermediate tables are allocated on demand and released once
/// they become empty.
class SimPageTable {
 public:
  SimPageTable();
  ~SimPageTable();
  SimPageTable(SimPageTable&&) noexcept;
  SimPageTable& operator=(SimPageTable&&) noexcept;

  /// Installs a leaf mapping [va, va + size(level)) -> [pa, ...). Both
  /// addresses must be aligned to the leaf size. Throws kOverlap if any part
  /// of the range is already translated.
  void install(VirtAddr va, PhysAddr pa, PageLevel level);

  /// Removes the leaf installed at exactly `va` with `level`; kNoEnt if absent.
  void remove(VirtAddr va, PageLevel level);

  std::optional<WalkResult> walk(VirtAddr va) const;

  /// Leaf count per level, index by static_cast<int>(PageLevel).
  std::uint64_t leaf_count(PageLevel level) const { return leaves_[static_cast<int>(level)]; }
  std::uint64_t leaf_count() const { return leaves_[1] + leaves_[2] + leaves_[3]; }
  std::uint64_t table_count() const { return tables_; }

  /// Visits every leaf in ascending VA order; returns the number visited.
  std::uint64_t for_each_leaf(const std::function<void(const WalkResult&)>& visit) const;

 private:
  struct Table;
  std::unique_ptr<Table> root_;
  std::array<std::uint64_t, 4> leaves_{};
  std::uint64_t tables_ = 1;
};

}  // namespace vmem

#endif  // VMEM_PAGE_TABLE_HPP
