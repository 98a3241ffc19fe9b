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

#include "vmem/page_table.hpp"

#include <string>

#include "vmem/error.hpp"

namespace vmem {

namespace {

constexpr unsigned kIndexBits = 9;
constexpr std::size_t kEntries = std::size_t{1} << kIndexBits;

constexpr unsigned level_shift(int level) { return 12 + kIndexBits * static_cast<unsigned>(level - 1); }

constexpr std::size_t index_at(VirtAddr va, int level) {
  return static_cast<std::size_t>((va >> level_shift(level)) & (kEntries - 1));
}

}  // namespace

Bytes page_level_bytes(PageLevel level) {
  return Bytes{1} << level_shift(static_cast<int>(level));
}

struct SimPageTable::Table {
  struct Entry {
    enum class Kind : std::uint8_t { kEmpty, kTable, kLeaf };
    Kind kind = Kind::kEmpty;
    PhysAddr pa = 0;
    std::unique_ptr<Table> next;
  };
  std::array<Entry, kEntries> entries;
  std::uint32_t used = 0;
};

SimPageTable::SimPageTable() : root_(std::make_unique<Table>()) {}
SimPageTable::~SimPageTable() = default;
SimPageTable::SimPageTable(SimPageTable&&) noexcept = default;
SimPageTable& SimPageTable::operator=(SimPageTable&&) noexcept = default;

void SimPageTable::install(VirtAddr va, PhysAddr pa, PageLevel level) {
  const Bytes size = page_level_bytes(level);
  if (!is_aligned(va, size) || !is_aligned(pa, size)) {
    throw VmemError(Errc::kAlign, "leaf " + to_hex(va) + " -> " + to_hex(pa) + " misaligned for its size");
  }
  if (va >= kVirtAddrLimit) throw VmemError(Errc::kInvalid, "virtual address " + to_hex(va) + " out of range");

  const int leaf_level = static_cast<int>(level);
  Table* table = root_.get();
  for (int lvl = 4; lvl > leaf_level; --lvl) {
    auto& e = table->entries[index_at(va, lvl)];
    if (e.kind == Table::Entry::Kind::kLeaf) {
      throw VmemError(Errc::kOverlap, to_hex(va) + " is already covered by a larger leaf");
    }
    if (e.kind == Table::Entry::Kind::kEmpty) {
      e.kind = Table::Entry::Kind::kTable;
      e.next = std::make_unique<Table>();
      ++table->used;
      ++tables_;
    }
    table = e.next.get();
  }
  auto& leaf = table->entries[index_at(va, leaf_level)];
  if (leaf.kind != Table::Entry::Kind::kEmpty) {
    // A taken slot means the whole path already existed; nothing to undo.
    throw VmemError(Errc::kOverlap, to_hex(va) + " is already translated");
  }
  leaf.kind = Table::Entry::Kind::kLeaf;
  leaf.pa = pa;
  ++table->used;
  ++leaves_[leaf_level];
}

void SimPageTable::remove(VirtAddr va, PageLevel level) {
  const int leaf_level = static_cast<int>(level);
  std::array<Table*, 5> path{};
  Table* table = root_.get();
  for (int lvl = 4; lvl > leaf_level; --lvl) {
    path[lvl] = table;
    auto& e = table->entries[index_at(va, lvl)];
    if (e.kind != Table::Entry::Kind::kTable) {
      throw VmemError(Errc::kNoEnt, "no " + std::to_string(leaf_level) + "-level leaf at " + to_hex(va));
    }
    table = e.next.get();
  }
  auto& leaf = table->entries[index_at(va, leaf_level)];
  if (leaf.kind != Table::Entry::Kind::kLeaf) {
    throw VmemError(Errc::kNoEnt, "no " + std::to_string(leaf_level) + "-level leaf at " + to_hex(va));
  }
  leaf = {};
  --table->used;
  --leaves_[leaf_level];

  // Release tables that became empty, bottom-up.
  for (int lvl = leaf_level + 1; lvl <= 4; ++lvl) {
    auto& parent_entry = path[lvl]->entries[index_at(va, lvl)];
    if (parent_entry.next->used != 0) break;
    parent_entry = {};
    --path[lvl]->used;
    --tables_;
  }
}

std::optional<WalkResult> SimPageTable::walk(VirtAddr va) const {
  if (va >= kVirtAddrLimit) return std::nullopt;
  const Table* table = root_.get();
  for (int lvl = 4; lvl >= 1; --lvl) {
    const auto& e = table->entries[index_at(va, lvl)];
    switch (e.kind) {
      case Table::Entry::Kind::kEmpty:
        return std::nullopt;
      case Table::Entry::Kind::kLeaf: {
        const Bytes size = Bytes{1} << level_shift(lvl);
        WalkResult r;
        r.level = static_cast<PageLevel>(lvl);
        r.leaf_va = align_down(va, size);
        r.leaf_pa = e.pa;
        r.pa = e.pa + (va - r.leaf_va);
        return r;
      }
      case Table::Entry::Kind::kTable:
        table = e.next.get();
        break;
    }
  }
  return std::nullopt;
}

std::uint64_t SimPageTable::for_each_leaf(const std::function<void(const WalkResult&)>& visit) const {
  std::uint64_t visited = 0;
  std::function<void(const Table&, int, VirtAddr)> recurse = [&](const Table& t, int lvl, VirtAddr prefix) {
    for (std::size_t i = 0; i < kEntries; ++i) {
      const auto& e = t.entries[i];
      const VirtAddr va = prefix | (static_cast<VirtAddr>(i) << level_shift(lvl));
      if (e.kind == Table::Entry::Kind::kLeaf) {
        WalkResult r;
        r.level = static_cast<PageLevel>(lvl);
        r.leaf_va = va;
        r.leaf_pa = e.pa;
        r.pa = e.pa;
        visit(r);
        ++visited;
      } else if (e.kind == Table::Entry::Kind::kTable) {
        recurse(*e.next, lvl - 1, va);
      }
    }
  };
  recurse(*root_, 4, 0);
  return visited;
}

}  // namespace vmem
