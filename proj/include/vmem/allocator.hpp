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

#ifndef VMEM_ALLOCATOR_HPP
#define VMEM_ALLOCATOR_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string_view>
#include <vector>

#include "vmem/topology.hpp"
#include "vmem/units.hpp"

namespace vmem {

enum class PageSize : std::uint8_t { kBig, kSmall, kMix };
enum class Grain : std::uint8_t { kBig, kSmall };

std::string_view page_size_name(PageSize p);
PageSize parse_page_size(std::string_view text);
std::string_view grain_name(Grain g);

struct NodePolicy {
  enum class Kind : std::uint8_t { kSingle, kBalanced };
  Kind kind = Kind::kSingle;
  NodeId node = 0;

  static NodePolicy single(NodeId id) { return {Kind::kSingle, id}; }
  static NodePolicy balanced() { return {Kind::kBalanced, 0}; }
  bool is_balanced() const { return kind == Kind::kBalanced; }

  friend bool operator==(const NodePolicy&, const NodePolicy&) = default;
};

struct AllocRequest {
  Bytes size = 0;
  PageSize psize = PageSize::kMix;
  NodePolicy policy;
  bool on_demand = false;
};

struct SplitResult {
  Bytes size_1g = 0;
  Bytes size_2m = 0;

  friend bool operator==(const SplitResult&, const SplitResult&) = default;
};

struct Extent {
  NodeId node = 0;
  SliceIndex start_slice = 0;
  std::uint64_t n_slices = 0;
  Grain grain = Grain::kSmall;

  friend bool operator==(const Extent&, const Extent&) = default;
};

/// Count of spare 64-bit fields carried by shared metadata structures so a
/// newer core can extend them without changing their layout.
inline constexpr std::size_t kReservedFieldCount = 4;
inline constexpr std::uint32_t kMetadataLayoutVersion = 1;

/// Extents are ordered by node, then big-grain runs ascending, then
/// small-grain runs ascending. That order is also the virtual layout.
struct AllocGrant {
  std::uint64_t grant_id = 0;
  std::vector<Extent> extents;
  Bytes total_bytes = 0;
  SplitResult split;
  bool on_demand = false;
  std::uint32_t layout_version = kMetadataLayoutVersion;
  std::array<std::uint64_t, kReservedFieldCount> reserved{};

  std::vector<NodeId> nodes() const;

  friend bool operator==(const AllocGrant&, const AllocGrant&) = default;
};

struct FragReport {
  std::uint64_t free_big_blocks = 0;
  std::uint64_t fragmented_big_blocks = 0;
  std::uint64_t largest_free_run_slices = 0;

  friend bool operator==(const FragReport&, const FragReport&) = default;
};

/// Bidirectional mixed-granularity allocator over a topology's slice arrays.
///
/// Big-grain blocks are taken forward from the lowest address; small-grain
/// slices are taken backward, preferring already fragmented blocks so whole
/// big blocks survive as long as possible. All-or-nothing: a failed request
/// leaves every slice untouched.
///
/// Not internally synchronized; callers hold the manager-wide lock.
class Allocator {
 public:
  explicit Allocator(MemoryTopology& topology) : topology_(&topology) {}

  const AllocGrant& alloc(const AllocRequest& request);
  void free(std::uint64_t grant_id);

  const AllocGrant& grant(std::uint64_t grant_id) const;
  AllocGrant& mutable_grant(std::uint64_t grant_id);
  bool contains(std::uint64_t grant_id) const { return grants_.contains(grant_id); }
  const std::map<std::uint64_t, AllocGrant>& grants() const { return grants_; }

  FragReport frag_report(NodeId node) const;

  /// Bytes each node contributes to a request under `policy`. Balanced
  /// requests split evenly; leftover units go to the least-used nodes.
  std::vector<std::pair<NodeId, Bytes>> node_shares(const AllocRequest& request) const;

  MemoryTopology& topology() { return *topology_; }
  const MemoryTopology& topology() const { return *topology_; }

  friend bool operator==(const Allocator& a, const Allocator& b) {
    return a.grants_ == b.grants_ && a.next_grant_id_ == b.next_grant_id_;
  }

 private:
  MemoryTopology* topology_;
  std::map<std::uint64_t, AllocGrant> grants_;
  std::uint64_t next_grant_id_ = 1;
};

}  // namespace vmem

#endif  // VMEM_ALLOCATOR_HPP
