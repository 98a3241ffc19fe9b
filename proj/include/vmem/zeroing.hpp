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

#ifndef VMEM_ZEROING_HPP
#define VMEM_ZEROING_HPP

#include <chrono>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "vmem/allocator.hpp"
#include "vmem/topology.hpp"

namespace vmem {

enum class ZeroMethod : std::uint8_t {
  kStandard,     // memset
  kCacheBypass,  // non-temporal stores, falls back to memset off x86
};

std::string_view zero_method_name(ZeroMethod m);

/// Real memory behind the simulated physical space, one anonymous
/// MAP_NORESERVE mapping per node created on first use. Only pages that are
/// actually written get committed by the host kernel.
class BackingStore {
 public:
  BackingStore(const MemoryTopology& topology, bool enabled);
  ~BackingStore();
  BackingStore(const BackingStore&) = delete;
  BackingStore& operator=(const BackingStore&) = delete;

  bool enabled() const { return enabled_; }

  /// Bytes backing `extent`. Throws kDisabled when bench backing is off.
  std::span<std::byte> region(const Extent& extent);

  /// Returns the pages of `extent` to the host (MADV_DONTNEED).
  void discard(const Extent& extent);

 private:
  struct NodeMapping {
    std::byte* base = nullptr;
    std::size_t length = 0;
  };
  const MemoryTopology* topology_;
  bool enabled_;
  std::vector<NodeMapping> nodes_;
};

/// Fills `bytes` with zeros; returns wall time spent.
std::chrono::nanoseconds zero_bytes(std::span<std::byte> bytes, ZeroMethod method);

/// Zeroes the backing of one extent. Empty extents cost nothing.
std::chrono::nanoseconds zero_extent(BackingStore& backing, const Extent& extent, ZeroMethod method);

bool all_zero(std::span<const std::byte> bytes);

}  // namespace vmem

#endif  // VMEM_ZEROING_HPP
