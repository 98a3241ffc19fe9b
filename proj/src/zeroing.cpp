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

#include "vmem/zeroing.hpp"

#include <sys/mman.h>

#include <cstdint>
#include <cstring>
#include <string>

#if defined(__SSE2__)
#include <emmintrin.h>
#endif

#include "vmem/error.hpp"

namespace vmem {

std::string_view zero_method_name(ZeroMethod m) {
  return m == ZeroMethod::kStandard ? "standard" : "cache_bypass";
}

BackingStore::BackingStore(const MemoryTopology& topology, bool enabled)
    : topology_(&topology), enabled_(enabled), nodes_(topology.node_count()) {}

BackingStore::~BackingStore() {
  for (const NodeMapping& n : nodes_) {
    if (n.base != nullptr) ::munmap(n.base, n.length);
  }
}

std::span<std::byte> BackingStore::region(const Extent& extent) {
  if (!enabled_) throw VmemError(Errc::kDisabled, "bench backing is not enabled");
  const NodeDesc& node = topology_->node(extent.node);
  if (extent.start_slice + extent.n_slices > node.slices.size()) {
    throw VmemError(Errc::kInvalid, "extent exceeds node " + std::to_string(extent.node));
  }
  NodeMapping& m = nodes_[extent.node];
  if (m.base == nullptr) {
    void* p = ::mmap(nullptr, node.reserved_bytes, PROT_READ | PROT_WRITE,
                     MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
    if (p == MAP_FAILED) {
      throw VmemError(Errc::kNoSpace, "cannot map " + format_size(node.reserved_bytes) + " of backing for node " +
                                          std::to_string(extent.node));
    }
    m.base = static_cast<std::byte*>(p);
    m.length = node.reserved_bytes;
  }
  const Bytes slice = topology_->slice_bytes();
  return {m.base + extent.start_slice * slice, extent.n_slices * slice};
}

void BackingStore::discard(const Extent& extent) {
  if (!enabled_ || nodes_[extent.node].base == nullptr || extent.n_slices == 0) return;
  auto bytes = region(extent);
  ::madvise(bytes.data(), bytes.size(), MADV_DONTNEED);
}

std::chrono::nanoseconds zero_bytes(std::span<std::byte> bytes, ZeroMethod method) {
  const auto start = std::chrono::steady_clock::now();
  if (bytes.empty()) return std::chrono::nanoseconds{0};
#if defined(__SSE2__)
  if (method == ZeroMethod::kCacheBypass) {
    std::byte* p = bytes.data();
    std::size_t n = bytes.size();
    const std::size_t head = (16 - reinterpret_cast<std::uintptr_t>(p) % 16) % 16;
    if (head > 0) {
      const std::size_t h = head < n ? head : n;
      std::memset(p, 0, h);
      p += h;
      n -= h;
    }
    const __m128i zero = _mm_setzero_si128();
    auto* vec = reinterpret_cast<__m128i*>(p);
    const std::size_t chunks = n / 64;
    for (std::size_t i = 0; i < chunks; ++i) {
      _mm_stream_si128(vec + 4 * i + 0, zero);
      _mm_stream_si128(vec + 4 * i + 1, zero);
      _mm_stream_si128(vec + 4 * i + 2, zero);
      _mm_stream_si128(vec + 4 * i + 3, zero);
    }
    _mm_sfence();
    std::memset(p + chunks * 64, 0, n - chunks * 64);
  } else {
    std::memset(bytes.data(), 0, bytes.size());
  }
#else
  (void)method;
  std::memset(bytes.data(), 0, bytes.size());
#endif
  return std::chrono::steady_clock::now() - start;
}

std::chrono::nanoseconds zero_extent(BackingStore& backing, const Extent& extent, ZeroMethod method) {
  if (extent.n_slices == 0) {
    if (!backing.enabled()) throw VmemError(Errc::kDisabled, "bench backing is not enabled");
    return std::chrono::nanoseconds{0};
  }
  return zero_bytes(backing.region(extent), method);
}

bool all_zero(std::span<const std::byte> bytes) {
  // Word-at-a-time scan; the tail is checked bytewise.
  const std::byte* p = bytes.data();
  std::size_t n = bytes.size();
  while (n > 0 && reinterpret_cast<std::uintptr_t>(p) % sizeof(std::uint64_t) != 0) {
    if (*p != std::byte{0}) return false;
    ++p;
    --n;
  }
  const auto* words = reinterpret_cast<const std::uint64_t*>(p);
  for (std::size_t i = 0; i < n / 8; ++i) {
    if (words[i] != 0) return false;
  }
  for (std::size_t i = n - n % 8; i < n; ++i) {
    if (p[i] != std::byte{0}) return false;
  }
  return true;
}

}  // namespace vmem
