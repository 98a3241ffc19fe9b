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

#ifndef VMEM_UNITS_HPP
#define VMEM_UNITS_HPP

#include <cstdint>
#include <string>
#include <string_view>

namespace vmem {

using Bytes = std::uint64_t;
using PhysAddr = std::uint64_t;
using VirtAddr = std::uint64_t;
using Pfn = std::uint64_t;
using SliceIndex = std::uint64_t;
using NodeId = std::uint32_t;
using Pid = std::int64_t;

inline constexpr Bytes kKiB = Bytes{1} << 10;
inline constexpr Bytes kMiB = Bytes{1} << 20;
inline constexpr Bytes kGiB = Bytes{1} << 30;

inline constexpr Bytes kBasePageBytes = 4 * kKiB;
inline constexpr Bytes kDefaultSliceBytes = 2 * kMiB;
inline constexpr Bytes kDefaultBigGrainBytes = 1 * kGiB;
inline constexpr Bytes kDefaultFaultReserveBytes = 32 * kMiB;

constexpr bool is_aligned(std::uint64_t value, std::uint64_t align) {
  return align != 0 && value % align == 0;
}

constexpr std::uint64_t align_down(std::uint64_t value, std::uint64_t align) {
  return value - value % align;
}

constexpr std::uint64_t align_up(std::uint64_t value, std::uint64_t align) {
  return align_down(value + align - 1, align);
}

constexpr Pfn to_pfn(PhysAddr pa) { return pa / kBasePageBytes; }
constexpr PhysAddr from_pfn(Pfn pfn) { return pfn * kBasePageBytes; }

/// Parses "512", "64k", "2m", "1g", "3.5g" (powers of 1024). Fractional
/// values must resolve to a whole number of bytes. Throws VmemError(kInvalid).
Bytes parse_size(std::string_view text);

/// Human-friendly size with the largest exact binary unit ("3584m", "1g").
std::string format_size(Bytes bytes);

/// Parses a decimal or 0x-prefixed hexadecimal unsigned integer.
std::uint64_t parse_u64(std::string_view text);

std::string to_hex(std::uint64_t value);

}  // namespace vmem

#endif  // VMEM_UNITS_HPP
