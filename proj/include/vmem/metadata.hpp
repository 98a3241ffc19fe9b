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

#ifndef VMEM_METADATA_HPP
#define VMEM_METADATA_HPP

#include <cstdint>
#include <span>
#include <string>

#include "vmem/units.hpp"

namespace vmem {

class MemoryTopology;
class FastMapRegistry;

// Fixed footprints of the management modules and auxiliary data, in bytes.
inline constexpr Bytes kInterfaceModuleBytes = 16'384;
inline constexpr Bytes kCoreModuleBytes = 225'280;
inline constexpr Bytes kProcBytes = 224;
inline constexpr Bytes kDumpParamBytes = 16;
inline constexpr Bytes kImmutableBytes = 1'520;

// Per-structure coefficients.
inline constexpr Bytes kMsPerNodeBytes = 112;
inline constexpr Bytes kFastmapPerNodeBytes = 120;
inline constexpr Bytes kFastmapPerEntryBytes = 24;
inline constexpr Bytes kMceBaseBytes = 8;
inline constexpr Bytes kMcePerEventBytes = 24 * 8;

struct MetadataReport {
  Bytes module_data_bytes = 0;
  Bytes ms_bytes = 0;
  Bytes fastmap_bytes = 0;
  Bytes mce_bytes = 0;
  Bytes other_bytes = 0;
  Bytes total_bytes = 0;

  /// "key value" lines, one per field, in declaration order.
  std::string to_text() const;

  friend bool operator==(const MetadataReport&, const MetadataReport&) = default;
};

/// Pure form: node count, total slice count across nodes, entry count of
/// each live fastmap, and number of MCE events.
MetadataReport compute_metadata(std::uint32_t nodes, std::uint64_t total_slices,
                                std::span<const std::uint64_t> fastmap_entry_counts, std::uint64_t mce_count);

MetadataReport metadata_bytes(const MemoryTopology& topology, const FastMapRegistry& registry,
                              std::uint64_t mce_count);

}  // namespace vmem

#endif  // VMEM_METADATA_HPP
