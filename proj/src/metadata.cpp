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

#include "vmem/metadata.hpp"

#include <sstream>
#include <vector>

#include "vmem/fastmap.hpp"
#include "vmem/topology.hpp"

namespace vmem {

std::string MetadataReport::to_text() const {
  std::ostringstream out;
  out << "module_data_bytes " << module_data_bytes << '\n'
      << "ms_bytes " << ms_bytes << '\n'
      << "fastmap_bytes " << fastmap_bytes << '\n'
      << "mce_bytes " << mce_bytes << '\n'
      << "other_bytes " << other_bytes << '\n'
      << "total_bytes " << total_bytes << '\n';
  return out.str();
}

MetadataReport compute_metadata(std::uint32_t nodes, std::uint64_t total_slices,
                                std::span<const std::uint64_t> fastmap_entry_counts, std::uint64_t mce_count) {
  MetadataReport r;
  r.module_data_bytes = kInterfaceModuleBytes + kCoreModuleBytes;
  r.ms_bytes = kMsPerNodeBytes * nodes + total_slices;
  for (std::uint64_t entries : fastmap_entry_counts) {
    r.fastmap_bytes += kFastmapPerNodeBytes * nodes + kFastmapPerEntryBytes * entries;
  }
  r.mce_bytes = kMceBaseBytes + kMcePerEventBytes * mce_count;
  r.other_bytes = kProcBytes + kDumpParamBytes + kImmutableBytes;
  r.total_bytes = r.module_data_bytes + r.ms_bytes + r.fastmap_bytes + r.mce_bytes + r.other_bytes;
  return r;
}

MetadataReport metadata_bytes(const MemoryTopology& topology, const FastMapRegistry& registry,
                              std::uint64_t mce_count) {
  std::vector<std::uint64_t> entries;
  for (const FastMapRecord& r : registry.records()) entries.push_back(r.entries.size());
  return compute_metadata(topology.node_count(), topology.total_slices(), entries, mce_count);
}

}  // namespace vmem
