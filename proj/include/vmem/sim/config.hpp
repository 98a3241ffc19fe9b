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

#ifndef VMEM_SIM_CONFIG_HPP
#define VMEM_SIM_CONFIG_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "vmem/topology.hpp"

namespace vmem::sim {

/// Simulator settings. Every field has a key of the same name in the
/// config file and a matching --flag (underscores become dashes).
struct SimConfig {
  std::uint32_t nodes = 2;
  Bytes host_total = 18 * kGiB;
  Bytes host_os = 2 * kGiB;
  Bytes slice = kDefaultSliceBytes;
  Bytes big_grain = kDefaultBigGrainBytes;
  Bytes fault_reserve = kDefaultFaultReserveBytes;
  std::uint64_t upgrade_timeout_ms = 1000;
  bool fast_path = true;
  bool bench_backing = false;
  std::uint64_t seed = 0;
  VirtAddr va_base = 0x400'0000'0000;  // 4 TiB, big-grain aligned
  Pid pid_base = 1000;

  ReservationPlan plan() const;

  /// Sets one key from its textual value. EINVAL for unknown keys.
  void set(std::string_view key, std::string_view value);
  /// Every key with its current value, in a stable order.
  std::vector<std::pair<std::string, std::string>> items() const;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

/// Reads "key = value" lines; '#' starts a comment. Errors carry the line.
SimConfig parse_config(std::string_view text, SimConfig base = {});
SimConfig load_config(const std::string& path, SimConfig base = {});

nlohmann::json config_to_json(const SimConfig& config);
SimConfig config_from_json(const nlohmann::json& j);

}  // namespace vmem::sim

#endif  // VMEM_SIM_CONFIG_HPP
