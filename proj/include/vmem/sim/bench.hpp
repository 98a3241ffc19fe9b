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

#ifndef VMEM_SIM_BENCH_HPP
#define VMEM_SIM_BENCH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "vmem/mapping.hpp"
#include "vmem/sim/config.hpp"
#include "vmem/zeroing.hpp"

namespace vmem::sim {

struct CreateRow {
  Bytes size = 0;
  MapMode mode = MapMode::kEager;
  std::uint64_t extents = 0;
  std::uint64_t leaves_big = 0;
  std::uint64_t leaves_small = 0;
  std::uint64_t faults = 0;
  std::uint64_t map_ns = 0;
};

/// Creates one VM per size on a fresh manager, maps it, and for on-demand
/// mode touches every slice-sized region. Sizes beyond capacity: ENOSPACE.
std::vector<CreateRow> bench_create(const SimConfig& config, const std::vector<Bytes>& sizes, MapMode mode,
                                    PageSize psize = PageSize::kMix);

struct LatencySummary {
  std::uint64_t count = 0;
  std::uint64_t mean_ns = 0;
  std::uint64_t p50_ns = 0;
  std::uint64_t p99_ns = 0;
  std::uint64_t max_ns = 0;
};
LatencySummary summarize(std::vector<std::uint64_t> samples);

struct UpgradeBench {
  std::uint64_t iterations = 0;
  bool churn = false;
  LatencySummary latency;  // whole upgrade
  LatencySummary wait;     // grace period only
  std::uint64_t violations = 0;
  std::vector<std::string> diagnostics;  // first few violations
  std::uint64_t churn_cycles = 0;        // create/destroy pairs by the churn actor
  std::uint64_t audited_vms = 0;         // VMs checked after the run
  std::uint64_t min_rebound_mappings = 0;
};

/// Alternates v0 and v1 `iterations` times over `resident_vms` live VMs.
/// After every upgrade: old refcnt 0, reference conservation, the new
/// core's refcnt equals its bound records, and without churn an unchanged
/// observable state. With churn a second thread creates, translates and
/// destroys VMs through the dispatch layer the whole time.
UpgradeBench bench_upgrade(const SimConfig& config, std::uint64_t iterations, bool churn,
                           std::uint32_t resident_vms = 10);

struct ZeroRow {
  Bytes size = 0;
  ZeroMethod method = ZeroMethod::kStandard;
  std::uint64_t zero_ns = 0;
  bool verified = false;
};

/// Allocates each size, dirties it, zeroes it with every method and
/// checks the result. Requires bench_backing.
std::vector<ZeroRow> bench_zero(const SimConfig& config, const std::vector<Bytes>& sizes);

nlohmann::json to_json(const std::vector<CreateRow>& rows);
nlohmann::json to_json(const UpgradeBench& bench);
nlohmann::json to_json(const std::vector<ZeroRow>& rows);

}  // namespace vmem::sim

#endif  // VMEM_SIM_BENCH_HPP
