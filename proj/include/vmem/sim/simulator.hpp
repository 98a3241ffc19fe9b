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

#ifndef VMEM_SIM_SIMULATOR_HPP
#define VMEM_SIM_SIMULATOR_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vmem/hotswap.hpp"
#include "vmem/sim/config.hpp"
#include "vmem/sim/trace.hpp"

namespace vmem::sim {

struct VmRecord {
  std::string name;
  Pid pid = 0;
  std::uint64_t grant_id = 0;
  Bytes size = 0;
  VirtAddr va_base = 0;
  bool on_demand = false;
};

struct EventOutcome {
  std::uint64_t seq = 0;
  TraceOp op = TraceOp::kCreate;
  std::string vm;
  std::optional<Errc> error;
  std::string message;
  bool expected = true;  // the error, or its absence, matches the annotation
  nlohmann::json detail = nlohmann::json::object();
};

/// Per-node Used bytes, max minus min. Used counts slices held by grants
/// (Used and MceUsed).
Bytes numa_spread(const MemoryTopology& topology);

/// Applies trace events to a fresh manager through the dispatch layer and
/// accumulates the run report.
class Simulator {
 public:
  explicit Simulator(const SimConfig& config);

  const SimConfig& config() const { return config_; }
  VmemState& state() { return *state_; }
  Framework& framework() { return *framework_; }
  const std::map<std::string, VmRecord>& vms() const { return vms_; }
  const VmRecord& vm(const std::string& name) const;

  /// Applies one event; errors are captured in the outcome.
  const EventOutcome& apply(const TraceEvent& event);
  const std::vector<EventOutcome>& outcomes() const { return outcomes_; }
  /// True when some outcome did not match its annotation.
  bool failed() const;

  Bytes max_numa_spread() const { return max_spread_; }

  /// The run report. Wall-clock fields all end in "_ns".
  nlohmann::json report() const;

 private:
  nlohmann::json create(const TraceEvent& e);
  nlohmann::json destroy(const TraceEvent& e);
  nlohmann::json touch(const TraceEvent& e);
  nlohmann::json inject_mce(const TraceEvent& e);
  nlohmann::json borrow(const TraceEvent& e);
  nlohmann::json reclaim(const TraceEvent& e);
  nlohmann::json upgrade(const TraceEvent& e);
  nlohmann::json sample(std::uint64_t seq) const;

  SimConfig config_;
  std::unique_ptr<VmemState> state_;
  std::unique_ptr<Framework> framework_;
  std::map<std::string, VmRecord> vms_;
  Pid next_pid_;
  std::vector<EventOutcome> outcomes_;
  std::map<std::string, std::uint64_t> faults_per_vm_;
  std::vector<nlohmann::json> series_;
  std::vector<nlohmann::json> upgrades_;
  Bytes max_spread_ = 0;
};

/// Removes every "*_ns" member recursively, leaving the deterministic part.
nlohmann::json strip_timings(nlohmann::json report);

/// Replays a whole trace.
struct ReplayResult {
  nlohmann::json report;
  bool failed = false;
};
ReplayResult replay(const SimConfig& config, const ParsedTrace& trace);

}  // namespace vmem::sim

#endif  // VMEM_SIM_SIMULATOR_HPP
