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

#include "vmem/sim/simulator.hpp"

#include <algorithm>
#include <chrono>

namespace vmem::sim {

namespace {

using nlohmann::json;

json to_json(const MetadataReport& m) {
  return {{"module_data_bytes", m.module_data_bytes}, {"ms_bytes", m.ms_bytes},
          {"fastmap_bytes", m.fastmap_bytes},         {"mce_bytes", m.mce_bytes},
          {"other_bytes", m.other_bytes},             {"total_bytes", m.total_bytes}};
}

json to_json(const UpgradeReport& r) {
  return {{"from", r.from},
          {"to", r.to},
          {"rebound_slots", r.rebound_slots},
          {"rebound_exports", r.rebound_exports},
          {"rebound_mappings", r.rebound_mappings},
          {"transferred_refs", r.transferred_refs},
          {"old_refcnt_final", r.old_refcnt_final},
          {"introspection_rebuilt", r.introspection_rebuilt},
          {"conservation_held", r.conservation_held},
          {"wait_time_ns", r.wait_time_ns},
          {"total_ns", r.total_ns}};
}

json extents_json(const std::vector<Extent>& extents) {
  json out = json::array();
  for (const Extent& x : extents) {
    out.push_back({{"node", x.node}, {"start_slice", x.start_slice}, {"n_slices", x.n_slices},
                   {"grain", grain_name(x.grain)}});
  }
  return out;
}

std::uint64_t u64_extra(const TraceEvent& e, const char* key, std::uint64_t fallback) {
  if (!e.extras.contains(key)) return fallback;
  const json& v = e.extras[key];
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_string()) return parse_size(v.get<std::string>());
  throw VmemError(Errc::kInvalid, std::string("field '") + key + "' must be an unsigned number or size");
}

std::uint32_t parse_version(const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint32_t>();
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (!s.empty() && (s[0] == 'v' || s[0] == 'V')) s.erase(0, 1);
    return static_cast<std::uint32_t>(parse_u64(s));
  }
  throw VmemError(Errc::kInvalid, "bad core version");
}

std::uint64_t used_slices(const SliceArray& slices) {
  return slices.count(SliceState::kUsed) + slices.count(SliceState::kMceUsed);
}

}  // namespace

Bytes numa_spread(const MemoryTopology& topology) {
  std::uint64_t lo = UINT64_MAX;
  std::uint64_t hi = 0;
  for (const NodeDesc& node : topology.nodes()) {
    const std::uint64_t used = used_slices(node.slices);
    lo = std::min(lo, used);
    hi = std::max(hi, used);
  }
  return topology.nodes().empty() ? 0 : (hi - lo) * topology.slice_bytes();
}

Simulator::Simulator(const SimConfig& config)
    : config_(config),
      state_(std::make_unique<VmemState>(config.plan(), config.bench_backing)),
      framework_(std::make_unique<Framework>(
          *state_, Framework::Options{std::chrono::milliseconds(config.upgrade_timeout_ms)})),
      next_pid_(config.pid_base) {
  framework_->load_core(0);
  framework_->activate(0);
  series_.push_back(sample(0));
}

const VmRecord& Simulator::vm(const std::string& name) const {
  auto it = vms_.find(name);
  if (it == vms_.end()) throw VmemError(Errc::kNoEnt, "no vm '" + name + "'");
  return it->second;
}

const EventOutcome& Simulator::apply(const TraceEvent& e) {
  EventOutcome out;
  out.seq = e.seq;
  out.op = e.op;
  out.vm = e.vm;
  try {
    switch (e.op) {
      case TraceOp::kCreate: out.detail = create(e); break;
      case TraceOp::kDestroy: out.detail = destroy(e); break;
      case TraceOp::kTouch: out.detail = touch(e); break;
      case TraceOp::kInjectMce: out.detail = inject_mce(e); break;
      case TraceOp::kBorrow: out.detail = borrow(e); break;
      case TraceOp::kReclaim: out.detail = reclaim(e); break;
      case TraceOp::kUpgrade: out.detail = upgrade(e); break;
    }
  } catch (const VmemError& err) {
    out.error = err.code();
    out.message = err.detail();
  }
  out.expected = out.error == e.expect_error;
  series_.push_back(sample(e.seq));
  max_spread_ = std::max<Bytes>(max_spread_, series_.back()["numa_spread_bytes"].get<Bytes>());
  outcomes_.push_back(std::move(out));
  return outcomes_.back();
}

bool Simulator::failed() const {
  return std::any_of(outcomes_.begin(), outcomes_.end(), [](const EventOutcome& o) { return !o.expected; });
}

json Simulator::create(const TraceEvent& e) {
  if (vms_.contains(e.vm)) throw VmemError(Errc::kExists, "vm '" + e.vm + "' already exists");
  const Pid pid = next_pid_++;
  Framework& fw = *framework_;
  fw.open(pid);
  AllocGrant grant;
  MapOutcome mapped;
  const bool fast_path = e.extras.contains("fast_path") ? e.extras["fast_path"].get<bool>() : config_.fast_path;
  try {
    grant = fw.alloc(pid, AllocRequest{e.size, e.psize, e.numa, e.on_demand});
    mapped = fw.map(MapArgs{pid, grant.grant_id, config_.va_base, e.on_demand ? MapMode::kOnDemand : MapMode::kEager,
                            fast_path});
  } catch (...) {
    fw.close(pid);
    throw;
  }
  vms_[e.vm] = VmRecord{e.vm, pid, grant.grant_id, e.size, config_.va_base, e.on_demand};
  faults_per_vm_[e.vm] = 0;
  return {{"pid", pid},
          {"grant_id", grant.grant_id},
          {"size_1g", grant.split.size_1g},
          {"size_2m", grant.split.size_2m},
          {"extents", extents_json(grant.extents)},
          {"leaves_big", mapped.report.leaves_big},
          {"leaves_small", mapped.report.leaves_small},
          {"slow_lookups", mapped.report.slow_lookups},
          {"fast_hits", mapped.report.fast_hits},
          {"fastmap_records", mapped.records.size()}};
}

json Simulator::destroy(const TraceEvent& e) {
  const VmRecord rec = vm(e.vm);
  std::uint64_t faults = 0;
  {
    std::lock_guard lock(state_->manager_mutex);
    if (const GrantFaults* f = state_->mapping.faults_for(rec.grant_id)) faults = f->count;
  }
  framework_->close(rec.pid);
  vms_.erase(e.vm);
  faults_per_vm_[e.vm] = faults;
  return {{"pid", rec.pid}, {"grant_id", rec.grant_id}, {"faults", faults}};
}

json Simulator::touch(const TraceEvent& e) {
  const VmRecord& rec = vm(e.vm);
  const Bytes slice = config_.slice;
  const Bytes offset = align_down(u64_extra(e, "offset", 0), slice);
  const Bytes length = u64_extra(e, "length", rec.size - std::min(rec.size, offset));
  std::uint64_t touched = 0;
  std::uint64_t installed = 0;
  for (Bytes off = offset; off < offset + length; off += slice) {
    ++touched;
    if (framework_->fault(rec.pid, rec.va_base + off).installed) ++installed;
  }
  std::lock_guard lock(state_->manager_mutex);
  if (const GrantFaults* f = state_->mapping.faults_for(rec.grant_id)) faults_per_vm_[e.vm] = f->count;
  return {{"touched", touched}, {"installed", installed}};
}

json Simulator::inject_mce(const TraceEvent& e) {
  NodeId node = static_cast<NodeId>(u64_extra(e, "node", e.numa.is_balanced() ? 0 : e.numa.node));
  SliceIndex slice = u64_extra(e, "slice", 0);
  if (!e.vm.empty()) {
    // Target the slice backing vm + offset.
    const VmRecord& rec = vm(e.vm);
    const Translation t = framework_->va_to_pa(rec.pid, rec.va_base + u64_extra(e, "offset", 0));
    const auto [n, s] = state_->topology.locate(t.pa());
    node = n;
    slice = s;
  }
  const SliceState state = framework_->inject_mce(node, slice);
  return {{"node", node}, {"slice", slice}, {"state", slice_state_name(state)}};
}

json Simulator::borrow(const TraceEvent& e) {
  const NodeId node = static_cast<NodeId>(u64_extra(e, "node", e.numa.is_balanced() ? 0 : e.numa.node));
  const BorrowExtent b = framework_->borrow(node, e.size);
  json runs = json::array();
  for (const SliceRun& r : b.runs) runs.push_back({{"start_slice", r.start}, {"count", r.count}});
  return {{"token", b.token}, {"node", b.node_id}, {"n_slices", b.n_slices}, {"runs", runs}};
}

json Simulator::reclaim(const TraceEvent& e) {
  if (!e.extras.contains("token")) throw VmemError(Errc::kInvalid, "reclaim needs a token");
  const std::uint64_t token = u64_extra(e, "token", 0);
  framework_->reclaim(token);
  return {{"token", token}};
}

json Simulator::upgrade(const TraceEvent& e) {
  Framework& fw = *framework_;
  const auto active = fw.active_version();
  if (!active) throw VmemError(Errc::kStateMismatch, "no active core");
  const std::uint32_t to = e.extras.contains("to") ? parse_version(e.extras["to"]) : (*active == 0 ? 1 : 0);
  if (to == *active) throw VmemError(Errc::kInvalid, "core v" + std::to_string(to) + " is already active");
  const auto timeout = std::chrono::milliseconds(u64_extra(e, "timeout_ms", config_.upgrade_timeout_ms));
  fw.load_core(to);
  UpgradeReport report;
  try {
    report = fw.upgrade(*active, to, timeout);
  } catch (...) {
    fw.unload_core(to);
    throw;
  }
  json j = to_json(report);
  j["seq"] = e.seq;
  upgrades_.push_back(j);
  return j;
}

json Simulator::sample(std::uint64_t seq) const {
  json nodes = json::array();
  for (const NodeDesc& node : state_->topology.nodes()) {
    const FragReport f = state_->allocator.frag_report(node.node_id);
    nodes.push_back({{"node", node.node_id},
                     {"used_slices", used_slices(node.slices)},
                     {"free_slices", node.slices.count(SliceState::kFree)},
                     {"free_big_blocks", f.free_big_blocks},
                     {"fragmented_big_blocks", f.fragmented_big_blocks},
                     {"largest_free_run_slices", f.largest_free_run_slices}});
  }
  return {{"seq", seq}, {"numa_spread_bytes", numa_spread(state_->topology)}, {"nodes", nodes}};
}

json Simulator::report() const {
  json events = json::array();
  std::uint64_t unexpected = 0;
  for (const EventOutcome& o : outcomes_) {
    if (!o.expected) ++unexpected;
    json j = {{"seq", o.seq}, {"op", trace_op_name(o.op)}, {"ok", !o.error}, {"expected", o.expected}};
    if (!o.vm.empty()) j["vm"] = o.vm;
    if (o.error) {
      j["error"] = errc_name(*o.error);
      j["message"] = o.message;
    }
    j["detail"] = o.detail;
    events.push_back(std::move(j));
  }

  json nodes = json::array();
  for (const NodeDesc& node : state_->topology.nodes()) {
    json hist = json::object();
    for (std::size_t s = 0; s < kSliceStateCount; ++s) {
      hist[std::string(slice_state_name(static_cast<SliceState>(s)))] = node.slices.histogram()[s];
    }
    nodes.push_back({{"node", node.node_id},
                     {"phys_base", node.phys_base},
                     {"reserved_bytes", node.reserved_bytes},
                     {"sellable_bytes", node.sellable_bytes},
                     {"slices", hist}});
  }
  json live = json::array();
  for (const auto& [name, rec] : vms_) {
    live.push_back({{"vm", name}, {"pid", rec.pid}, {"grant_id", rec.grant_id}, {"size", rec.size}});
  }
  json cores = json::array();
  for (const CoreModule* c : framework_->cores()) {
    cores.push_back({{"version", c->version}, {"state", core_state_name(c->state.load())}, {"refcnt", c->refcnt.load()}});
  }
  json faults = json::object();
  for (const auto& [name, count] : faults_per_vm_) faults[name] = count;

  const auto active = framework_->active_version();
  return {{"config", config_to_json(config_)},
          {"events", events},
          {"unexpected_errors", unexpected},
          {"final",
           {{"active_version", active ? json(*active) : json(nullptr)},
            {"cores", cores},
            {"nodes", nodes},
            {"live_vms", live},
            {"borrowed_extents", state_->topology.borrowed().size()},
            {"mce_count", state_->topology.mce_count()}}},
          {"metadata", to_json(state_->metadata())},
          {"fragmentation", series_},
          {"faults_per_vm", faults},
          {"upgrades", upgrades_},
          {"numa", {{"max_spread_bytes", max_spread_}, {"final_spread_bytes", numa_spread(state_->topology)}}}};
}

json strip_timings(json report) {
  if (report.is_object()) {
    for (auto it = report.begin(); it != report.end();) {
      if (it.key().ends_with("_ns")) {
        it = report.erase(it);
      } else {
        *it = strip_timings(std::move(*it));
        ++it;
      }
    }
  } else if (report.is_array()) {
    for (json& v : report) v = strip_timings(std::move(v));
  }
  return report;
}

ReplayResult replay(const SimConfig& config, const ParsedTrace& trace) {
  Simulator sim(config);
  for (const TraceEvent& e : trace.events) sim.apply(e);
  ReplayResult out{sim.report(), sim.failed()};
  out.report["warnings"] = trace.warnings;
  return out;
}

}  // namespace vmem::sim
