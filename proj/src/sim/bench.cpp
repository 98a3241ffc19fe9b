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

#include "vmem/sim/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <chrono>
#include <cstring>
#include <mutex>
#include <random>
#include <thread>

#include "vmem/error.hpp"
#include "vmem/hotswap.hpp"

namespace vmem::sim {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

std::uint64_t ns_since(Clock::time_point t) {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t).count());
}

Framework::Options framework_options(const SimConfig& config) {
  return {std::chrono::milliseconds(config.upgrade_timeout_ms)};
}

// Translation through the fastmap must agree with the page-table walk.
bool translates(Framework& fw, Pid pid, VirtAddr va) {
  const Translation t = fw.va_to_pa(pid, va);
  const auto w = fw.walk(pid, va);
  return w && w->present && w->pa == t.pa();
}

}  // namespace

std::vector<CreateRow> bench_create(const SimConfig& config, const std::vector<Bytes>& sizes, MapMode mode,
                                    PageSize psize) {
  std::vector<CreateRow> rows;
  for (Bytes size : sizes) {
    VmemState state(config.plan());
    Framework fw(state, framework_options(config));
    fw.load_core(0);
    fw.activate(0);
    const Pid pid = config.pid_base;
    fw.open(pid);
    const AllocGrant grant =
        fw.alloc(pid, AllocRequest{size, psize, NodePolicy::balanced(), mode == MapMode::kOnDemand});
    const auto start = Clock::now();
    const MapOutcome mapped = fw.map(MapArgs{pid, grant.grant_id, config.va_base, mode, config.fast_path});
    CreateRow row;
    row.map_ns = ns_since(start);
    row.size = size;
    row.mode = mode;
    row.extents = grant.extents.size();
    row.leaves_big = mapped.report.leaves_big;
    row.leaves_small = mapped.report.leaves_small;
    if (mode == MapMode::kOnDemand) {
      for (Bytes off = 0; off < size; off += config.slice) fw.fault(pid, config.va_base + off);
    }
    if (const GrantFaults* f = state.mapping.faults_for(grant.grant_id)) row.faults = f->count;
    fw.close(pid);
    rows.push_back(row);
  }
  return rows;
}

LatencySummary summarize(std::vector<std::uint64_t> samples) {
  LatencySummary s;
  s.count = samples.size();
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  long double sum = 0;
  for (std::uint64_t v : samples) sum += v;
  s.mean_ns = static_cast<std::uint64_t>(sum / samples.size());
  auto rank = [&](double q) {
    // Nearest-rank percentile.
    const auto k = static_cast<std::size_t>(std::ceil(q * samples.size()));
    return samples[std::max<std::size_t>(k, 1) - 1];
  };
  s.p50_ns = rank(0.50);
  s.p99_ns = rank(0.99);
  s.max_ns = samples.back();
  return s;
}

UpgradeBench bench_upgrade(const SimConfig& config, std::uint64_t iterations, bool churn,
                           std::uint32_t resident_vms) {
  UpgradeBench out;
  out.iterations = iterations;
  out.churn = churn;
  VmemState state(config.plan());
  Framework fw(state, framework_options(config));
  fw.load_core(0);
  fw.activate(0);

  std::mutex diag_mutex;
  auto violation = [&](std::string what) {
    std::lock_guard lock(diag_mutex);
    ++out.violations;
    if (out.diagnostics.size() < 16) out.diagnostics.push_back(std::move(what));
  };

  // Resident VMs give every upgrade mappings to rebind.
  std::vector<std::pair<Pid, Bytes>> residents;
  for (std::uint32_t i = 0; i < resident_vms; ++i) {
    const Pid pid = config.pid_base + i;
    const Bytes size = config.slice * (1 + i % 4) + (i % 2 == 1 ? config.big_grain : 0);
    fw.open(pid);
    try {
      const AllocGrant g = fw.alloc(pid, AllocRequest{size, PageSize::kMix, NodePolicy::balanced(), false});
      fw.map(MapArgs{pid, g.grant_id, config.va_base, MapMode::kEager, config.fast_path});
      residents.emplace_back(pid, size);
    } catch (const VmemError&) {
      fw.close(pid);
      break;
    }
  }

  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> cycles{0};
  std::thread churner;
  if (churn) {
    churner = std::thread([&] {
      std::mt19937_64 rng(config.seed);
      Pid pid = config.pid_base + 1'000'000;
      while (!stop.load()) {
        ++pid;
        const Bytes size = config.slice * (1 + rng() % 8);
        try {
          fw.open(pid);
          const AllocGrant g = fw.alloc(pid, AllocRequest{size, PageSize::kSmall, NodePolicy::balanced(), false});
          fw.map(MapArgs{pid, g.grant_id, config.va_base, MapMode::kEager, config.fast_path});
          const VirtAddr va = config.va_base + (rng() % size);
          if (!translates(fw, pid, va)) violation("churn vm " + std::to_string(pid) + " translation mismatch");
          fw.close(pid);
          cycles.fetch_add(1);
        } catch (const VmemError& e) {
          violation("churn vm " + std::to_string(pid) + ": " + e.what());
          try {
            fw.close(pid);
          } catch (const VmemError&) {
          }
        }
      }
    });
  }

  std::vector<std::uint64_t> totals;
  std::vector<std::uint64_t> waits;
  totals.reserve(iterations);
  waits.reserve(iterations);
  out.min_rebound_mappings = iterations == 0 ? 0 : UINT64_MAX;
  for (std::uint64_t it = 0; it < iterations; ++it) {
    const std::uint32_t from = *fw.active_version();
    const std::uint32_t to = from == 0 ? 1 : 0;
    std::optional<ObservableState> before;
    if (!churn) before = observe(state);
    try {
      fw.load_core(to);
      const UpgradeReport r = fw.upgrade(from, to);
      totals.push_back(r.total_ns);
      waits.push_back(r.wait_time_ns);
      out.min_rebound_mappings = std::min(out.min_rebound_mappings, r.rebound_mappings);
      const std::string tag = "upgrade " + std::to_string(it) + " v" + std::to_string(from) + "->v" +
                              std::to_string(to) + ": ";
      if (r.old_refcnt_final != 0) violation(tag + "old refcnt " + std::to_string(r.old_refcnt_final));
      if (!r.conservation_held) violation(tag + "reference conservation broken");
      if (r.rebound_mappings != r.transferred_refs) violation(tag + "rebound and transferred counts differ");
      if (fw.core(from) != nullptr) violation(tag + "old core still loaded");
      {
        std::lock_guard lock(state.manager_mutex);
        const CoreModule* now = fw.core(to);
        if (now == nullptr || now->refcnt.load() != state.fastmap.count_bound_to(to) ||
            state.fastmap.count_bound_to(from) != 0) {
          violation(tag + "refcnt does not match bound records");
        }
      }
      if (before && observe(state) != *before) violation(tag + "observable state changed");
    } catch (const VmemError& e) {
      violation("upgrade " + std::to_string(it) + ": " + e.what());
      break;
    }
  }
  if (iterations == 0) out.min_rebound_mappings = 0;

  stop.store(true);
  if (churner.joinable()) churner.join();
  out.churn_cycles = cycles.load();

  // Audit: every resident VM still translates at both ends and tears down.
  for (const auto& [pid, size] : residents) {
    try {
      if (!translates(fw, pid, config.va_base) || !translates(fw, pid, config.va_base + size - 1)) {
        violation("resident vm " + std::to_string(pid) + " translation mismatch after upgrades");
      }
      fw.close(pid);
      ++out.audited_vms;
    } catch (const VmemError& e) {
      violation("resident vm " + std::to_string(pid) + ": " + e.what());
    }
  }
  for (const NodeDesc& node : state.topology.nodes()) {
    if (node.slices.count(SliceState::kUsed) != 0) {
      violation("node " + std::to_string(node.node_id) + " has Used slices after teardown");
    }
  }
  out.latency = summarize(std::move(totals));
  out.wait = summarize(std::move(waits));
  return out;
}

std::vector<ZeroRow> bench_zero(const SimConfig& config, const std::vector<Bytes>& sizes) {
  VmemState state(config.plan(), config.bench_backing);
  if (!state.backing.enabled()) throw VmemError(Errc::kDisabled, "bench-zero needs --bench-backing");
  std::vector<ZeroRow> rows;
  for (Bytes size : sizes) {
    const AllocGrant& grant = state.allocator.alloc(AllocRequest{size, PageSize::kMix, NodePolicy::single(0), false});
    const std::uint64_t id = grant.grant_id;
    const std::vector<Extent> extents = grant.extents;
    for (ZeroMethod method : {ZeroMethod::kStandard, ZeroMethod::kCacheBypass}) {
      ZeroRow row;
      row.size = size;
      row.method = method;
      row.verified = true;
      for (const Extent& x : extents) {
        const auto bytes = state.backing.region(x);
        std::memset(bytes.data(), 0xA5, bytes.size());  // leftovers from a previous tenant
        row.zero_ns += static_cast<std::uint64_t>(zero_extent(state.backing, x, method).count());
        row.verified = row.verified && all_zero(bytes);
      }
      rows.push_back(row);
    }
    for (const Extent& x : extents) state.backing.discard(x);
    state.allocator.free(id);
  }
  return rows;
}

json to_json(const std::vector<CreateRow>& rows) {
  json out = json::array();
  for (const CreateRow& r : rows) {
    out.push_back({{"size", r.size},
                   {"mode", r.mode == MapMode::kEager ? "eager" : "on_demand"},
                   {"extents", r.extents},
                   {"leaves_big", r.leaves_big},
                   {"leaves_small", r.leaves_small},
                   {"faults", r.faults},
                   {"map_ns", r.map_ns}});
  }
  return out;
}

namespace {
json latency_json(const LatencySummary& s) {
  return {{"count", s.count}, {"mean_ns", s.mean_ns}, {"p50_ns", s.p50_ns}, {"p99_ns", s.p99_ns}, {"max_ns", s.max_ns}};
}
}  // namespace

json to_json(const UpgradeBench& b) {
  return {{"iterations", b.iterations},
          {"churn", b.churn},
          {"latency", latency_json(b.latency)},
          {"wait", latency_json(b.wait)},
          {"violations", b.violations},
          {"diagnostics", b.diagnostics},
          {"churn_cycles", b.churn_cycles},
          {"audited_vms", b.audited_vms},
          {"min_rebound_mappings", b.min_rebound_mappings}};
}

json to_json(const std::vector<ZeroRow>& rows) {
  json out = json::array();
  for (const ZeroRow& r : rows) {
    out.push_back({{"size", r.size},
                   {"method", zero_method_name(r.method)},
                   {"zero_ns", r.zero_ns},
                   {"verified", r.verified}});
  }
  return out;
}

}  // namespace vmem::sim
