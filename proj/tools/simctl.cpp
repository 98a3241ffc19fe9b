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

// simctl: command-line front end for the reserved-memory simulator.
//
// Stateful commands (alloc, free, translate, borrow, reclaim, inject-mce,
// upgrade, status) keep a state file: the first line holds the config,
// every further line is an applied trace event. Each run rebuilds the
// manager by replaying that journal.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vmem/error.hpp"
#include "vmem/sim/bench.hpp"
#include "vmem/sim/config.hpp"
#include "vmem/sim/simulator.hpp"
#include "vmem/sim/trace.hpp"

namespace {

using nlohmann::json;
using namespace vmem;
using namespace vmem::sim;

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::string config_path;
  std::string report_path;
  std::string state_path = "vmem.state";
  std::map<std::string, std::string> overrides;  // config key -> flag value
};

void emit(const Globals& g, const json& doc) {
  if (g.report_path.empty() || g.report_path == "-") {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream out(g.report_path);
  if (!out) throw VmemError(Errc::kInvalid, "cannot write report '" + g.report_path + "'");
  out << doc.dump(2) << '\n';
}

SimConfig resolve_config(const Globals& g) {
  SimConfig config;
  if (!g.config_path.empty()) config = load_config(g.config_path, config);
  for (const auto& [key, value] : g.overrides) config.set(key, value);
  return config;
}

struct Journal {
  SimConfig config;
  std::vector<TraceEvent> events;
};

Journal load_journal(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw VmemError(Errc::kNoEnt, "no state file '" + path + "'; run 'simctl init' first");
  Journal j;
  std::string line;
  if (!std::getline(in, line)) throw VmemError(Errc::kInvalid, "empty state file '" + path + "'");
  j.config = config_from_json(json::parse(line).at("config"));
  std::ostringstream rest;
  rest << in.rdbuf();
  j.events = parse_trace(rest.str()).events;
  return j;
}

void write_journal(const std::string& path, const SimConfig& config) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw VmemError(Errc::kInvalid, "cannot write state file '" + path + "'");
  out << json{{"config", config_to_json(config)}}.dump() << '\n';
}

void append_journal(const std::string& path, const TraceEvent& e) {
  std::ofstream out(path, std::ios::app);
  out << event_to_json(e).dump() << '\n';
}

std::unique_ptr<Simulator> rebuild(const Journal& journal) {
  auto sim = std::make_unique<Simulator>(journal.config);
  for (const TraceEvent& e : journal.events) {
    const EventOutcome& o = sim->apply(e);
    if (!o.expected) {
      throw VmemError(Errc::kInvalid, "journal event seq " + std::to_string(e.seq) + " no longer replays: " +
                                          o.message);
    }
  }
  return sim;
}

// Applies `e` on top of the journal and records it when it succeeds.
int apply_stateful(const Globals& g, TraceEvent e) {
  const Journal journal = load_journal(g.state_path);
  auto sim = rebuild(journal);
  e.seq = journal.events.empty() ? 1 : journal.events.back().seq + 1;
  const EventOutcome& o = sim->apply(e);
  json doc = {{"seq", o.seq}, {"op", trace_op_name(o.op)}, {"ok", !o.error}, {"detail", o.detail}};
  if (o.error) {
    doc["error"] = errc_name(*o.error);
    doc["message"] = o.message;
    emit(g, doc);
    return kExitFailed;
  }
  append_journal(g.state_path, e);
  emit(g, doc);
  return kExitOk;
}

// Offsets accept sizes ("1g") and hex addresses ("0x1234").
Bytes parse_offset(const std::string& text) {
  return text.starts_with("0x") || text.starts_with("0X") ? parse_u64(text) : parse_size(text);
}

std::vector<Bytes> parse_sizes(const std::string& list) {
  std::vector<Bytes> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(parse_size(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reserved-memory manager simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Config file (key = value lines)");
  app.add_option("--report", g.report_path, "Write the JSON result here instead of stdout");
  app.add_option("--state", g.state_path, "State file of the stateful commands")->capture_default_str();
  // One flag per config key; they override the config file.
  std::map<std::string, std::string> flag_values;
  for (const auto& [key, value] : SimConfig{}.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    app.add_option(flag, flag_values[key], "Config " + key + " (default " + value + ")");
  }

  auto* init = app.add_subcommand("init", "Create a fresh state file from the config");

  TraceEvent alloc_ev;
  alloc_ev.op = TraceOp::kCreate;
  std::string alloc_size, alloc_psize = "mix", alloc_numa = "balanced";
  bool no_fast_path = false;
  auto* alloc = app.add_subcommand("alloc", "Create a VM: allocate and map its memory");
  alloc->add_option("--vm", alloc_ev.vm, "VM name")->required();
  alloc->add_option("--size", alloc_size, "Size, e.g. 4g or 3.5g")->required();
  alloc->add_option("--psize", alloc_psize, "big, small or mix")->capture_default_str();
  alloc->add_option("--numa", alloc_numa, "node:K or balanced")->capture_default_str();
  alloc->add_flag("--on-demand", alloc_ev.on_demand, "Map lazily; leaves are installed on fault");
  alloc->add_flag("--no-fast-path", no_fast_path, "Look up every leaf in the memtype tree");

  std::string free_vm;
  auto* free_cmd = app.add_subcommand("free", "Destroy a VM and release its memory");
  free_cmd->add_option("--vm", free_vm, "VM name")->required();

  std::string tr_vm, tr_offset = "0", tr_pfn, tr_va;
  std::uint32_t tr_node = 0;
  Pid tr_pid = 0;
  auto* translate = app.add_subcommand("translate", "VA to PA (--vm/--offset or --pid/--va), PFN to owner (--node/--pfn)");
  translate->add_option("--vm", tr_vm, "VM name");
  translate->add_option("--pid", tr_pid, "Owner pid, with --va");
  translate->add_option("--va", tr_va, "Virtual address, with --pid");
  translate->add_option("--offset", tr_offset, "Byte offset into the VM")->capture_default_str();
  translate->add_option("--node", tr_node, "Node of --pfn");
  translate->add_option("--pfn", tr_pfn, "Physical frame number for the reverse lookup");

  std::string borrow_size;
  std::uint32_t borrow_node = 0;
  auto* borrow = app.add_subcommand("borrow", "Lend free slices to the host OS");
  borrow->add_option("--node", borrow_node, "Node")->capture_default_str();
  borrow->add_option("--size", borrow_size, "Size")->required();

  std::string reclaim_token;
  auto* reclaim = app.add_subcommand("reclaim", "Take lent slices back");
  reclaim->add_option("--token", reclaim_token, "Token printed by borrow")->required();

  std::uint32_t mce_node = 0;
  std::string mce_slice = "0", mce_vm, mce_offset = "0";
  auto* mce = app.add_subcommand("inject-mce", "Quarantine a slice after a machine check");
  mce->add_option("--node", mce_node, "Node")->capture_default_str();
  mce->add_option("--slice", mce_slice, "Slice index on the node")->capture_default_str();
  mce->add_option("--vm", mce_vm, "Target the slice backing this VM instead");
  mce->add_option("--offset", mce_offset, "Byte offset into --vm")->capture_default_str();

  std::string up_to = "v1";
  std::uint64_t up_timeout_ms = 0;
  auto* upgrade = app.add_subcommand("upgrade", "Hot-upgrade the core to another version");
  upgrade->add_option("--to", up_to, "Target version, e.g. v1")->capture_default_str();
  upgrade->add_option("--timeout-ms", up_timeout_ms, "Grace-period timeout (default from config)");

  auto* status = app.add_subcommand("status", "Introspection snapshot and run report");

  std::string trace_path;
  auto* replay_cmd = app.add_subcommand("replay", "Replay a JSONL trace on a fresh manager");
  replay_cmd->add_option("trace", trace_path, "Trace file")->required();

  std::string bc_sizes = "4g,8g,16g", bc_mode = "eager", bc_psize = "mix";
  auto* bench_create_cmd = app.add_subcommand("bench-create", "VM creation cost per size");
  bench_create_cmd->add_option("--sizes", bc_sizes, "Comma-separated sizes")->capture_default_str();
  bench_create_cmd->add_option("--mode", bc_mode, "eager or on-demand")->capture_default_str();
  bench_create_cmd->add_option("--psize", bc_psize, "big, small or mix")->capture_default_str();

  std::uint64_t bu_iterations = 1000;
  std::uint32_t bu_resident = 10;
  bool bu_churn = false;
  auto* bench_upgrade_cmd = app.add_subcommand("bench-upgrade", "Upgrade latency over alternating versions");
  bench_upgrade_cmd->add_option("--iterations", bu_iterations, "Upgrades to run")->capture_default_str();
  bench_upgrade_cmd->add_option("--resident", bu_resident, "Live VMs during the run")->capture_default_str();
  bench_upgrade_cmd->add_flag("--churn", bu_churn, "Create and destroy VMs concurrently");

  std::string bz_sizes = "2m,64m,1g";
  auto* bench_zero_cmd = app.add_subcommand("bench-zero", "Zeroing cost of both fill strategies");
  bench_zero_cmd->add_option("--sizes", bz_sizes, "Comma-separated sizes")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  for (const auto& [key, value] : flag_values) {
    if (!value.empty()) g.overrides[key] = value;
  }

  try {
    if (init->parsed()) {
      const SimConfig config = resolve_config(g);
      Simulator sim(config);  // validates the topology
      write_journal(g.state_path, config);
      json doc = sim.report()["final"]["nodes"];
      emit(g, {{"state", g.state_path}, {"config", config_to_json(config)}, {"nodes", doc}});
      return kExitOk;
    }
    if (alloc->parsed()) {
      alloc_ev.size = parse_size(alloc_size);
      alloc_ev.psize = parse_page_size(alloc_psize);
      alloc_ev.numa = parse_numa(alloc_numa);
      if (no_fast_path) alloc_ev.extras["fast_path"] = false;
      return apply_stateful(g, alloc_ev);
    }
    if (free_cmd->parsed()) {
      TraceEvent e;
      e.op = TraceOp::kDestroy;
      e.vm = free_vm;
      return apply_stateful(g, e);
    }
    if (borrow->parsed()) {
      TraceEvent e;
      e.op = TraceOp::kBorrow;
      e.size = parse_size(borrow_size);
      e.extras["node"] = borrow_node;
      return apply_stateful(g, e);
    }
    if (reclaim->parsed()) {
      TraceEvent e;
      e.op = TraceOp::kReclaim;
      e.extras["token"] = parse_u64(reclaim_token);
      return apply_stateful(g, e);
    }
    if (mce->parsed()) {
      TraceEvent e;
      e.op = TraceOp::kInjectMce;
      if (!mce_vm.empty()) {
        e.vm = mce_vm;
        e.extras["offset"] = parse_offset(mce_offset);
      } else {
        e.extras["node"] = mce_node;
        e.extras["slice"] = parse_u64(mce_slice);
      }
      return apply_stateful(g, e);
    }
    if (upgrade->parsed()) {
      TraceEvent e;
      e.op = TraceOp::kUpgrade;
      e.extras["to"] = up_to;
      if (up_timeout_ms != 0) e.extras["timeout_ms"] = up_timeout_ms;
      return apply_stateful(g, e);
    }
    if (translate->parsed()) {
      auto sim = rebuild(load_journal(g.state_path));
      Framework& fw = sim->framework();
      json doc;
      if (!tr_pfn.empty()) {
        const Owner o = fw.pa_to_va(tr_node, parse_u64(tr_pfn));
        doc = {{"node", tr_node}, {"pfn", tr_pfn}, {"pid", o.pid}, {"va", to_hex(o.va)}};
        for (const auto& [name, rec] : sim->vms()) {
          if (rec.pid == o.pid) doc["vm"] = name;
        }
      } else {
        Pid pid = tr_pid;
        VirtAddr va = 0;
        if (!tr_vm.empty()) {
          const VmRecord& rec = sim->vm(tr_vm);
          pid = rec.pid;
          va = rec.va_base + parse_offset(tr_offset);
        } else if (!tr_va.empty()) {
          va = parse_u64(tr_va);
        } else {
          throw VmemError(Errc::kInvalid, "translate needs --vm, --pid with --va, or --pfn");
        }
        const Translation t = fw.va_to_pa(pid, va);
        const auto w = fw.walk(pid, va);
        doc = {{"pid", pid},
               {"va", to_hex(va)},
               {"node", t.node},
               {"pfn", to_hex(t.pfn)},
               {"pa", to_hex(t.pa())},
               {"page_table", w && w->present ? json(to_hex(w->pa)) : json("not present")}};
      }
      emit(g, doc);
      return kExitOk;
    }
    if (status->parsed()) {
      auto sim = rebuild(load_journal(g.state_path));
      json doc = sim->report();
      doc["introspection"] = sim->framework().introspect();
      emit(g, doc);
      return kExitOk;
    }
    if (replay_cmd->parsed()) {
      const SimConfig config = resolve_config(g);
      ParsedTrace trace;
      try {
        trace = load_trace(trace_path);
      } catch (const TraceError& e) {
        std::cerr << trace_path << ": " << e.what() << '\n';
        return kExitUsage;
      }
      for (const std::string& w : trace.warnings) std::cerr << "warning: " << w << '\n';
      const ReplayResult result = replay(config, trace);
      emit(g, result.report);
      return result.failed ? kExitFailed : kExitOk;
    }
    if (bench_create_cmd->parsed()) {
      const SimConfig config = resolve_config(g);
      const MapMode mode = bc_mode == "eager" ? MapMode::kEager : MapMode::kOnDemand;
      if (bc_mode != "eager" && bc_mode != "on-demand" && bc_mode != "on_demand") {
        throw VmemError(Errc::kInvalid, "mode must be eager or on-demand");
      }
      emit(g, {{"bench", "create"},
               {"rows", to_json(bench_create(config, parse_sizes(bc_sizes), mode, parse_page_size(bc_psize)))}});
      return kExitOk;
    }
    if (bench_upgrade_cmd->parsed()) {
      const SimConfig config = resolve_config(g);
      const UpgradeBench b = bench_upgrade(config, bu_iterations, bu_churn, bu_resident);
      emit(g, {{"bench", "upgrade"}, {"result", to_json(b)}});
      return b.violations == 0 ? kExitOk : kExitFailed;
    }
    if (bench_zero_cmd->parsed()) {
      const SimConfig config = resolve_config(g);
      const auto rows = bench_zero(config, parse_sizes(bz_sizes));
      emit(g, {{"bench", "zero"}, {"rows", to_json(rows)}});
      const bool ok = std::all_of(rows.begin(), rows.end(), [](const ZeroRow& r) { return r.verified; });
      return ok ? kExitOk : kExitFailed;
    }
  } catch (const VmemError& e) {
    std::cerr << "simctl: " << e.what() << '\n';
    return e.code() == Errc::kInvalid ? kExitUsage : kExitFailed;
  } catch (const TraceError& e) {
    std::cerr << "simctl: state file: " << e.what() << '\n';
    return kExitUsage;
  } catch (const json::exception& e) {
    std::cerr << "simctl: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
