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

#include "vmem/sim/trace.hpp"

#include <array>
#include <fstream>
#include <set>
#include <sstream>

namespace vmem::sim {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 7> kOpNames = {"create",  "destroy", "inject_mce", "borrow",
                                                       "reclaim", "upgrade", "touch"};

constexpr std::array<std::string_view, 8> kCommonFields = {"seq",  "op",        "vm",       "size",
                                                           "psize", "numa",     "on_demand", "expect_error"};
constexpr std::array<std::string_view, 8> kExtraFields = {"node",   "slice",  "token",     "to",
                                                          "offset", "length", "fast_path", "timeout_ms"};

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& names, std::string_view key) {
  for (std::string_view n : names) {
    if (n == key) return true;
  }
  return false;
}

// Column of a field inside the raw line, for error positions.
std::size_t column_of(std::string_view line, std::string_view key) {
  const auto pos = line.find("\"" + std::string(key) + "\"");
  return pos == std::string_view::npos ? 0 : pos + 1;
}

Bytes size_field(const json& v) {
  if (v.is_number_unsigned()) return v.get<Bytes>();
  if (v.is_string()) return parse_size(v.get<std::string>());
  throw VmemError(Errc::kInvalid, "expected a byte count or size string");
}

}  // namespace

std::string_view trace_op_name(TraceOp op) { return kOpNames[static_cast<std::size_t>(op)]; }

TraceError::TraceError(std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error("trace:" + std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

NodePolicy parse_numa(std::string_view text) {
  if (text == "balanced") return NodePolicy::balanced();
  if (text.starts_with("node:")) {
    return NodePolicy::single(static_cast<NodeId>(parse_u64(text.substr(5))));
  }
  throw VmemError(Errc::kInvalid, "bad numa policy '" + std::string(text) + "' (want node:K or balanced)");
}

std::string numa_name(const NodePolicy& policy) {
  return policy.is_balanced() ? "balanced" : "node:" + std::to_string(policy.node);
}

TraceEvent event_from_json(const json& j, std::size_t line, std::vector<std::string>* warnings,
                           std::string_view raw_line) {
  if (!j.is_object()) throw TraceError(line, 1, "event must be a JSON object");
  const std::string raw = raw_line.empty() ? j.dump() : std::string(raw_line);
  TraceEvent e;
  std::string field;
  try {
    field = "seq";
    if (!j.contains("seq") || !j["seq"].is_number_unsigned()) {
      throw VmemError(Errc::kInvalid, "missing or non-integer seq");
    }
    e.seq = j["seq"].get<std::uint64_t>();
    field = "op";
    if (!j.contains("op") || !j["op"].is_string()) throw VmemError(Errc::kInvalid, "missing op");
    const std::string op = j["op"].get<std::string>();
    bool known = false;
    for (std::size_t i = 0; i < kOpNames.size(); ++i) {
      if (kOpNames[i] == op) {
        e.op = static_cast<TraceOp>(i);
        known = true;
      }
    }
    if (!known) throw VmemError(Errc::kInvalid, "unknown op '" + op + "'");
    field = "vm";
    if (j.contains("vm")) e.vm = j["vm"].get<std::string>();
    field = "size";
    if (j.contains("size")) e.size = size_field(j["size"]);
    field = "psize";
    if (j.contains("psize")) e.psize = parse_page_size(j["psize"].get<std::string>());
    field = "numa";
    if (j.contains("numa")) {
      e.numa = j["numa"].is_number_unsigned() ? NodePolicy::single(j["numa"].get<NodeId>())
                                              : parse_numa(j["numa"].get<std::string>());
    }
    field = "on_demand";
    if (j.contains("on_demand")) e.on_demand = j["on_demand"].get<bool>();
    field = "expect_error";
    if (j.contains("expect_error") && !j["expect_error"].is_null()) {
      e.expect_error = errc_from_name(j["expect_error"].get<std::string>());
    }
    for (const auto& [key, value] : j.items()) {
      if (contains(kCommonFields, key)) continue;
      if (contains(kExtraFields, key)) {
        e.extras[key] = value;
      } else if (warnings != nullptr) {
        warnings->push_back("line " + std::to_string(line) + ": ignoring unknown field '" + key + "'");
      }
    }
    field.clear();
    const bool needs_vm = e.op == TraceOp::kCreate || e.op == TraceOp::kDestroy || e.op == TraceOp::kTouch;
    if (needs_vm && e.vm.empty()) throw VmemError(Errc::kInvalid, std::string(trace_op_name(e.op)) + " needs vm");
    const bool needs_size = e.op == TraceOp::kCreate || e.op == TraceOp::kBorrow;
    if (needs_size && e.size == 0) {
      throw VmemError(Errc::kInvalid, std::string(trace_op_name(e.op)) + " needs a nonzero size");
    }
  } catch (const VmemError& err) {
    throw TraceError(line, field.empty() ? 0 : column_of(raw, field), err.detail());
  } catch (const json::exception& err) {
    throw TraceError(line, field.empty() ? 0 : column_of(raw, field),
                     "field '" + field + "' has the wrong type");
  }
  return e;
}

json event_to_json(const TraceEvent& e) {
  json j = {{"seq", e.seq}, {"op", trace_op_name(e.op)}};
  if (!e.vm.empty()) j["vm"] = e.vm;
  if (e.size != 0) j["size"] = e.size;
  if (e.op == TraceOp::kCreate) {
    j["psize"] = page_size_name(e.psize);
    j["numa"] = numa_name(e.numa);
    j["on_demand"] = e.on_demand;
  }
  if (e.op == TraceOp::kBorrow && !e.numa.is_balanced()) j["numa"] = numa_name(e.numa);
  if (e.expect_error) j["expect_error"] = errc_name(*e.expect_error);
  for (const auto& [key, value] : e.extras.items()) j[key] = value;
  return j;
}

ParsedTrace parse_trace(std::string_view text) {
  ParsedTrace out;
  std::set<std::string> alive;
  std::set<std::string> seen;
  std::optional<std::uint64_t> last_seq;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line[first] == '#') continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& err) {
      // byte is the 1-based position of the offending character.
      throw TraceError(line_no, err.byte, "malformed JSON");
    }
    TraceEvent e = event_from_json(j, line_no, &out.warnings, line);
    if (last_seq && e.seq <= *last_seq) {
      throw TraceError(line_no, column_of(line, "seq"), "seq " + std::to_string(e.seq) + " does not increase");
    }
    last_seq = e.seq;
    if (e.op == TraceOp::kCreate) {
      if (alive.contains(e.vm)) throw TraceError(line_no, column_of(line, "vm"), "vm '" + e.vm + "' already exists");
      alive.insert(e.vm);
    } else if (e.op == TraceOp::kDestroy || e.op == TraceOp::kTouch) {
      if (!alive.contains(e.vm)) {
        throw TraceError(line_no, column_of(line, "vm"),
                         std::string(trace_op_name(e.op)) + " of vm '" + e.vm + "' before its create");
      }
      if (e.op == TraceOp::kDestroy) alive.erase(e.vm);
    }
    out.events.push_back(std::move(e));
  }
  return out;
}

ParsedTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw VmemError(Errc::kNoEnt, "cannot read trace '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str());
}

}  // namespace vmem::sim
