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

#include "vmem/sim/config.hpp"

#include <fstream>
#include <sstream>

#include "vmem/error.hpp"

namespace vmem::sim {

namespace {

std::string normalize_key(std::string_view key) {
  std::string out(key);
  for (char& c : out) {
    if (c == '-') c = '_';
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_bool(std::string_view v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw VmemError(Errc::kInvalid, "bad boolean '" + std::string(v) + "'");
}

}  // namespace

ReservationPlan SimConfig::plan() const {
  return plan_reservation(host_total, host_os, nodes, slice, big_grain, fault_reserve);
}

void SimConfig::set(std::string_view raw_key, std::string_view value) {
  const std::string key = normalize_key(raw_key);
  if (key == "nodes") {
    nodes = static_cast<std::uint32_t>(parse_u64(value));
  } else if (key == "host_total") {
    host_total = parse_size(value);
  } else if (key == "host_os") {
    host_os = parse_size(value);
  } else if (key == "slice") {
    slice = parse_size(value);
  } else if (key == "big_grain") {
    big_grain = parse_size(value);
  } else if (key == "fault_reserve") {
    fault_reserve = parse_size(value);
  } else if (key == "upgrade_timeout_ms") {
    upgrade_timeout_ms = parse_u64(value);
  } else if (key == "fast_path") {
    fast_path = parse_bool(value);
  } else if (key == "bench_backing") {
    bench_backing = parse_bool(value);
  } else if (key == "seed") {
    seed = parse_u64(value);
  } else if (key == "va_base") {
    va_base = parse_u64(value);
  } else if (key == "pid_base") {
    pid_base = static_cast<Pid>(parse_u64(value));
  } else {
    throw VmemError(Errc::kInvalid, "unknown config key '" + std::string(raw_key) + "'");
  }
}

std::vector<std::pair<std::string, std::string>> SimConfig::items() const {
  return {
      {"nodes", std::to_string(nodes)},
      {"host_total", format_size(host_total)},
      {"host_os", format_size(host_os)},
      {"slice", format_size(slice)},
      {"big_grain", format_size(big_grain)},
      {"fault_reserve", format_size(fault_reserve)},
      {"upgrade_timeout_ms", std::to_string(upgrade_timeout_ms)},
      {"fast_path", fast_path ? "true" : "false"},
      {"bench_backing", bench_backing ? "true" : "false"},
      {"seed", std::to_string(seed)},
      {"va_base", to_hex(va_base)},
      {"pid_base", std::to_string(pid_base)},
  };
}

SimConfig parse_config(std::string_view text, SimConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw VmemError(Errc::kInvalid, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const VmemError& e) {
      throw VmemError(Errc::kInvalid, "config line " + std::to_string(line_no) + ": " + e.detail());
    }
  }
  return base;
}

SimConfig load_config(const std::string& path, SimConfig base) {
  std::ifstream in(path);
  if (!in) throw VmemError(Errc::kNoEnt, "cannot read config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), base);
}

nlohmann::json config_to_json(const SimConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, value] : config.items()) j[key] = value;
  return j;
}

SimConfig config_from_json(const nlohmann::json& j) {
  SimConfig config;
  for (const auto& [key, value] : j.items()) config.set(key, value.get<std::string>());
  return config;
}

}  // namespace vmem::sim
