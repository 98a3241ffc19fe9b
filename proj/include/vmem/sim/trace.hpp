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

#ifndef VMEM_SIM_TRACE_HPP
#define VMEM_SIM_TRACE_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vmem/allocator.hpp"
#include "vmem/error.hpp"

namespace vmem::sim {

enum class TraceOp : std::uint8_t { kCreate, kDestroy, kInjectMce, kBorrow, kReclaim, kUpgrade, kTouch };
std::string_view trace_op_name(TraceOp op);

/// One line of a trace. Fields an op does not use stay at their defaults;
/// op-specific fields (node, slice, token, to, offset, length, ...) live
/// in `extras`.
struct TraceEvent {
  std::uint64_t seq = 0;
  TraceOp op = TraceOp::kCreate;
  std::string vm;
  Bytes size = 0;
  PageSize psize = PageSize::kMix;
  NodePolicy numa = NodePolicy::balanced();
  bool on_demand = false;
  std::optional<Errc> expect_error;
  nlohmann::json extras = nlohmann::json::object();
};

/// Malformed trace input. `line` and `column` are 1-based; column 0 means
/// the whole line.
class TraceError : public std::runtime_error {
 public:
  TraceError(std::size_t line, std::size_t column, const std::string& message);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct ParsedTrace {
  std::vector<TraceEvent> events;
  std::vector<std::string> warnings;  // unknown fields, one per occurrence
};

/// Parses line-delimited JSON. Blank lines and lines starting with '#'
/// are skipped. Checks that seq increases and that no vm is destroyed or
/// touched before it is created.
ParsedTrace parse_trace(std::string_view text);
ParsedTrace load_trace(const std::string& path);

/// Parses a single event object. `line` and `raw_line` (the source text,
/// if any) locate errors.
TraceEvent event_from_json(const nlohmann::json& j, std::size_t line, std::vector<std::string>* warnings,
                           std::string_view raw_line = {});
nlohmann::json event_to_json(const TraceEvent& event);

/// "node:K" or "balanced".
NodePolicy parse_numa(std::string_view text);
std::string numa_name(const NodePolicy& policy);

}  // namespace vmem::sim

#endif  // VMEM_SIM_TRACE_HPP
