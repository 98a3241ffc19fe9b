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

#include "vmem/slice_state.hpp"

#include <string>

#include "vmem/error.hpp"

namespace vmem {

std::string_view slice_state_name(SliceState state) {
  switch (state) {
    case SliceState::kFree: return "free";
    case SliceState::kUsed: return "used";
    case SliceState::kHole: return "hole";
    case SliceState::kError: return "error";
    case SliceState::kMce: return "mce";
    case SliceState::kMceUsed: return "mce_used";
    case SliceState::kBorrow: return "borrow";
  }
  return "invalid";
}

bool is_legal_transition(SliceState from, SliceState to) {
  using S = SliceState;
  switch (from) {
    case S::kFree:
      return to == S::kUsed || to == S::kBorrow || to == S::kMce || to == S::kHole;
    case S::kUsed:
      return to == S::kFree || to == S::kMceUsed || to == S::kError;
    case S::kBorrow:
      return to == S::kFree;
    case S::kMceUsed:
      return to == S::kMce;
    case S::kHole:
    case S::kError:
    case S::kMce:
      return false;
  }
  return false;
}

SliceArray::SliceArray(NodeId node_id, std::size_t slice_count)
    : node_id_(node_id), states_(slice_count, SliceState::kFree) {
  histogram_at(histogram_, SliceState::kFree) = slice_count;
}

SliceState SliceArray::at(SliceIndex index) const {
  if (index >= states_.size()) {
    throw VmemError(Errc::kNoEnt, "slice " + std::to_string(index) + " out of range on node " +
                                      std::to_string(node_id_));
  }
  return states_[index];
}

void SliceArray::transition(SliceIndex index, SliceState from, SliceState to) {
  const SliceState current = at(index);
  if (current != from) {
    throw VmemError(Errc::kStateMismatch,
                    "slice " + std::to_string(index) + " is " + std::string(slice_state_name(current)) +
                        ", expected " + std::string(slice_state_name(from)));
  }
  if (!is_legal_transition(from, to)) {
    throw VmemError(Errc::kIllegalTransition, std::string(slice_state_name(from)) + " -> " +
                                                  std::string(slice_state_name(to)));
  }
  states_[index] = to;
  --histogram_at(histogram_, from);
  ++histogram_at(histogram_, to);
}

SliceHistogram recount(std::span<const SliceState> states) {
  SliceHistogram h{};
  for (SliceState s : states) ++histogram_at(h, s);
  return h;
}

}  // namespace vmem
