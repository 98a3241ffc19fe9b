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

#ifndef VMEM_SLICE_STATE_HPP
#define VMEM_SLICE_STATE_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "vmem/units.hpp"

namespace vmem {

// One byte per slice. Values are stable: they appear in state snapshots.
enum class SliceState : std::uint8_t {
  kFree = 0,
  kUsed = 1,
  kHole = 2,     // never allocatable (fault reserve, firmware gaps)
  kError = 3,    // permanent non-MCE fault
  kMce = 4,      // quarantined after a machine check
  kMceUsed = 5,  // machine check hit an allocated slice; drops to kMce on free
  kBorrow = 6,   // lent to the host OS
};

static_assert(sizeof(SliceState) == 1);

inline constexpr std::size_t kSliceStateCount = 7;

std::string_view slice_state_name(SliceState state);

/// Legal edges of the slice state machine:
///   Free    -> Used | Borrow | Mce | Hole
///   Used    -> Free | MceUsed | Error
///   Borrow  -> Free
///   MceUsed -> Mce
/// Hole, Error and Mce are terminal.
bool is_legal_transition(SliceState from, SliceState to);

using SliceHistogram = std::array<std::uint64_t, kSliceStateCount>;

inline std::uint64_t& histogram_at(SliceHistogram& h, SliceState s) {
  return h[static_cast<std::size_t>(s)];
}
inline std::uint64_t histogram_at(const SliceHistogram& h, SliceState s) {
  return h[static_cast<std::size_t>(s)];
}

/// Dense per-node slice state array. Length is fixed at construction.
///
/// Keeps a running histogram so conservation checks and free-count queries
/// are O(1); the histogram is always equal to a recount of `states()`.
class SliceArray {
 public:
  SliceArray() = default;
  SliceArray(NodeId node_id, std::size_t slice_count);

  NodeId node_id() const { return node_id_; }
  std::size_t size() const { return states_.size(); }

  SliceState operator[](SliceIndex index) const { return states_[index]; }
  SliceState at(SliceIndex index) const;

  /// Compare-and-set. Throws kNoEnt for an out-of-range index,
  /// kStateMismatch if the slice is not in `from`, kIllegalTransition if
  /// the edge is not in the state machine.
  void transition(SliceIndex index, SliceState from, SliceState to);

  const SliceHistogram& histogram() const { return histogram_; }
  std::uint64_t count(SliceState state) const { return histogram_at(histogram_, state); }

  std::span<const SliceState> states() const { return states_; }

  /// Raw byte view; its size equals the slice count.
  std::span<const std::byte> bytes() const { return std::as_bytes(std::span(states_)); }

  friend bool operator==(const SliceArray&, const SliceArray&) = default;

 private:
  NodeId node_id_ = 0;
  std::vector<SliceState> states_;
  SliceHistogram histogram_{};
};

SliceHistogram recount(std::span<const SliceState> states);

}  // namespace vmem

#endif  // VMEM_SLICE_STATE_HPP
