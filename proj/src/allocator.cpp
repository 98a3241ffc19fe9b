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

#include "vmem/allocator.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "vmem/error.hpp"

namespace vmem {

std::string_view page_size_name(PageSize p) {
  switch (p) {
    case PageSize::kBig: return "big";
    case PageSize::kSmall: return "small";
    case PageSize::kMix: return "mix";
  }
  return "?";
}

PageSize parse_page_size(std::string_view text) {
  if (text == "big" || text == "1g" || text == "1G") return PageSize::kBig;
  if (text == "small" || text == "2m" || text == "2M") return PageSize::kSmall;
  if (text == "mix") return PageSize::kMix;
  throw VmemError(Errc::kInvalid, "unknown psize '" + std::string(text) + "'");
}

std::string_view grain_name(Grain g) { return g == Grain::kBig ? "big" : "small"; }

std::vector<NodeId> AllocGrant::nodes() const {
  std::vector<NodeId> out;
  for (const Extent& e : extents) {
    if (out.empty() || out.back() != e.node) out.push_back(e.node);
  }
  return out;
}

namespace {

struct NodePlacement {
  NodeId node = 0;
  std::vector<SliceRun> big;
  std::vector<SliceRun> small;
};

std::uint64_t run_slices(const std::vector<SliceRun>& runs) {
  return std::accumulate(runs.begin(), runs.end(), std::uint64_t{0},
                         [](std::uint64_t acc, const SliceRun& r) { return acc + r.count; });
}

std::uint64_t used_slices(const SliceArray& slices) {
  return slices.count(SliceState::kUsed) + slices.count(SliceState::kMceUsed);
}

NodePlacement place_on_node(const MemoryTopology& topo, NodeId node, Bytes bytes, PageSize psize) {
  const SliceArray& slices = topo.slices(node);
  const std::uint64_t per_block = topo.slices_per_block();
  const std::uint64_t need = bytes / topo.slice_bytes();
  const std::uint64_t free = slices.count(SliceState::kFree);
  const std::string where = " on node " + std::to_string(node);

  if (free < need) {
    throw VmemError(Errc::kNoSpace, "need " + std::to_string(need) + " slices, " + std::to_string(free) +
                                        " free" + where);
  }

  NodePlacement out;
  out.node = node;
  switch (psize) {
    case PageSize::kBig: {
      const std::uint64_t blocks = bytes / topo.big_grain_bytes();
      out.big = pick_big_blocks(slices, per_block, blocks);
      if (run_slices(out.big) != need) {
        throw VmemError(Errc::kFragBig, std::to_string(run_slices(out.big) / per_block) + " of " +
                                            std::to_string(blocks) + " aligned big blocks available" +
                                            where);
      }
      break;
    }
    case PageSize::kSmall: {
      out.small = *pick_small_slices(slices, per_block, need);
      break;
    }
    case PageSize::kMix: {
      out.big = pick_big_blocks(slices, per_block, bytes / topo.big_grain_bytes());
      const std::uint64_t rest = need - run_slices(out.big);
      if (rest > 0) {
        // Place the small portion as if the big blocks were already taken.
        SliceArray scratch = slices;
        for (const SliceRun& r : out.big) {
          for (SliceIndex s = r.start; s < r.end(); ++s) scratch.transition(s, SliceState::kFree, SliceState::kUsed);
        }
        out.small = *pick_small_slices(scratch, per_block, rest);
      }
      break;
    }
  }
  return out;
}

}  // namespace

std::vector<std::pair<NodeId, Bytes>> Allocator::node_shares(const AllocRequest& request) const {
  const MemoryTopology& topo = *topology_;
  if (!request.policy.is_balanced()) {
    topo.node(request.policy.node);  // validates the id
    return {{request.policy.node, request.size}};
  }
  const Bytes unit = request.psize == PageSize::kBig ? topo.big_grain_bytes() : topo.slice_bytes();
  const std::uint32_t n = topo.node_count();
  const std::uint64_t units = request.size / unit;
  std::vector<std::pair<NodeId, Bytes>> shares;
  for (NodeId id = 0; id < n; ++id) shares.emplace_back(id, (units / n) * unit);

  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    return used_slices(topo.slices(a)) < used_slices(topo.slices(b));
  });
  for (std::uint64_t i = 0; i < units % n; ++i) shares[order[i]].second += unit;

  std::erase_if(shares, [](const auto& s) { return s.second == 0; });
  return shares;
}

const AllocGrant& Allocator::alloc(const AllocRequest& request) {
  MemoryTopology& topo = *topology_;
  if (request.size == 0 || !is_aligned(request.size, topo.slice_bytes())) {
    throw VmemError(Errc::kAlign, "request size " + std::to_string(request.size) + " is not slice-aligned");
  }
  if (request.psize == PageSize::kBig && !is_aligned(request.size, topo.big_grain_bytes())) {
    throw VmemError(Errc::kAlign, "big-grain request size " + format_size(request.size) +
                                      " is not big-grain aligned");
  }

  // Plan every node before touching any slice.
  std::vector<NodePlacement> placements;
  for (const auto& [node, bytes] : node_shares(request)) {
    placements.push_back(place_on_node(topo, node, bytes, request.psize));
  }

  AllocGrant grant;
  grant.grant_id = next_grant_id_++;
  grant.on_demand = request.on_demand;
  for (const NodePlacement& p : placements) {
    SliceArray& slices = topo.mutable_slices(p.node);
    auto commit = [&](const std::vector<SliceRun>& runs, Grain grain) {
      for (const SliceRun& r : runs) {
        for (SliceIndex s = r.start; s < r.end(); ++s) slices.transition(s, SliceState::kFree, SliceState::kUsed);
        grant.extents.push_back({p.node, r.start, r.count, grain});
        const Bytes bytes = r.count * topo.slice_bytes();
        grant.total_bytes += bytes;
        (grain == Grain::kBig ? grant.split.size_1g : grant.split.size_2m) += bytes;
      }
    };
    commit(p.big, Grain::kBig);
    commit(p.small, Grain::kSmall);
  }
  auto [it, inserted] = grants_.emplace(grant.grant_id, std::move(grant));
  return it->second;
}

void Allocator::free(std::uint64_t grant_id) {
  auto it = grants_.find(grant_id);
  if (it == grants_.end()) throw VmemError(Errc::kNoEnt, "grant " + std::to_string(grant_id) + " is not live");
  for (const Extent& e : it->second.extents) {
    SliceArray& slices = topology_->mutable_slices(e.node);
    for (SliceIndex s = e.start_slice; s < e.start_slice + e.n_slices; ++s) {
      switch (slices[s]) {
        case SliceState::kUsed: slices.transition(s, SliceState::kUsed, SliceState::kFree); break;
        case SliceState::kMceUsed: slices.transition(s, SliceState::kMceUsed, SliceState::kMce); break;
        default: break;  // Error stays quarantined
      }
    }
  }
  grants_.erase(it);
}

const AllocGrant& Allocator::grant(std::uint64_t grant_id) const {
  auto it = grants_.find(grant_id);
  if (it == grants_.end()) throw VmemError(Errc::kNoEnt, "grant " + std::to_string(grant_id) + " is not live");
  return it->second;
}

AllocGrant& Allocator::mutable_grant(std::uint64_t grant_id) {
  auto it = grants_.find(grant_id);
  if (it == grants_.end()) throw VmemError(Errc::kNoEnt, "grant " + std::to_string(grant_id) + " is not live");
  return it->second;
}

FragReport Allocator::frag_report(NodeId node) const {
  const SliceArray& slices = topology_->slices(node);
  const BlockView view(slices, topology_->slices_per_block());
  FragReport report;
  for (std::uint64_t b = 0; b < view.block_count(); ++b) {
    if (view.big_capable(b)) ++report.free_big_blocks;
    if (view.fragmented(b)) ++report.fragmented_big_blocks;
  }
  std::uint64_t run = 0;
  for (SliceState s : slices.states()) {
    run = s == SliceState::kFree ? run + 1 : 0;
    report.largest_free_run_slices = std::max(report.largest_free_run_slices, run);
  }
  return report;
}

}  // namespace vmem
