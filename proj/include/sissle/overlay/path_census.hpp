#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sissle/overlay/overlay.hpp"

namespace sissle::overlay {

struct PathCensus {
    std::uint32_t hops = 1;
    std::uint64_t same_group_count = 0;
    std::uint64_t cross_group_count = 0;
};

// Deterministic lower bounds on the number of distinct routes of exactly
// `hops` hops between two nodes of a full SimK overlay. Only routes that exist
// with probability one are counted.
//
//   hops 1: the direct trust edge.
//   hops 2: same group  X-A-Y over the sqrt(N)-2 other group members;
//           cross group X-B-Y through Y's c UNL-B picks in X's group and X's
//           c picks in Y's group.
//   hops 3: same group  c^2 (sqrt(N)-1) + c (c-1);
//           cross group c (sqrt(N)-2) + c (sqrt(N)-1) + 2 c^2 (sqrt(N)-2).
// The same-group rows hold for every pair. The cross-group rows assume the
// direct edge exists and the UNL-B picks on both sides are distinct, so a
// particular pair can fall short of them.
PathCensus path_census(const OverlayParams& params, std::uint32_t hops);
std::uint64_t path_census(const OverlayParams& params, std::uint32_t hops, bool same_group);

// Per-node base latency in ms, parallel to Topology::neighbors.
using LinkLatencies = std::vector<std::vector<double>>;

// One `src dst latency_ms` line per directed link.
void write_edge_list(std::ostream& out, const Topology& topology, const LinkLatencies& latency_ms);
// JSON summary of per-node list sizes.
std::string topology_summary_json(const Topology& topology, const SimkOverlay* overlay = nullptr);

}  // namespace sissle::overlay
