#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <string_view>
#include <vector>

#include "sissle/common/rng.hpp"
#include "sissle/common/types.hpp"

namespace sissle::overlay {

// The three systems compared by the simulator.
//   SimC  - random UNLs and a sparse random link graph (classic).
//   SimRM - random UNLs and links, sized just above SimK.
//   SimK  - affinity-group overlay; links are exactly the trust lists.
enum class Variant : std::uint8_t { SimC, SimRM, SimK };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

struct Ratio {
    std::uint32_t num = 10;
    std::uint32_t den = 256;
    double value() const { return static_cast<double>(num) / den; }
    friend bool operator==(const Ratio&, const Ratio&) = default;
};

struct OverlayParams {
    std::uint32_t num_nodes = 256;
    std::uint32_t c = 2;  // UNL-B slots per foreign affinity group
    std::uint32_t b = 2;  // NML-B holds at least c*b per foreign group
    std::uint32_t d = 5;  // retry limit
    Ratio outbound_links_to_node_ratio{10, 256};  // SimC only
    // SimRM sizing; 0 selects the automatic "slightly above SimK" sizing.
    std::uint32_t simrm_outbound_links = 0;
    std::uint32_t simrm_unl_size = 0;

    void validate(Variant v) const;
    // sqrt(N); throws ConfigError when N is not a perfect square.
    std::uint32_t group_size() const;
    std::uint32_t group_count() const { return group_size(); }

    friend bool operator==(const OverlayParams&, const OverlayParams&) = default;
};

struct AffinityGroupId {
    std::uint32_t index = 0;
    auto operator<=>(const AffinityGroupId&) const = default;
};

// group = floor(node / sqrt(N)); exactly sqrt(N) members per group.
AffinityGroupId affinity_group_of(NodeId node, const OverlayParams& params);
std::vector<NodeId> group_members(AffinityGroupId group, const OverlayParams& params);

using NodeSet = std::set<NodeId>;

struct UnlView {
    NodeSet unl_a;
    std::map<AffinityGroupId, NodeSet> unl_b;

    NodeSet all() const;
    std::size_t size() const;
    std::size_t unl_b_size() const;
    bool contains(NodeId n) const;
};

struct Tnl {
    NodeSet members;
};

struct Nml {
    NodeSet nml_a;
    std::map<AffinityGroupId, NodeSet> nml_b;
    NodeSet nml_c;  // introducers

    NodeSet servers() const;  // nml_a u nml_b
};

struct NodeLists {
    UnlView unl;
    Tnl tnl;
    Nml nml;

    NodeSet trust() const;  // UNL u TNL
};

struct Shortfall {
    NodeId node;
    AffinityGroupId group;
    std::uint32_t wanted;
    std::uint32_t got;
};

struct SimkOverlay {
    OverlayParams params;
    std::vector<NodeLists> nodes;
    std::vector<Shortfall> shortfalls;
};

// `present` (optional, size N) marks which nodes exist; absent nodes get empty
// lists and are never selected. Groups with fewer than c present members are
// taken whole and recorded as a shortfall.
SimkOverlay build_simk_overlay(const OverlayParams& params, Rng& rng, const std::vector<bool>* present = nullptr);

enum class LinkClass : std::uint8_t { IntraGroup, InterGroup };

// Variant-independent view used by the network simulator: who a node trusts
// for voting (unl) and who it is connected to for message passing
// (neighbors, undirected). For SimK neighbors == UNL u TNL.
struct Topology {
    Variant variant = Variant::SimK;
    OverlayParams params;
    std::vector<std::vector<NodeId>> unl;
    std::vector<std::vector<NodeId>> neighbors;
    std::vector<std::vector<LinkClass>> link_class;  // parallel to neighbors

    std::size_t num_nodes() const { return neighbors.size(); }
    // Sum over nodes of connection entries (a link is counted at both ends).
    std::uint64_t connection_entries() const;
    bool linked(NodeId a, NodeId b) const;
    // Position of b in neighbors[a], or npos.
    std::size_t neighbor_index(NodeId a, NodeId b) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

Topology to_topology(const SimkOverlay& overlay);

// Classic UNL size range, clamped to N-1.
struct UnlSizing {
    std::uint32_t min = 20;
    std::uint32_t max = 30;
};

Topology build_simc_topology(const OverlayParams& params, Rng& rng, UnlSizing sizing = {});
Topology build_simrm_topology(const OverlayParams& params, Rng& rng);
// Same draws and result as to_topology(build_simk_overlay(...)) for a full
// network, without materialising the NMLs.
Topology build_simk_topology(const OverlayParams& params, Rng& rng);
Topology build_topology(Variant v, const OverlayParams& params, Rng& rng);

// Expected SimK connection entries per node for a full overlay:
// (sqrt(N)-1)(1+2c) minus the expected UNL-B/TNL-B overlap c^2 (sqrt(N)-1)/sqrt(N).
double expected_simk_entries_per_node(const OverlayParams& params);
std::uint32_t simrm_outbound_links(const OverlayParams& params);
std::uint32_t simrm_unl_size(const OverlayParams& params);

// Fault bound of the three hop argument: (c+1)(sqrt(N)-1).
std::uint32_t fault_bound(const OverlayParams& params);

}  // namespace sissle::overlay
