#include "sissle/overlay/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sissle::overlay {

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::SimC: return "SimC";
        case Variant::SimRM: return "SimRM";
        case Variant::SimK: return "SimK";
    }
    return "?";
}

Variant parse_variant(std::string_view name) {
    if (name == "SimC" || name == "simc") return Variant::SimC;
    if (name == "SimRM" || name == "simrm") return Variant::SimRM;
    if (name == "SimK" || name == "simk") return Variant::SimK;
    throw ConfigError("unknown variant: " + std::string(name));
}

std::uint32_t OverlayParams::group_size() const {
    const std::uint32_t r = exact_sqrt(num_nodes);
    if (r == 0) throw ConfigError("num_nodes must be a perfect square, got " + std::to_string(num_nodes));
    return r;
}

void OverlayParams::validate(Variant v) const {
    if (num_nodes < 2) throw ConfigError("num_nodes must be at least 2");
    if (c < 1) throw ConfigError("c must be >= 1");
    if (b < 2) throw ConfigError("b must be > 1");
    if (d < 5) throw ConfigError("d must be >= 5");
    if (v == Variant::SimK) group_size();
    if (v == Variant::SimC) {
        if (outbound_links_to_node_ratio.den == 0) throw ConfigError("outbound ratio has zero denominator");
        if (outbound_links_to_node_ratio.value() * num_nodes < 1.0) {
            throw ConfigError("outbound_links_to_node_ratio * num_nodes must be >= 1");
        }
    }
    if (v == Variant::SimRM && simrm_outbound_links == 0) group_size();
}

AffinityGroupId affinity_group_of(NodeId node, const OverlayParams& params) {
    const std::uint32_t g = params.group_size();
    if (node >= params.num_nodes) throw ConfigError("node id out of range");
    return AffinityGroupId{node / g};
}

std::vector<NodeId> group_members(AffinityGroupId group, const OverlayParams& params) {
    const std::uint32_t g = params.group_size();
    std::vector<NodeId> out(g);
    for (std::uint32_t i = 0; i < g; ++i) out[i] = group.index * g + i;
    return out;
}

NodeSet UnlView::all() const {
    NodeSet out = unl_a;
    for (const auto& [_, members] : unl_b) out.insert(members.begin(), members.end());
    return out;
}

std::size_t UnlView::unl_b_size() const {
    std::size_t n = 0;
    for (const auto& [_, members] : unl_b) n += members.size();
    return n;
}

std::size_t UnlView::size() const { return unl_a.size() + unl_b_size(); }

bool UnlView::contains(NodeId n) const {
    if (unl_a.contains(n)) return true;
    for (const auto& [_, members] : unl_b) {
        if (members.contains(n)) return true;
    }
    return false;
}

NodeSet Nml::servers() const {
    NodeSet out = nml_a;
    for (const auto& [_, members] : nml_b) out.insert(members.begin(), members.end());
    return out;
}

NodeSet NodeLists::trust() const {
    NodeSet out = unl.all();
    out.insert(tnl.members.begin(), tnl.members.end());
    return out;
}

SimkOverlay build_simk_overlay(const OverlayParams& params, Rng& rng, const std::vector<bool>* present) {
    params.validate(Variant::SimK);
    const std::uint32_t n = params.num_nodes;
    const std::uint32_t groups = params.group_count();
    auto is_present = [&](NodeId id) { return present == nullptr || (*present)[id]; };

    std::vector<std::vector<NodeId>> live_by_group(groups);
    for (NodeId id = 0; id < n; ++id) {
        if (is_present(id)) live_by_group[id / groups].push_back(id);
    }

    SimkOverlay out;
    out.params = params;
    out.nodes.resize(n);

    for (NodeId self = 0; self < n; ++self) {
        if (!is_present(self)) continue;
        NodeLists& lists = out.nodes[self];
        const AffinityGroupId own = affinity_group_of(self, params);
        for (NodeId peer : live_by_group[own.index]) {
            if (peer != self) lists.unl.unl_a.insert(peer);
        }
        lists.nml.nml_a = lists.unl.unl_a;
        for (std::uint32_t g = 0; g < groups; ++g) {
            const auto& pool = live_by_group[g];
            if (!pool.empty()) lists.nml.nml_c.insert(pool.front());
            if (g == own.index) continue;
            const AffinityGroupId gid{g};
            lists.nml.nml_b[gid].insert(pool.begin(), pool.end());
            auto chosen = rng.sample(std::span<const NodeId>(pool), params.c);
            lists.unl.unl_b[gid].insert(chosen.begin(), chosen.end());
            if (chosen.size() < params.c) {
                out.shortfalls.push_back({self, gid, params.c, static_cast<std::uint32_t>(chosen.size())});
            }
        }
    }

    for (NodeId self = 0; self < n; ++self) {
        for (NodeId peer : out.nodes[self].unl.all()) out.nodes[peer].tnl.members.insert(self);
    }
    return out;
}

std::uint64_t Topology::connection_entries() const {
    std::uint64_t total = 0;
    for (const auto& adj : neighbors) total += adj.size();
    return total;
}

std::size_t Topology::neighbor_index(NodeId a, NodeId b) const {
    const auto& adj = neighbors[a];
    auto it = std::lower_bound(adj.begin(), adj.end(), b);
    if (it == adj.end() || *it != b) return npos;
    return static_cast<std::size_t>(it - adj.begin());
}

bool Topology::linked(NodeId a, NodeId b) const { return neighbor_index(a, b) != npos; }

namespace {

void finish_links(Topology& t) {
    const std::uint32_t g = exact_sqrt(t.params.num_nodes);
    t.link_class.assign(t.neighbors.size(), {});
    for (NodeId a = 0; a < t.neighbors.size(); ++a) {
        auto& adj = t.neighbors[a];
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
        t.link_class[a].reserve(adj.size());
        for (NodeId b : adj) {
            t.link_class[a].push_back(g != 0 && a / g == b / g ? LinkClass::IntraGroup : LinkClass::InterGroup);
        }
    }
    for (auto& u : t.unl) std::sort(u.begin(), u.end());
}

// Link construction: each node in turn opens `outbound` links to
// random peers it is not yet linked with, in either direction.
void add_random_links(Topology& t, std::uint32_t outbound, Rng& rng) {
    const std::uint32_t n = static_cast<std::uint32_t>(t.neighbors.size());
    std::vector<std::vector<bool>> linked(n, std::vector<bool>(n, false));
    for (NodeId a = 0; a < n; ++a) {
        std::uint32_t made = 0;
        std::uint32_t free_peers = 0;
        for (NodeId b = 0; b < n; ++b) free_peers += (b != a && !linked[a][b]) ? 1 : 0;
        while (made < outbound && free_peers > 0) {
            const NodeId b = static_cast<NodeId>(rng.index(n));
            if (b == a || linked[a][b]) continue;
            linked[a][b] = linked[b][a] = true;
            t.neighbors[a].push_back(b);
            t.neighbors[b].push_back(a);
            ++made;
            --free_peers;
        }
    }
}

void add_random_unls(Topology& t, std::uint32_t min_size, std::uint32_t max_size, Rng& rng) {
    const std::uint32_t n = static_cast<std::uint32_t>(t.neighbors.size());
    max_size = std::min(max_size, n - 1);
    min_size = std::min(min_size, max_size);
    std::vector<NodeId> others;
    others.reserve(n);
    for (NodeId a = 0; a < n; ++a) {
        const auto size = static_cast<std::size_t>(rng.uniform_int(min_size, max_size));
        others.clear();
        for (NodeId b = 0; b < n; ++b) {
            if (b != a) others.push_back(b);
        }
        t.unl[a] = rng.sample(std::span<const NodeId>(others), size);
    }
}

}  // namespace

Topology to_topology(const SimkOverlay& overlay) {
    Topology t;
    t.variant = Variant::SimK;
    t.params = overlay.params;
    const std::size_t n = overlay.nodes.size();
    t.unl.resize(n);
    t.neighbors.resize(n);
    for (NodeId a = 0; a < n; ++a) {
        const NodeSet unl = overlay.nodes[a].unl.all();
        t.unl[a].assign(unl.begin(), unl.end());
        const NodeSet trust = overlay.nodes[a].trust();
        t.neighbors[a].assign(trust.begin(), trust.end());
    }
    finish_links(t);
    return t;
}

Topology build_simc_topology(const OverlayParams& params, Rng& rng, UnlSizing sizing) {
    params.validate(Variant::SimC);
    Topology t;
    t.variant = Variant::SimC;
    t.params = params;
    t.unl.resize(params.num_nodes);
    t.neighbors.resize(params.num_nodes);
    const auto outbound = static_cast<std::uint32_t>(
        std::ceil(params.outbound_links_to_node_ratio.value() * params.num_nodes - 1e-9));
    add_random_unls(t, sizing.min, sizing.max, rng);
    add_random_links(t, outbound, rng);
    finish_links(t);
    return t;
}

double expected_simk_entries_per_node(const OverlayParams& params) {
    const double g = std::sqrt(static_cast<double>(params.num_nodes));
    const double c = params.c;
    return (g - 1.0) * (1.0 + 2.0 * c) - c * c * (g - 1.0) / g;
}

std::uint32_t simrm_outbound_links(const OverlayParams& params) {
    if (params.simrm_outbound_links != 0) return params.simrm_outbound_links;
    return static_cast<std::uint32_t>(std::ceil(expected_simk_entries_per_node(params) / 2.0));
}

std::uint32_t fault_bound(const OverlayParams& params) { return (params.c + 1) * (params.group_size() - 1); }

std::uint32_t simrm_unl_size(const OverlayParams& params) {
    if (params.simrm_unl_size != 0) return std::min(params.simrm_unl_size, params.num_nodes - 1);
    return std::min(fault_bound(params) + 1, params.num_nodes - 1);
}

Topology build_simrm_topology(const OverlayParams& params, Rng& rng) {
    params.validate(Variant::SimRM);
    Topology t;
    t.variant = Variant::SimRM;
    t.params = params;
    t.unl.resize(params.num_nodes);
    t.neighbors.resize(params.num_nodes);
    const std::uint32_t unl_size = simrm_unl_size(params);
    add_random_unls(t, unl_size, unl_size, rng);
    add_random_links(t, simrm_outbound_links(params), rng);
    finish_links(t);
    return t;
}

Topology build_simk_topology(const OverlayParams& params, Rng& rng) {
    params.validate(Variant::SimK);
    const std::uint32_t n = params.num_nodes;
    const std::uint32_t groups = params.group_count();
    std::vector<std::vector<NodeId>> pool(groups);
    for (NodeId id = 0; id < n; ++id) pool[id / groups].push_back(id);

    Topology t;
    t.variant = Variant::SimK;
    t.params = params;
    t.unl.resize(n);
    t.neighbors.resize(n);
    for (NodeId self = 0; self < n; ++self) {
        auto& unl = t.unl[self];
        const std::uint32_t own = self / groups;
        for (NodeId peer : pool[own]) {
            if (peer != self) unl.push_back(peer);
        }
        for (std::uint32_t g = 0; g < groups; ++g) {
            if (g == own) continue;
            auto chosen = rng.sample(std::span<const NodeId>(pool[g]), params.c);
            unl.insert(unl.end(), chosen.begin(), chosen.end());
        }
        for (NodeId peer : unl) {
            t.neighbors[self].push_back(peer);
            t.neighbors[peer].push_back(self);
        }
    }
    finish_links(t);
    return t;
}

Topology build_topology(Variant v, const OverlayParams& params, Rng& rng) {
    switch (v) {
        case Variant::SimC: return build_simc_topology(params, rng);
        case Variant::SimRM: return build_simrm_topology(params, rng);
        case Variant::SimK: return build_simk_topology(params, rng);
    }
    throw ConfigError("unknown variant");
}

}  // namespace sissle::overlay
