#include "sissle/overlay/path_census.hpp"

#include <json.hpp>
#include <ostream>

namespace sissle::overlay {

PathCensus path_census(const OverlayParams& params, std::uint32_t hops) {
    if (hops < 1 || hops > 3) throw ConfigError("path census covers 1 to 3 hops");
    const std::uint64_t g = params.group_size();
    const std::uint64_t c = params.c;
    PathCensus out;
    out.hops = hops;
    switch (hops) {
        case 1:
            out.same_group_count = 1;
            out.cross_group_count = 1;
            break;
        case 2:
            out.same_group_count = g >= 2 ? g - 2 : 0;
            out.cross_group_count = 2 * c;
            break;
        default:
            out.same_group_count = c * c * (g - 1) + c * (c - 1);
            out.cross_group_count = g >= 2 ? c * (g - 2) + c * (g - 1) + 2 * c * c * (g - 2) : 0;
            break;
    }
    return out;
}

std::uint64_t path_census(const OverlayParams& params, std::uint32_t hops, bool same_group) {
    const PathCensus p = path_census(params, hops);
    return same_group ? p.same_group_count : p.cross_group_count;
}

void write_edge_list(std::ostream& out, const Topology& topology, const LinkLatencies& latency_ms) {
    for (NodeId a = 0; a < topology.num_nodes(); ++a) {
        const auto& adj = topology.neighbors[a];
        for (std::size_t i = 0; i < adj.size(); ++i) {
            const double lat = a < latency_ms.size() && i < latency_ms[a].size() ? latency_ms[a][i] : 0.0;
            out << a << ' ' << adj[i] << ' ' << lat << '\n';
        }
    }
}

std::string topology_summary_json(const Topology& topology, const SimkOverlay* overlay) {
    nlohmann::json j;
    j["variant"] = std::string(to_string(topology.variant));
    j["num_nodes"] = topology.num_nodes();
    j["connection_entries"] = topology.connection_entries();
    auto& nodes = j["nodes"] = nlohmann::json::array();
    for (NodeId a = 0; a < topology.num_nodes(); ++a) {
        nlohmann::json n{{"id", a}, {"unl", topology.unl[a].size()}, {"links", topology.neighbors[a].size()}};
        if (overlay != nullptr && a < overlay->nodes.size()) {
            const NodeLists& l = overlay->nodes[a];
            n["unl_a"] = l.unl.unl_a.size();
            n["unl_b"] = l.unl.unl_b_size();
            n["tnl"] = l.tnl.members.size();
            n["nml"] = l.nml.servers().size();
            n["nml_c"] = l.nml.nml_c.size();
        }
        nodes.push_back(std::move(n));
    }
    return j.dump();
}

}  // namespace sissle::overlay
