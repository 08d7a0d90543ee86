#include <algorithm>
#include <numeric>

#include "sissle/kernels/node_bitset.hpp"
#include "sissle/netsim/netsim.hpp"

namespace sissle::netsim {

LinkModel build_link_model(const overlay::Topology& topology, const ScenarioConfig& config, Rng& rng) {
    const SimTime lo = from_ms(config.min_latency_ms);
    const SimTime hi = from_ms(config.max_latency_ms);
    LinkModel m;
    const std::size_t n = topology.num_nodes();
    m.base.resize(n);
    m.ni_factor.resize(n);
    for (NodeId a = 0; a < n; ++a) {
        const auto& nbrs = topology.neighbors[a];
        m.base[a].resize(nbrs.size());
        m.ni_factor[a].assign(nbrs.size(), 1.0);
        for (std::size_t i = 0; i < nbrs.size(); ++i) {
            const auto raw = static_cast<double>(
                rng.uniform_int(static_cast<std::uint64_t>(lo), static_cast<std::uint64_t>(hi)));
            const double llf = topology.link_class[a][i] == overlay::LinkClass::IntraGroup ? config.unla_llf_max
                                                                                           : config.unlb_llf_max;
            m.base[a][i] = static_cast<SimTime>(std::llround(raw * llf));
        }
    }
    return m;
}

void apply_network_issues(LinkModel& links, const ScenarioConfig& config, Rng& rng) {
    if (!config.ni_enabled()) return;
    const auto n = static_cast<std::uint32_t>(links.base.size());
    std::vector<NodeId> all(n);
    std::iota(all.begin(), all.end(), NodeId{0});
    const auto nodes = rng.sample(std::span<const NodeId>(all), percent_of(config.percent_nodes_ni, n));
    for (NodeId a : nodes) {
        const auto deg = static_cast<std::uint32_t>(links.base[a].size());
        std::vector<std::uint32_t> idx(deg);
        std::iota(idx.begin(), idx.end(), 0U);
        for (std::uint32_t i : rng.sample(std::span<const std::uint32_t>(idx), percent_of(config.percent_links_ni, deg))) {
            links.ni_factor[a][i] = config.min_latency_factor_ni == config.max_latency_factor_ni
                                        ? config.min_latency_factor_ni
                                        : rng.uniform_real(config.min_latency_factor_ni, config.max_latency_factor_ni);
        }
    }
}

std::uint32_t Placement::malicious_count() const {
    return static_cast<std::uint32_t>(std::count(malicious.begin(), malicious.end(), true));
}

Placement place_malicious(const ScenarioConfig& config, const overlay::Topology& topology, Rng& rng) {
    const auto n = static_cast<std::uint32_t>(topology.num_nodes());
    Placement p;
    p.malicious.assign(n, false);
    std::vector<bool> reserved(n, false);

    if (config.has_target()) {
        p.target = static_cast<std::int64_t>(rng.index(n));
        reserved[p.target] = true;
    }

    if (config.eclipse_mode() && config.percentage_eclipsed > 0.0) {
        const auto& pool = config.mode == 8 ? topology.neighbors[p.target] : topology.unl[p.target];
        const auto size = static_cast<std::uint32_t>(pool.size());
        p.eclipse_requested = percent_of_ceil(config.percentage_eclipsed, size);
        const std::uint32_t count = std::min(p.eclipse_requested, size == 0 ? 0 : size - 1);
        auto order = rng.sample(std::span<const NodeId>(pool), size);
        p.eclipsers.assign(order.begin(), order.begin() + count);
        // The clamp leaves exactly one genuine neighbour; keep it genuine.
        if (count < p.eclipse_requested) reserved[order[count]] = true;
    }

    std::uint32_t limit = n;
    if (config.mode == 8 && config.is_upper_limit_malicious_applicable) limit = config.upper_limit() - 1;
    if (p.eclipsers.size() > limit) p.eclipsers.resize(limit);
    for (NodeId e : p.eclipsers) {
        p.malicious[e] = true;
        reserved[e] = true;
    }

    std::vector<NodeId> pool;
    for (NodeId i = 0; i < n; ++i) {
        if (!reserved[i]) pool.push_back(i);
    }
    std::uint32_t count = percent_of(config.percentage_malicious, n);
    count = std::min<std::uint32_t>(count, limit - static_cast<std::uint32_t>(p.eclipsers.size()));
    if (!pool.empty()) count = std::min<std::uint32_t>(count, static_cast<std::uint32_t>(pool.size()) - 1);
    p.random_malicious = rng.sample(std::span<const NodeId>(pool), count);
    for (NodeId m : p.random_malicious) p.malicious[m] = true;

    std::vector<NodeId> sources;
    for (NodeId i = 0; i < n; ++i) {
        if (!p.malicious[i] && static_cast<std::int64_t>(i) != p.target) sources.push_back(i);
    }
    if (sources.empty()) throw ConfigError("no genuine node left to act as source");
    p.source = sources[rng.index(sources.size())];
    return p;
}

std::vector<std::int32_t> shortest_distances(const std::vector<std::vector<NodeId>>& adjacency,
                                             const std::vector<bool>& removed, NodeId source) {
    const std::size_t n = adjacency.size();
    std::vector<std::int32_t> dist(n, kUnreachable);
    std::vector<NodeBitset> rows(n, NodeBitset(n));
    for (NodeId a = 0; a < n; ++a) {
        for (NodeId b : adjacency[a]) rows[a].set(b);
    }
    NodeBitset closed(n);  // visited or removed
    for (NodeId a = 0; a < n; ++a) {
        if (removed[a]) closed.set(a);
    }
    NodeBitset frontier(n), reach(n), next(n);
    frontier.set(source);
    closed.set(source);
    dist[source] = 0;
    for (std::int32_t d = 1; frontier.any(); ++d) {
        reach.clear();
        frontier.for_each([&](NodeId u) { reach |= rows[u]; });
        next.assign_and_not(reach, closed);
        next.for_each([&](NodeId v) { dist[v] = d; });
        closed |= next;
        std::swap(frontier, next);
    }
    return dist;
}

double effective_ncp(double ncp, std::uint32_t genuine, std::uint32_t num_nodes) {
    const double genuine_pct = 100.0 * genuine / num_nodes;
    return std::min(ncp, genuine_pct);
}

std::uint32_t required_nodes(double ncp, std::uint32_t genuine, std::uint32_t num_nodes) {
    return std::min(genuine, percent_of(effective_ncp(ncp, genuine, num_nodes), num_nodes));
}

SuccessOutcome success_predicate(std::uint32_t mode, double ncp, const SuccessInput& in) {
    SuccessOutcome out;
    out.effective_ncp = effective_ncp(ncp, in.genuine, in.num_nodes);
    out.required = required_nodes(ncp, in.genuine, in.num_nodes);
    switch (mode) {
        case 1:
        case 2: out.success = in.reached >= out.required; break;
        case 3:
        case 5: out.success = in.reached >= out.required && in.target_reached; break;
        case 4:
        case 6: out.success = in.target_reached; break;
        case 8:
            out.success = in.all_genuine_received;
            out.success2 = out.success && in.max_distance != kUnreachable && in.max_distance <= 3;
            break;
        default: throw ConfigError("mode must be one of 1-6 or 8");
    }
    return out;
}

}  // namespace sissle::netsim
