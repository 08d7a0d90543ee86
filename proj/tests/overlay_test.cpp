#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "sissle/overlay/overlay.hpp"
#include "sissle/overlay/path_census.hpp"

using namespace sissle;
using namespace sissle::overlay;

namespace {

OverlayParams params(std::uint32_t n, std::uint32_t c = 2) {
    OverlayParams p;
    p.num_nodes = n;
    p.c = c;
    return p;
}

// Counts simple paths of exactly `hops` edges from a to b by exhaustive DFS.
std::uint64_t count_paths(const Topology& t, NodeId a, NodeId b, std::uint32_t hops) {
    std::vector<bool> on_path(t.num_nodes(), false);
    std::uint64_t found = 0;
    auto dfs = [&](auto&& self, NodeId at, std::uint32_t left) -> void {
        if (left == 0) {
            found += at == b ? 1 : 0;
            return;
        }
        on_path[at] = true;
        for (NodeId next : t.neighbors[at]) {
            if (on_path[next]) continue;
            if (next == b && left != 1) continue;
            self(self, next, left - 1);
        }
        on_path[at] = false;
    };
    dfs(dfs, a, hops);
    return found;
}

void expect_reciprocal(const SimkOverlay& o) {
    const auto n = static_cast<NodeId>(o.nodes.size());
    for (NodeId x = 0; x < n; ++x) {
        for (NodeId y = 0; y < n; ++y) {
            EXPECT_EQ(o.nodes[y].unl.contains(x), o.nodes[x].tnl.members.contains(y)) << x << " " << y;
        }
    }
}

}  // namespace

TEST(AffinityGroup, Examples) {
    EXPECT_EQ(affinity_group_of(17, params(256)).index, 1u);
    EXPECT_EQ(affinity_group_of(0, params(256)).index, 0u);
    std::map<std::uint32_t, int> histogram;
    for (NodeId n = 0; n < 256; ++n) ++histogram[affinity_group_of(n, params(256)).index];
    EXPECT_EQ(histogram.size(), 16u);
    for (auto [g, count] : histogram) EXPECT_EQ(count, 16) << g;
}

TEST(AffinityGroup, NonSquareRejected) {
    EXPECT_THROW(affinity_group_of(3, params(250)), ConfigError);
    Rng rng(1);
    EXPECT_THROW(build_simk_overlay(params(250), rng), ConfigError);
}

TEST(OverlayParams, Validation) {
    OverlayParams p = params(256);
    p.b = 1;
    EXPECT_THROW(p.validate(Variant::SimK), ConfigError);
    p = params(256);
    p.d = 4;
    EXPECT_THROW(p.validate(Variant::SimK), ConfigError);
    p = params(256);
    p.outbound_links_to_node_ratio = {1, 512};
    EXPECT_THROW(p.validate(Variant::SimC), ConfigError);
}

TEST(SimkOverlay, SizeLawAt256) {
    Rng rng(42);
    const SimkOverlay o = build_simk_overlay(params(256), rng);
    EXPECT_TRUE(o.shortfalls.empty());
    for (NodeId x = 0; x < 256; ++x) {
        const NodeLists& l = o.nodes[x];
        EXPECT_EQ(l.unl.unl_a.size(), 15u);
        EXPECT_EQ(l.unl.unl_b_size(), 30u);
        EXPECT_EQ(l.unl.size(), 45u);
        EXPECT_EQ(l.unl.unl_b.size(), 15u);
        EXPECT_FALSE(l.unl.contains(x));
        EXPECT_EQ(l.nml.nml_a, l.unl.unl_a);
        const NodeSet servers = l.nml.servers();
        for (NodeId u : l.unl.all()) EXPECT_TRUE(servers.contains(u));
        for (const auto& [g, members] : l.nml.nml_b) EXPECT_GE(members.size(), o.params.c * o.params.b) << g.index;
    }
    expect_reciprocal(o);
}

TEST(SimkOverlay, ExhaustiveReciprocitySmall) {
    for (std::uint32_t n : {4u, 16u}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(seed);
            const SimkOverlay o = build_simk_overlay(params(n, 1), rng);
            expect_reciprocal(o);
            const std::uint32_t g = exact_sqrt(n);
            for (const NodeLists& l : o.nodes) {
                EXPECT_EQ(l.unl.unl_a.size(), g - 1);
                EXPECT_EQ(l.unl.unl_b_size(), g - 1);
            }
        }
    }
}

TEST(SimkOverlay, UndersizedGroupsRecordShortfall) {
    std::vector<bool> present(16, true);
    present[4] = present[5] = present[6] = false;  // group 1 keeps only node 7
    Rng rng(3);
    const SimkOverlay o = build_simk_overlay(params(16, 2), rng, &present);
    EXPECT_FALSE(o.shortfalls.empty());
    for (const Shortfall& s : o.shortfalls) {
        EXPECT_EQ(s.group.index, 1u);
        EXPECT_EQ(s.got, 1u);
        EXPECT_EQ(o.nodes[s.node].unl.unl_b.at(AffinityGroupId{1}), NodeSet{7});
    }
    EXPECT_TRUE(o.nodes[4].unl.all().empty());
    expect_reciprocal(o);
}

TEST(SimkOverlay, ConnectionEntriesNear18240) {
    double total = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        total += static_cast<double>(to_topology(build_simk_overlay(params(256), rng)).connection_entries());
    }
    const double mean = total / 100;
    EXPECT_NEAR(mean, 18240.0, 18240.0 * 0.02);
    EXPECT_NEAR(mean / 256, expected_simk_entries_per_node(params(256)), 0.5);
}

TEST(SimkOverlay, DirectTopologyMatchesFullBuild) {
    for (std::uint32_t n : {16u, 256u}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            Rng a(seed), b(seed);
            const Topology full = to_topology(build_simk_overlay(params(n), a));
            const Topology fast = build_simk_topology(params(n), b);
            EXPECT_EQ(full.unl, fast.unl);
            EXPECT_EQ(full.neighbors, fast.neighbors);
            EXPECT_EQ(full.link_class, fast.link_class);
            EXPECT_EQ(a.next(), b.next());
        }
    }
}

TEST(SimcTopology, ExactLinkCounts) {
    Rng rng(9);
    const Topology t = build_simc_topology(params(256), rng);
    EXPECT_EQ(t.connection_entries(), 5120u);
    for (NodeId a = 0; a < 256; ++a) {
        EXPECT_GE(t.unl[a].size(), 20u);
        EXPECT_LE(t.unl[a].size(), 30u);
        for (NodeId b : t.neighbors[a]) {
            EXPECT_NE(a, b);
            EXPECT_TRUE(t.linked(b, a));
        }
    }
}

TEST(SimcTopology, InDegreeMeanIsTen) {
    // each link is opened by exactly one endpoint; recover outbound counts by
    // replaying the construction order: entries - outbound = inbound
    double in_total = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const Topology t = build_simc_topology(params(256), rng);
        in_total += static_cast<double>(t.connection_entries()) - 10.0 * 256;
    }
    EXPECT_DOUBLE_EQ(in_total / (100.0 * 256), 10.0);
}

TEST(SimrmTopology, ExactLinkCounts) {
    EXPECT_EQ(simrm_outbound_links(params(256)), 36u);
    EXPECT_EQ(simrm_unl_size(params(256)), 46u);
    double simk_mean = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng a(seed), b(seed + 1000);
        const Topology rm = build_simrm_topology(params(256), a);
        EXPECT_EQ(rm.connection_entries(), 18432u);
        simk_mean += static_cast<double>(to_topology(build_simk_overlay(params(256), b)).connection_entries()) / 256;
    }
    EXPECT_GT(18432.0 / 256, simk_mean / 100);
}

TEST(LinkClass, FollowsAffinityGroups) {
    for (Variant v : {Variant::SimC, Variant::SimRM, Variant::SimK}) {
        Rng rng(5);
        const Topology t = build_topology(v, params(64), rng);
        for (NodeId a = 0; a < t.num_nodes(); ++a) {
            ASSERT_EQ(t.link_class[a].size(), t.neighbors[a].size());
            for (std::size_t i = 0; i < t.neighbors[a].size(); ++i) {
                const bool same = a / 8 == t.neighbors[a][i] / 8;
                EXPECT_EQ(t.link_class[a][i], same ? LinkClass::IntraGroup : LinkClass::InterGroup);
            }
        }
    }
}

TEST(PathCensus, TableValues) {
    EXPECT_EQ(path_census(params(256), 3, true), 62u);
    EXPECT_EQ(path_census(params(16), 3, true), 14u);
    EXPECT_EQ(path_census(params(256), 3, false), 170u);
    EXPECT_EQ(path_census(params(256), 2, true), 14u);
    EXPECT_EQ(path_census(params(256), 2, false), 4u);
    for (std::uint32_t n : {16u, 256u}) {
        EXPECT_EQ(path_census(params(n), 1, true), 1u);
        EXPECT_EQ(path_census(params(n), 1, false), 1u);
    }
    EXPECT_EQ(fault_bound(params(256)), 45u);
    EXPECT_THROW(path_census(params(256), 4), ConfigError);
}

TEST(PathCensus, LowerBoundsHoldByEnumeration) {
    for (std::uint32_t n : {16u, 25u}) {
        for (std::uint32_t c : {1u, 2u}) {
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                Rng rng(seed);
                const OverlayParams p = params(n, c);
                const Topology t = to_topology(build_simk_overlay(p, rng));
                const std::uint32_t g = exact_sqrt(n);
                for (NodeId a = 0; a < n; ++a) {
                    for (NodeId b = 0; b < n; ++b) {
                        if (a == b || a / g != b / g) continue;
                        for (std::uint32_t h = 1; h <= 3; ++h) {
                            ASSERT_GE(count_paths(t, a, b, h), path_census(p, h, true))
                                << "n=" << n << " c=" << c << " " << a << "->" << b << " hops=" << h;
                        }
                    }
                }
            }
        }
    }
}

TEST(TopologyExport, EdgeListAndSummary) {
    Rng rng(2);
    const SimkOverlay o = build_simk_overlay(params(4, 1), rng);
    const Topology t = to_topology(o);
    LinkLatencies lat(4);
    for (NodeId a = 0; a < 4; ++a) lat[a].assign(t.neighbors[a].size(), 12.5);
    std::ostringstream out;
    write_edge_list(out, t, lat);
    std::istringstream in(out.str());
    NodeId s, d;
    double ms;
    std::uint64_t lines = 0;
    while (in >> s >> d >> ms) {
        EXPECT_TRUE(t.linked(s, d));
        EXPECT_DOUBLE_EQ(ms, 12.5);
        ++lines;
    }
    EXPECT_EQ(lines, t.connection_entries());
    const std::string json = topology_summary_json(t, &o);
    EXPECT_NE(json.find("\"unl_a\":1"), std::string::npos);
}
