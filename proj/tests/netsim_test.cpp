#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <sstream>

#include "sissle/netsim/netsim.hpp"

using namespace sissle;
using namespace sissle::netsim;

namespace {

ScenarioConfig base(Variant v, std::uint32_t mode, std::uint32_t n = 256) {
    ScenarioConfig c;
    c.variant = v;
    c.mode = mode;
    c.overlay.num_nodes = n;
    return c;
}

// Minimum path length by enumerating every simple path.
std::vector<std::int32_t> all_paths_min(const std::vector<std::vector<NodeId>>& adj, const std::vector<bool>& removed,
                                        NodeId source) {
    const std::size_t n = adj.size();
    std::vector<std::int32_t> best(n, kUnreachable);
    std::vector<bool> on_path(n, false);
    std::function<void(NodeId, std::int32_t)> walk = [&](NodeId u, std::int32_t len) {
        if (best[u] == kUnreachable || len < best[u]) best[u] = len;
        on_path[u] = true;
        for (NodeId v : adj[u]) {
            if (!on_path[v] && !removed[v]) walk(v, len + 1);
        }
        on_path[u] = false;
    };
    walk(source, 0);
    return best;
}

}  // namespace

TEST(Scenario, ValidationRejectsBadConfigs) {
    EXPECT_NO_THROW(base(Variant::SimK, 2).validate());
    auto c = base(Variant::SimK, 7);
    EXPECT_THROW(c.validate(), ConfigError);
    c = base(Variant::SimK, 9);
    EXPECT_THROW(c.validate(), ConfigError);
    c = base(Variant::SimK, 2);
    c.percentage_malicious = 101;
    EXPECT_THROW(c.validate(), ConfigError);
    c = base(Variant::SimK, 2);
    c.min_latency_factor_ni = 3;
    c.max_latency_factor_ni = 2;
    EXPECT_THROW(c.validate(), ConfigError);
    c = base(Variant::SimC, 1);
    c.unla_llf_max = 2;
    EXPECT_THROW(c.validate(), ConfigError);
    c = base(Variant::SimK, 1);
    c.unla_llf_max = 2;
    EXPECT_NO_THROW(c.validate());
    c = base(Variant::SimK, 2);
    c.seed_max = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = base(Variant::SimK, 2, 250);
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Scenario, JsonRoundTripAndHash) {
    auto c = base(Variant::SimRM, 5);
    c.percentage_eclipsed = 15;
    c.percentage_malicious = 20;
    c.engine.bandwidth_cap = 3;
    const auto back = scenario_from_json(c.to_json());
    EXPECT_EQ(back.to_json(), c.to_json());
    EXPECT_EQ(back.hash(), c.hash());
    auto d = c;
    d.percentage_eclipsed = 25;
    EXPECT_NE(d.hash(), c.hash());
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Distances, BfsMatchesAllPathsOnSmallGraphs) {
    Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + rng.index(9);
        std::vector<std::vector<NodeId>> adj(n);
        for (NodeId a = 0; a < n; ++a) {
            for (NodeId b = a + 1; b < n; ++b) {
                if (rng.bernoulli(0.35)) {
                    adj[a].push_back(b);
                    adj[b].push_back(a);
                }
            }
        }
        std::vector<bool> removed(n, false);
        const NodeId source = static_cast<NodeId>(rng.index(n));
        for (NodeId a = 0; a < n; ++a) {
            if (a != source && rng.bernoulli(0.2)) removed[a] = true;
        }
        auto fast = shortest_distances(adj, removed, source);
        auto slow = all_paths_min(adj, removed, source);
        for (NodeId a = 0; a < n; ++a) {
            if (removed[a]) continue;
            EXPECT_EQ(fast[a], slow[a]) << "trial " << trial << " node " << a;
        }
        EXPECT_EQ(fast[source], 0);
    }
}

TEST(Placement, RandomTwentyPercentIsFiftyOne) {
    auto c = base(Variant::SimK, 2);
    c.percentage_malicious = 20;
    for (std::uint64_t s = 0; s < 100; ++s) {
        Rng topo_rng(s), rng(s + 1000);
        const auto topo = overlay::build_topology(c.variant, c.overlay, topo_rng);
        const auto p = place_malicious(c, topo, rng);
        EXPECT_EQ(p.malicious_count(), 51u);
        EXPECT_FALSE(p.malicious[p.source]);
    }
}

TEST(Placement, ModeEightCapAndEclipseClamp) {
    for (Variant v : {Variant::SimC, Variant::SimK}) {
        auto c = base(v, 8);
        c.percentage_eclipsed = 100;
        c.percentage_malicious = 20;
        c.is_upper_limit_malicious_applicable = true;
        for (std::uint64_t s = 0; s < 50; ++s) {
            Rng topo_rng(s), rng(s + 7);
            const auto topo = overlay::build_topology(c.variant, c.overlay, topo_rng);
            const auto p = place_malicious(c, topo, rng);
            EXPECT_LE(p.malicious_count(), 44u);
            const auto& nbrs = topo.neighbors[p.target];
            std::uint32_t genuine = 0;
            for (NodeId b : nbrs) genuine += p.malicious[b] ? 0 : 1;
            EXPECT_GE(genuine, 1u);
            if (v == Variant::SimC) EXPECT_EQ(genuine, 1u);  // degree < 45, so the clamp binds
            EXPECT_NE(static_cast<std::int64_t>(p.source), p.target);
        }
        c.is_upper_limit_malicious_applicable = false;
        c.percentage_malicious = 0;
        Rng topo_rng(3), rng(4);
        const auto topo = overlay::build_topology(c.variant, c.overlay, topo_rng);
        const auto p = place_malicious(c, topo, rng);
        EXPECT_EQ(p.malicious_count(), topo.neighbors[p.target].size() - 1);
    }
}

TEST(Placement, EclipseViaUnlForModesFiveAndSix) {
    auto c = base(Variant::SimK, 6);
    c.percentage_eclipsed = 25;
    c.percentage_malicious = 10;
    Rng topo_rng(1), rng(2);
    const auto topo = overlay::build_topology(c.variant, c.overlay, topo_rng);
    const auto p = place_malicious(c, topo, rng);
    const auto& unl = topo.unl[p.target];
    EXPECT_EQ(p.eclipsers.size(), percent_of_ceil(25, static_cast<std::uint32_t>(unl.size())));
    for (NodeId e : p.eclipsers) EXPECT_TRUE(std::binary_search(unl.begin(), unl.end(), e));
    for (NodeId m : p.random_malicious) {
        EXPECT_EQ(std::count(p.eclipsers.begin(), p.eclipsers.end(), m), 0);
    }
    EXPECT_EQ(p.malicious_count(), p.eclipsers.size() + 25u);
}

TEST(NetworkIssues, RealWorldIdealAndFull) {
    auto c = base(Variant::SimK, 2);
    Rng topo_rng(5);
    const auto topo = overlay::build_topology(c.variant, c.overlay, topo_rng);
    {
        Rng rng(1);
        auto links = build_link_model(topo, c, rng);
        apply_network_issues(links, c, rng);
        for (const auto& row : links.ni_factor) {
            for (double f : row) EXPECT_EQ(f, 1.0);
        }
    }
    c.min_latency_factor_ni = 1.5;
    c.max_latency_factor_ni = 2.0;
    c.percent_links_ni = 25;
    c.percent_nodes_ni = 100;
    {
        Rng rng(1);
        auto links = build_link_model(topo, c, rng);
        apply_network_issues(links, c, rng);
        for (NodeId a = 0; a < topo.num_nodes(); ++a) {
            std::uint32_t hit = 0;
            for (double f : links.ni_factor[a]) {
                if (f != 1.0) {
                    ++hit;
                    EXPECT_GE(f, 1.5);
                    EXPECT_LT(f, 2.0);
                }
            }
            EXPECT_EQ(hit, percent_of(25, static_cast<std::uint32_t>(topo.neighbors[a].size())));
        }
    }
    c.percent_links_ni = 100;
    {
        Rng rng(1);
        auto links = build_link_model(topo, c, rng);
        apply_network_issues(links, c, rng);
        for (const auto& row : links.ni_factor) {
            for (double f : row) EXPECT_GE(f, 1.5);
        }
    }
}

TEST(LinkModel, BaseLatencyRangeAndFactors) {
    auto c = base(Variant::SimK, 2);
    c.unla_llf_max = 1;
    c.unlb_llf_max = 3;
    Rng topo_rng(5), rng(6);
    const auto topo = overlay::build_topology(c.variant, c.overlay, topo_rng);
    const auto links = build_link_model(topo, c, rng);
    for (NodeId a = 0; a < topo.num_nodes(); ++a) {
        for (std::size_t i = 0; i < topo.neighbors[a].size(); ++i) {
            const double f = topo.link_class[a][i] == overlay::LinkClass::IntraGroup ? 1 : 3;
            EXPECT_GE(links.base[a][i], from_ms(5) * f);
            EXPECT_LE(links.base[a][i], from_ms(50) * f);
        }
    }
}

TEST(Success, PredicateExamples) {
    SuccessInput in{256, 256, 256, false, true, 2};
    EXPECT_TRUE(success_predicate(2, 100, in).success);
    in = SuccessInput{256, 26, 26, false, true, 2};  // 90% malicious
    const auto out = success_predicate(2, 100, in);
    EXPECT_TRUE(out.success);
    EXPECT_EQ(out.required, 26u);
    EXPECT_LE(out.effective_ncp, 100.0 * 26 / 256 + 1e-12);
    in = SuccessInput{256, 200, 200, false, true, 4};
    const auto m8 = success_predicate(8, 100, in);
    EXPECT_TRUE(m8.success);
    EXPECT_FALSE(m8.success2);
    in.max_distance = 3;
    EXPECT_TRUE(success_predicate(8, 100, in).success2);
    in.all_genuine_received = false;
    EXPECT_FALSE(success_predicate(8, 100, in).success2);
    in = SuccessInput{256, 256, 204, false, false, 2};
    EXPECT_FALSE(success_predicate(1, 100, in).success);
    EXPECT_TRUE(success_predicate(1, 80, in).success);
    EXPECT_FALSE(success_predicate(3, 80, in).success);
    in.target_reached = true;
    EXPECT_TRUE(success_predicate(3, 80, in).success);
    EXPECT_TRUE(success_predicate(4, 100, SuccessInput{256, 10, 1, true, false, 9}).success);
}

TEST(RunCase, IdealPropagationSucceedsOnEveryVariant) {
    for (Variant v : {Variant::SimC, Variant::SimRM, Variant::SimK}) {
        const auto r = run_case(base(v, 2), 42);
        EXPECT_TRUE(r.success) << overlay::to_string(v);
        EXPECT_EQ(r.received, 256u);
        EXPECT_EQ(r.actual_genuine_nodes, 256u);
        EXPECT_GT(r.elapsed_ms, 0.0);
        EXPECT_GE(r.recvd_msgs, 255u);
    }
}

TEST(RunCase, SimkReachesEveryoneWithinThreeHops) {
    for (std::uint64_t s = 0; s < 30; ++s) {
        auto c = base(Variant::SimK, 8);
        c.percentage_malicious = 15;
        c.is_upper_limit_malicious_applicable = true;
        const auto r = run_case(c, s);
        EXPECT_TRUE(r.success);
        EXPECT_TRUE(r.success2);
        EXPECT_LE(r.max_shortest_dist, 3);
        EXPECT_LT(r.actual_genuine_nodes, 256u);
        EXPECT_EQ(256 - r.actual_genuine_nodes, 38u);
    }
}

TEST(RunCase, SimcEclipseSometimesNeedsFourHops) {
    auto c = base(Variant::SimC, 8);
    c.percentage_eclipsed = 100;
    c.is_upper_limit_malicious_applicable = true;
    int four = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto r = run_case(c, s);
        if (r.success2) EXPECT_TRUE(r.success);
        four += r.max_shortest_dist == 4;
    }
    EXPECT_GT(four, 0);
}

TEST(RunCase, DeterministicAcrossFiftyRandomConfigs) {
    Rng pick(2024);
    const Variant variants[] = {Variant::SimC, Variant::SimRM, Variant::SimK};
    const std::uint32_t modes[] = {1, 2, 3, 4, 5, 6, 8};
    for (int i = 0; i < 50; ++i) {
        auto c = base(variants[pick.index(3)], modes[pick.index(7)], 64);
        c.percentage_malicious = static_cast<double>(pick.index(5) * 10);
        c.percentage_eclipsed = static_cast<double>(pick.index(4) * 10);
        c.network_consensus_percent = 50 + static_cast<double>(pick.index(6) * 10);
        if (pick.bernoulli(0.5)) {
            c.min_latency_factor_ni = 1.5;
            c.max_latency_factor_ni = 2.0;
            c.percent_nodes_ni = 100;
            c.percent_links_ni = 25;
        }
        c.is_upper_limit_malicious_applicable = c.mode == 8 && pick.bernoulli(0.5);
        const std::uint64_t seed = pick.next();
        EventLog la, lb;
        const auto a = run_case(c, seed, {&la});
        const auto b = run_case(c, seed, {&lb});
        EXPECT_EQ(a, b) << c.to_json();
        EXPECT_EQ(la, lb);
        EXPECT_EQ(to_json_line(a, c), to_json_line(b, c));
    }
}

TEST(RunCase, NoForkAtZeroMalicious) {
    for (Variant v : {Variant::SimC, Variant::SimRM, Variant::SimK}) {
        for (std::uint64_t s = 0; s < 200; ++s) {
            CaseDetail d;
            const auto r = run_case(base(v, 1, 64), s, {nullptr, &d});
            ASSERT_FALSE(r.forked) << overlay::to_string(v) << " seed " << s;
            EXPECT_TRUE(r.success);
        }
    }
}

TEST(RunCase, ForwardOnceAndThrottleSoundness) {
    for (Variant v : {Variant::SimC, Variant::SimK}) {
        for (std::uint32_t mode : {1u, 2u}) {
            for (std::uint32_t cap : {0u, 1u}) {
                auto c = base(v, mode, 64);
                c.percentage_malicious = 20;
                c.engine.bandwidth_cap = cap;
                EventLog log;
                CaseDetail d;
                run_case(c, 9, {&log, &d});
                std::map<std::pair<NodeId, NodeId>, int> cand;
                std::map<std::tuple<NodeId, NodeId, std::uint32_t>, int> prop;
                std::map<std::pair<NodeId, std::uint32_t>, int> own_prop;
                for (const auto& e : log.emissions) {
                    if (d.placement.malicious[e.src]) EXPECT_TRUE(e.own) << "malicious forward";
                    if (e.own) {
                        if (e.kind == EmissionKind::Proposal) EXPECT_EQ((++own_prop[{e.src, e.sub_round}]), 1);
                        continue;
                    }
                    for (NodeId o : e.origins) {
                        if (e.kind == EmissionKind::Candidate) {
                            EXPECT_EQ((++cand[{e.src, o}]), 1);
                        } else {
                            EXPECT_EQ((++prop[{e.src, o, e.sub_round}]), 1);
                        }
                        EXPECT_NE(o, e.src);
                    }
                }
                EXPECT_FALSE(cand.empty());
            }
        }
    }
}

TEST(RunCase, ConsensusEndsAtDeadlineAndMaliciousNeverClose) {
    auto c = base(Variant::SimK, 1, 64);
    c.percentage_malicious = 20;
    CaseDetail d;
    const auto r = run_case(c, 3, {nullptr, &d});
    for (NodeId a = 0; a < 64; ++a) {
        if (d.placement.malicious[a]) EXPECT_TRUE(d.last_closed[a].empty());
        if (d.closed_at[a] >= 0) EXPECT_LE(d.closed_at[a], c.engine.deadline());
    }
    EXPECT_LE(r.elapsed_ms, to_ms(c.engine.deadline()));
}

TEST(RunCase, GradedThresholdDropsWithFullPropagation) {
    CaseDetail d;
    run_case(base(Variant::SimK, 1, 64), 1, {nullptr, &d});
    for (double t : d.thresholds) EXPECT_NEAR(t, 0.5 + 1e-6, 1e-9);
    run_case(base(Variant::SimC, 1, 64), 1, {nullptr, &d});
    for (double t : d.thresholds) EXPECT_EQ(t, 0.8);
}

TEST(RunCase, JsonLineCarriesHashAndSeed) {
    const auto c = base(Variant::SimK, 2, 16);
    const auto r = run_case(c, 77);
    const auto line = to_json_line(r, c);
    EXPECT_NE(line.find("\"seed\":77"), std::string::npos);
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(c.hash()));
    EXPECT_NE(line.find(hash), std::string::npos);
    std::ostringstream os;
    EventLog log;
    run_case(c, 77, {&log});
    write_event_log(os, log);
    EXPECT_EQ(os.str().rfind("0 ", 0), 0u);
}
