#include <gtest/gtest.h>

#include <sstream>

#include "sissle/consensus/consensus.hpp"

using namespace sissle;
using namespace sissle::consensus;

namespace {

std::vector<NodeId> all_but(std::uint32_t n, NodeId self) {
    std::vector<NodeId> v;
    for (NodeId i = 0; i < n; ++i) {
        if (i != self) v.push_back(i);
    }
    return v;
}

// Complete graph with instant delivery: every digest reaches every other node.
struct Mesh {
    EngineConfig config;
    std::vector<Transaction> registry;
    std::vector<ConsensusNode> nodes;
    std::vector<NodeLedgerState> ledgers;
    std::size_t stage1_msgs = 0;

    Mesh(std::uint32_t n, std::vector<Transaction> txns, std::vector<bool> malicious = {},
         EngineConfig cfg = EngineConfig{})
        : config(cfg), registry(std::move(txns)) {
        malicious.resize(n, false);
        ledgers.resize(n);
        nodes.reserve(n);
        for (NodeId i = 0; i < n; ++i) {
            const auto others = all_but(n, i);
            nodes.emplace_back(i, n, others, others, malicious[i], &registry, &config);
        }
    }

    void broadcast_candidates(NodeId from, const CandidateDigest& d) {
        for (auto& node : nodes) {
            if (node.id() != from) node.on_candidates(d);
        }
    }

    void stage1() {
        std::vector<std::shared_ptr<const CandidateDigest>> declared;
        for (auto& node : nodes) declared.push_back(node.declare(ledgers[node.id()]));
        for (NodeId i = 0; i < nodes.size(); ++i) broadcast_candidates(i, *declared[i]);
        for (bool more = true; more;) {
            more = false;
            for (auto& node : nodes) {
                if (auto b = node.stage1_batch()) {
                    ++stage1_msgs;
                    broadcast_candidates(node.id(), *b);
                    more = true;
                }
            }
        }
    }

    void deliver(NodeId from, const std::vector<std::shared_ptr<const ProposalDigest>>& ps) {
        for (const auto& p : ps) {
            for (auto& node : nodes) {
                if (node.id() != from) node.on_proposals(*p);
            }
        }
    }

    void stage2(SimTime now = 0) {
        for (auto& node : nodes) deliver(node.id(), node.begin_stage2(now).proposals);
        for (bool more = true; more;) {
            more = false;
            for (auto& node : nodes) {
                auto fwd = node.stage2_batch();
                if (!fwd.empty()) more = true;
                deliver(node.id(), fwd);
                auto out = node.stage2_step(now, false);
                if (!out.proposals.empty()) more = true;
                deliver(node.id(), out.proposals);
            }
        }
        for (auto& node : nodes) node.finish(ledgers[node.id()], now);
    }
};

std::shared_ptr<ProposalDigest> votes(std::uint32_t n, std::uint32_t sub_round, TxnId t, std::uint32_t yes_count,
                                      std::uint32_t first = 1) {
    auto d = std::make_shared<ProposalDigest>();
    d->sub_round = sub_round;
    d->origins = NodeBitset(n);
    NodeBitset who(n);
    for (NodeId i = first; i < n; ++i) d->origins.set(i);
    for (NodeId i = first; i < first + yes_count; ++i) who.set(i);
    d->yes.push_back({t, who});
    return d;
}

}  // namespace

TEST(ThresholdAlgebra, Examples) {
    EXPECT_EQ(min_overlap_for_threshold(0.8), 0.4);
    EXPECT_EQ(min_overlap_for_threshold(1.0), 0.0);
    EXPECT_EQ(min_overlap_for_threshold(0.55), 0.9);
    EXPECT_EQ(threshold_from_trust({1.0}), 0.5);
    EXPECT_EQ(threshold_from_trust({0.9, 0.95}), 0.55);
    EXPECT_EQ(threshold_from_trust({0.0}), 1.0);
}

TEST(ThresholdAlgebra, DomainErrors) {
    EXPECT_THROW(min_overlap_for_threshold(0.5), DomainError);
    EXPECT_THROW(min_overlap_for_threshold(0.2), DomainError);
    EXPECT_THROW(min_overlap_for_threshold(1.01), DomainError);
    EXPECT_THROW(threshold_from_trust({}), DomainError);
    EXPECT_THROW(threshold_from_trust({1.2}), DomainError);
}

TEST(ThresholdAlgebra, InverseOnTheLine) {
    for (int i = 0; i <= 1000; ++i) {
        const double w = i / 1000.0;
        const double rho = threshold_from_trust({w});
        EXPECT_NEAR(rho, 1.0 - w / 2.0, 1e-12);
        if (i < 1000) EXPECT_NEAR(min_overlap_for_threshold(rho), w, 1e-12) << w;
    }
    EXPECT_THROW(min_overlap_for_threshold(threshold_from_trust({1.0})), DomainError);
}

TEST(MandatoryWait, Examples) {
    EXPECT_EQ(mandatory_wait(from_ms(250)), from_ms(1500));
    EXPECT_EQ(mandatory_wait(1), 6);
    EXPECT_THROW(mandatory_wait(0), DomainError);
    EXPECT_THROW(mandatory_wait(-5), DomainError);
}

TEST(MandatoryWait, ThreeHopLineFitsWhenHopDelayAtMostTwoBatches) {
    // 4-node line, own set sent at t=0, every relay forwards at the next
    // batch tick. Each hop costs latency plus batch wait; with latency <= x
    // that is <= 2x. Enumerate latency grids and check arrival at the far end.
    const SimTime x = 40;
    const SimTime y = mandatory_wait(x);
    const auto next_tick = [&](SimTime t) { return (t / x + 1) * x; };
    SimTime worst = 0;
    for (SimTime a = 1; a <= x; ++a) {
        for (SimTime b = 1; b <= x; ++b) {
            for (SimTime c = 1; c <= x; c += 3) {
                const SimTime t1 = a;
                const SimTime t2 = next_tick(t1) + b;
                const SimTime t3 = next_tick(t2) + c;
                worst = std::max(worst, t3);
            }
        }
    }
    EXPECT_LE(worst, y);
}

TEST(Schedule, Classic) {
    ScheduleParams p;
    p.sub_rounds = 1;
    auto s = graded_schedule(p);
    EXPECT_EQ(s.per_subround, std::vector<double>{0.8});
    EXPECT_EQ(s.absolute_cap, 0.8);
    p.sub_rounds = 4;
    s = graded_schedule(p);
    EXPECT_EQ(s.per_subround, (std::vector<double>{0.5, 0.6, 0.7, 0.8}));
    p.sub_rounds = 6;
    s = graded_schedule(p);
    EXPECT_EQ(s.per_subround, (std::vector<double>{0.5, 0.6, 0.7, 0.7, 0.7, 0.8}));
    s.validate();
}

TEST(Schedule, GradedFullPropagation) {
    ScheduleParams p;
    p.graded = true;
    p.trust_fractions = {1.0, 1.0};
    p.completeness = 1.0;
    p.epsilon = 1e-6;
    const auto s = graded_schedule(p);
    EXPECT_DOUBLE_EQ(s.final_threshold(), 0.5 + 1e-6);
    for (double v : s.per_subround) EXPECT_LE(v, s.final_threshold());
    s.validate();
}

TEST(Schedule, GradedZeroPropagationStaysAtCap) {
    ScheduleParams p;
    p.graded = true;
    p.trust_fractions = {1.0};
    p.completeness = 0.0;
    EXPECT_EQ(graded_schedule(p).final_threshold(), 0.8);
}

TEST(Schedule, GradedIsMonotoneInCompleteness) {
    ScheduleParams p;
    p.graded = true;
    p.trust_fractions = {0.9};
    double prev = 1.0;
    for (int i = 0; i <= 10; ++i) {
        p.completeness = i / 10.0;
        const auto s = graded_schedule(p);
        s.validate();
        EXPECT_LE(s.final_threshold(), prev);
        EXPECT_GE(s.final_threshold(), 0.55 - 1e-12);
        prev = s.final_threshold();
    }
}

TEST(Schedule, ValidateRejectsBadSchedules) {
    EXPECT_THROW((ThresholdSchedule{{}, 0.8}.validate()), ConfigError);
    EXPECT_THROW((ThresholdSchedule{{0.7, 0.6}, 0.8}.validate()), ConfigError);
    EXPECT_THROW((ThresholdSchedule{{0.5, 0.9}, 0.8}.validate()), ConfigError);
    EXPECT_THROW((ThresholdSchedule{{0.0}, 0.8}.validate()), ConfigError);
}

TEST(Stage1, HighestFeeFirstUnderCap) {
    EngineConfig cfg;
    cfg.bandwidth_cap = 1;
    std::vector<Transaction> reg{{0, true, 5.0}, {1, true, 9.0}};
    ConsensusNode node(1, 3, {0, 2}, {0, 2}, false, &reg, &cfg);
    CandidateDigest d;
    d.origins = NodeBitset(3);
    d.origins.set(0);
    NodeBitset who(3);
    who.set(0);
    d.txns = {{0, who}, {1, who}};
    ASSERT_TRUE(node.on_candidates(d));
    auto first = node.stage1_batch();
    ASSERT_EQ(first->txns.size(), 1u);
    EXPECT_EQ(first->txns[0].txn, 1u);
    auto second = node.stage1_batch();
    ASSERT_EQ(second->txns.size(), 1u);
    EXPECT_EQ(second->txns[0].txn, 0u);
    EXPECT_EQ(node.stage1_batch(), nullptr);
}

TEST(Stage1, InvalidTxnIsNeverForwarded) {
    std::vector<Transaction> reg{{0, false, 1.0}, {1, true, 1.0}};
    Mesh mesh(8, reg);
    mesh.ledgers[0].queue = {0, 1};
    // Instrument: intercept batches by draining manually.
    std::vector<std::shared_ptr<const CandidateDigest>> declared;
    for (auto& node : mesh.nodes) declared.push_back(node.declare(mesh.ledgers[node.id()]));
    for (NodeId i = 0; i < 8; ++i) mesh.broadcast_candidates(i, *declared[i]);
    for (bool more = true; more;) {
        more = false;
        for (auto& node : mesh.nodes) {
            if (auto b = node.stage1_batch()) {
                for (const auto& tb : b->txns) EXPECT_NE(tb.txn, 0u) << "forwarded by " << node.id();
                mesh.broadcast_candidates(node.id(), *b);
                more = true;
            }
        }
    }
    for (auto& node : mesh.nodes) {
        EXPECT_FALSE(node.in_view(0));
        EXPECT_TRUE(node.in_view(1));
    }
}

TEST(Stage1, DuplicateDigestIsNotForwardedAgain) {
    EngineConfig cfg;
    std::vector<Transaction> reg{{0, true, 1.0}};
    ConsensusNode node(1, 3, {0, 2}, {0, 2}, false, &reg, &cfg);
    CandidateDigest d;
    d.origins = NodeBitset(3);
    d.origins.set(0);
    NodeBitset who(3);
    who.set(0);
    d.txns = {{0, who}};
    EXPECT_TRUE(node.on_candidates(d));
    EXPECT_NE(node.stage1_batch(), nullptr);
    EXPECT_FALSE(node.on_candidates(d));
    EXPECT_EQ(node.stage1_batch(), nullptr);
}

TEST(Stage1, AssimilationScopeUnlOnly) {
    EngineConfig cfg;
    cfg.assimilation = Assimilation::UnlOnly;
    std::vector<Transaction> reg{{0, true, 1.0}, {1, true, 1.0}};
    ConsensusNode node(0, 4, {1}, {1, 2}, false, &reg, &cfg);
    CandidateDigest d;
    d.origins = NodeBitset(4);
    d.origins.set(1);
    d.origins.set(3);
    NodeBitset from1(4), from3(4);
    from1.set(1);
    from3.set(3);
    d.txns = {{0, from1}, {1, from3}};
    EXPECT_TRUE(node.on_candidates(d));
    EXPECT_TRUE(node.in_view(0));
    EXPECT_FALSE(node.in_view(1));
    // Still forwarded: vetting passed.
    EXPECT_EQ(node.stage1_batch()->txns.size(), 2u);
    EXPECT_DOUBLE_EQ(node.completeness(), 0.5);
}

TEST(Stage1, ForwardAsSetSendsOnlyNewTxns) {
    EngineConfig cfg;
    cfg.forward_as_set = true;
    std::vector<Transaction> reg{{0, true, 1.0}};
    ConsensusNode node(2, 4, {0, 1}, {0, 1}, false, &reg, &cfg);
    CandidateDigest d;
    d.origins = NodeBitset(4);
    d.origins.set(0);
    NodeBitset who(4);
    who.set(0);
    d.txns = {{0, who}};
    EXPECT_TRUE(node.on_candidates(d));
    auto b = node.stage1_batch();
    ASSERT_NE(b, nullptr);
    EXPECT_TRUE(b->origins.test(2));
    EXPECT_EQ(b->origins.count(), 1u);
    // Same txn from another origin: nothing new to forward.
    d.origins.clear();
    d.origins.set(1);
    d.txns[0].who.clear();
    d.txns[0].who.set(1);
    EXPECT_FALSE(node.on_candidates(d));
    EXPECT_EQ(node.stage1_batch(), nullptr);
}

TEST(Stage1, MaliciousDeclaresEmptyAndNeverForwards) {
    EngineConfig cfg;
    std::vector<Transaction> reg{{0, true, 1.0}};
    ConsensusNode node(0, 3, {1, 2}, {1, 2}, true, &reg, &cfg);
    NodeLedgerState ledger;
    ledger.queue = {0};
    auto d = node.declare(ledger);
    EXPECT_TRUE(d->txns.empty());
    CandidateDigest in;
    in.origins = NodeBitset(3);
    in.origins.set(1);
    EXPECT_FALSE(node.on_candidates(in));
    EXPECT_EQ(node.stage1_batch(), nullptr);
    const auto out = node.begin_stage2(0);
    EXPECT_EQ(out.proposals.size(), cfg.sub_rounds);
    for (const auto& p : out.proposals) EXPECT_TRUE(p->yes.empty());
}

TEST(Stage2, SeventyNinePercentDoesNotCloseClassic) {
    EngineConfig cfg;
    cfg.sub_rounds = 1;
    std::vector<Transaction> reg{{0, true, 1.0}};
    for (std::uint32_t yes : {79u, 80u, 100u}) {
        ConsensusNode node(0, 101, all_but(101, 0), all_but(101, 0), false, &reg, &cfg);
        NodeLedgerState ledger;
        ledger.queue = {0};
        node.declare(ledger);
        node.begin_stage2(0);
        node.on_proposals(*votes(101, 1, 0, yes));
        node.stage2_step(0, false);
        node.finish(ledger, cfg.deadline());
        const bool closed = yes >= 80;
        EXPECT_EQ(ledger.last_closed.contains(0), closed) << yes;
        EXPECT_EQ(ledger.held_over.contains(0), !closed) << yes;
    }
}

TEST(Stage2, GradedCloseAtHalfPlusEpsilon) {
    EngineConfig cfg;
    cfg.sub_rounds = 1;
    std::vector<Transaction> reg{{0, true, 1.0}};
    ScheduleParams sp;
    sp.graded = true;
    sp.sub_rounds = 1;
    sp.trust_fractions = {1.0};
    sp.completeness = 1.0;
    for (std::uint32_t yes : {50u, 51u}) {
        ConsensusNode node(0, 101, all_but(101, 0), all_but(101, 0), false, &reg, &cfg);
        node.set_schedule(graded_schedule(sp));
        NodeLedgerState ledger;
        ledger.queue = {0};
        node.declare(ledger);
        node.begin_stage2(0);
        node.on_proposals(*votes(101, 1, 0, yes));
        node.stage2_step(0, false);
        node.finish(ledger, cfg.deadline());
        EXPECT_EQ(ledger.last_closed.contains(0), yes == 51) << yes;
    }
}

TEST(Stage2, EliminatedTxnNeverReappears) {
    EngineConfig cfg;
    std::vector<Transaction> reg{{0, true, 1.0}, {1, true, 1.0}};
    ConsensusNode node(0, 11, all_but(11, 0), all_but(11, 0), false, &reg, &cfg);
    NodeLedgerState ledger;
    ledger.queue = {0, 1};
    node.declare(ledger);
    auto first = node.begin_stage2(0);
    EXPECT_TRUE(node.voted_yes(1, 0));
    EXPECT_TRUE(node.voted_yes(1, 1));
    node.on_proposals(*votes(11, 1, 1, 10));  // txn 0 gets no support
    auto out = node.stage2_step(from_ms(1000), true);
    EXPECT_EQ(out.eliminated, std::vector<TxnId>{0});
    EXPECT_EQ(node.sub_round(), 2u);
    for (std::uint32_t j = 2; j <= cfg.sub_rounds; ++j) {
        EXPECT_FALSE(node.voted_yes(j, 0));
        EXPECT_TRUE(node.voted_yes(j, 1));
        node.on_proposals(*votes(11, j, 1, 10));
        node.stage2_step(from_ms(1000) * j, false);
    }
    EXPECT_EQ(node.sub_round(), cfg.sub_rounds);
    EXPECT_TRUE(node.closed().contains(1));
    EXPECT_FALSE(node.closed().contains(0));
}

TEST(Stage2, AdvancesEarlyWhenAllRetainedPass) {
    EngineConfig cfg;
    std::vector<Transaction> reg{{0, true, 1.0}};
    ConsensusNode node(0, 11, all_but(11, 0), all_but(11, 0), false, &reg, &cfg);
    NodeLedgerState ledger;
    ledger.queue = {0};
    node.declare(ledger);
    node.begin_stage2(0);
    auto part = [](NodeId lo, NodeId hi) {
        ProposalDigest d;
        d.origins = NodeBitset(11);
        for (NodeId i = lo; i < hi; ++i) d.origins.set(i);
        d.yes.push_back({0, d.origins});
        return d;
    };
    EXPECT_TRUE(node.on_proposals(part(1, 5)));
    EXPECT_TRUE(node.stage2_step(10, false).proposals.empty());
    EXPECT_FALSE(node.on_proposals(part(1, 5)));
    EXPECT_TRUE(node.on_proposals(part(5, 6)));
    const auto out = node.stage2_step(20, false);
    ASSERT_EQ(out.proposals.size(), 1u);
    EXPECT_EQ(out.proposals[0]->sub_round, 2u);
    EXPECT_EQ(node.sub_round_started(), 20);
}

TEST(Stage2, CascadesThroughReadySubRounds) {
    EngineConfig cfg;
    std::vector<Transaction> reg{{0, true, 1.0}};
    ConsensusNode node(0, 11, all_but(11, 0), all_but(11, 0), false, &reg, &cfg);
    NodeLedgerState ledger;
    ledger.queue = {0};
    node.declare(ledger);
    node.begin_stage2(0);
    for (std::uint32_t j = 2; j <= 4; ++j) node.on_proposals(*votes(11, j, 0, 10));
    node.on_proposals(*votes(11, 1, 0, 10));
    const auto out = node.stage2_step(5, false);
    EXPECT_EQ(out.proposals.size(), 3u);
    EXPECT_EQ(node.sub_round(), 4u);
    EXPECT_EQ(out.closed, std::vector<TxnId>{0});
}

TEST(Stage2, TraceLines) {
    EngineConfig cfg;
    cfg.sub_rounds = 1;
    std::vector<Transaction> reg{{0, true, 1.0}, {1, true, 1.0}};
    std::ostringstream os;
    ConsensusTrace trace(&os);
    ConsensusNode node(0, 11, all_but(11, 0), all_but(11, 0), false, &reg, &cfg);
    NodeLedgerState ledger;
    ledger.queue = {0, 1};
    node.declare(ledger);
    node.begin_stage2(0, &trace);
    node.on_proposals(*votes(11, 1, 0, 10));
    node.stage2_step(from_ms(12), false, &trace);
    node.finish(ledger, from_ms(1150), &trace);
    EXPECT_EQ(os.str(), "12 0 1 0 1 close\n1150 0 1 1 0 hold_over\n");
}

TEST(Mesh, FullPropagationAgreesClassicAndGraded) {
    for (bool graded : {false, true}) {
        std::vector<Transaction> reg;
        for (TxnId t = 0; t < 30; ++t) reg.push_back({t, t % 7 != 3, 1.0 + t});
        Mesh mesh(20, reg);
        for (NodeId i = 0; i < 20; ++i) mesh.ledgers[i].queue = {TxnId(i), TxnId(i + 10 > 29 ? 29 : i + 10)};
        mesh.stage1();
        if (graded) {
            for (auto& node : mesh.nodes) {
                ScheduleParams sp{true, mesh.config.sub_rounds, {1.0}, node.completeness(), 1e-6};
                node.set_schedule(graded_schedule(sp));
                EXPECT_DOUBLE_EQ(node.completeness(), 1.0);
            }
        }
        mesh.stage2();
        for (const auto& l : mesh.ledgers) {
            EXPECT_EQ(l.last_closed, mesh.ledgers[0].last_closed);
            EXPECT_TRUE(l.held_over.empty());
        }
        for (TxnId t = 0; t < 30; ++t) EXPECT_EQ(mesh.ledgers[0].last_closed.contains(t), reg[t].valid) << t;
    }
}

TEST(Mesh, HeldOverReturnsFirstNextRound) {
    std::vector<Transaction> reg{{0, true, 1.0}, {1, true, 1.0}};
    EngineConfig cfg;
    ConsensusNode node(0, 3, {1, 2}, {1, 2}, false, &reg, &cfg);
    NodeLedgerState ledger;
    ledger.held_over = {1};
    ledger.queue = {0};
    const auto d = node.declare(ledger);
    ASSERT_EQ(d->txns.size(), 2u);
    EXPECT_EQ(d->txns[0].txn, 1u);
    EXPECT_EQ(d->txns[1].txn, 0u);
    EXPECT_TRUE(ledger.held_over.empty());
    EXPECT_TRUE(ledger.queue.empty());
}

TEST(Mesh, MaliciousMinorityDoesNotBlockClassicClose) {
    std::vector<Transaction> reg{{0, true, 1.0}};
    std::vector<bool> bad(20, false);
    for (int i = 0; i < 3; ++i) bad[i] = true;
    Mesh mesh(20, reg, bad);
    mesh.ledgers[10].queue = {0};
    mesh.stage1();
    mesh.stage2();
    for (NodeId i = 3; i < 20; ++i) EXPECT_TRUE(mesh.ledgers[i].last_closed.contains(0)) << i;
}
