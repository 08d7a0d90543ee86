#include <algorithm>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "sissle/common/event_queue.hpp"
#include "sissle/netsim/netsim.hpp"

namespace sissle::netsim {

namespace {

using consensus::CandidateDigest;
using consensus::ConsensusNode;
using consensus::ProposalDigest;
using consensus::Stage2Output;

constexpr consensus::TxnId kTxn = 0;

// Kept trivially copyable: digests live in the simulation's payload store
// and events refer to them by index.
struct Event {
    enum class Type : std::uint8_t { Candidate, Proposal, Flush, Stage2Start, Timeout, Deadline } type;
    NodeId node = 0;
    std::uint32_t sub_round = 0;  // Timeout
    std::uint32_t payload = 0;    // Candidate, Proposal
};

std::vector<NodeId> members(const NodeBitset& b) {
    std::vector<NodeId> out;
    b.for_each([&](NodeId n) { out.push_back(n); });
    return out;
}

class Simulation {
public:
    Simulation(const ScenarioConfig& config, std::uint64_t seed, const RunOptions& options)
        : cfg_(config), opt_(options) {
        cfg_.validate();
        result_.seed = seed;
        Rng root(seed);
        Rng topo_rng = root.fork(1);
        Rng link_rng = root.fork(2);
        Rng ni_rng = root.fork(3);
        Rng place_rng = root.fork(4);

        topo_ = overlay::build_topology(cfg_.variant, cfg_.overlay, topo_rng);
        links_ = build_link_model(topo_, cfg_, link_rng);
        apply_network_issues(links_, cfg_, ni_rng);
        latency_.resize(links_.base.size());
        for (NodeId a = 0; a < latency_.size(); ++a) {
            for (std::size_t i = 0; i < links_.base[a].size(); ++i) latency_[a].push_back(links_.latency(a, i));
        }
        place_ = place_malicious(cfg_, topo_, place_rng);
        n_ = static_cast<std::uint32_t>(topo_.num_nodes());
        genuine_ = n_ - place_.malicious_count();

        build_recipients();
        std::vector<std::vector<NodeId>> tnl(n_);
        for (NodeId a = 0; a < n_; ++a) {
            for (NodeId u : topo_.unl[a]) tnl[u].push_back(a);
        }
        nodes_.reserve(n_);
        for (NodeId a = 0; a < n_; ++a) {
            std::vector<NodeId> trust = topo_.unl[a];
            trust.insert(trust.end(), tnl[a].begin(), tnl[a].end());
            std::sort(trust.begin(), trust.end());
            trust.erase(std::unique(trust.begin(), trust.end()), trust.end());
            nodes_.emplace_back(a, n_, topo_.unl[a], trust, place_.malicious[a], &registry_, &cfg_.engine);
        }
        ledgers_.resize(n_);
        flush_pending_.assign(n_, false);
        received_at_.assign(n_, -1);
        closed_at_.assign(n_, -1);

        distances_ = shortest_distances(topo_.neighbors, place_.malicious, place_.source);
        std::uint64_t sum = 0;
        std::uint32_t counted = 0;
        for (NodeId a = 0; a < n_; ++a) {
            if (place_.malicious[a]) continue;
            if (distances_[a] == kUnreachable) {
                result_.max_shortest_dist = kUnreachable;
                continue;
            }
            if (result_.max_shortest_dist != kUnreachable) {
                result_.max_shortest_dist = std::max(result_.max_shortest_dist, distances_[a]);
            }
            if (a != place_.source) {
                sum += static_cast<std::uint64_t>(distances_[a]);
                ++counted;
            }
        }
        result_.avg_shortest_dist = counted ? static_cast<double>(sum) / counted : 0.0;
    }

    CaseResult run() {
        if (cfg_.consensus_mode()) {
            for (NodeId a = 0; a < n_; ++a) {
                if (a == place_.source) ledgers_[a].queue.push_back(kTxn);
                declare(a);
            }
            queue_.push(cfg_.engine.mandatory_wait(), Event{Event::Type::Stage2Start});
            queue_.push(cfg_.engine.deadline(), Event{Event::Type::Deadline});
        } else {
            ledgers_[place_.source].queue.push_back(kTxn);
            declare(place_.source);
        }

        bool done = false;
        while (!queue_.empty() && !done) {
            auto e = queue_.pop();
            now_ = e.at;
            done = handle(e.payload);
        }
        return finish();
    }

private:
    void build_recipients() {
        recipients_.resize(n_);
        if (cfg_.recipients == RecipientScope::Links) {
            for (NodeId a = 0; a < n_; ++a) {
                recipients_[a].resize(topo_.neighbors[a].size());
                std::iota(recipients_[a].begin(), recipients_[a].end(), std::size_t{0});
            }
            return;
        }
        std::vector<std::vector<bool>> in_unl(n_, std::vector<bool>(n_, false));
        for (NodeId a = 0; a < n_; ++a) {
            for (NodeId u : topo_.unl[a]) in_unl[a][u] = true;
        }
        for (NodeId a = 0; a < n_; ++a) {
            const auto& nbrs = topo_.neighbors[a];
            for (std::size_t i = 0; i < nbrs.size(); ++i) {
                const NodeId b = nbrs[i];
                bool keep = true;
                if (cfg_.recipients == RecipientScope::UnlOnly) keep = in_unl[a][b];
                if (cfg_.recipients == RecipientScope::TnlOnly) keep = in_unl[b][a];
                if (keep) recipients_[a].push_back(i);
            }
        }
    }

    SimTime next_tick() const {
        const SimTime x = cfg_.engine.batch_period;
        return (now_ / x + 1) * x;
    }

    void log(NodeId src, EmissionKind kind, bool own, std::uint32_t sub_round, const NodeBitset& origins,
             std::vector<consensus::TxnId> txns) {
        if (!opt_.log) return;
        opt_.log->emissions.push_back(Emission{now_, src, kind, own, sub_round, members(origins), std::move(txns),
                                               static_cast<std::uint32_t>(recipients_[src].size())});
    }

    void send(NodeId a, std::shared_ptr<const CandidateDigest> d, bool own) {
        if (opt_.log) {
            std::vector<consensus::TxnId> txns;
            for (const auto& tb : d->txns) txns.push_back(tb.txn);
            log(a, EmissionKind::Candidate, own, 0, d->origins, std::move(txns));
        }
        const auto slot = static_cast<std::uint32_t>(candidates_.size());
        candidates_.push_back(std::move(d));
        for (std::size_t i : recipients_[a]) {
            queue_.push(now_ + latency_[a][i], Event{Event::Type::Candidate, topo_.neighbors[a][i], 0, slot});
        }
        result_.sent_msgs += recipients_[a].size();
    }

    void send(NodeId a, std::shared_ptr<const ProposalDigest> d, bool own) {
        if (opt_.log) {
            std::vector<consensus::TxnId> txns;
            for (const auto& tb : d->yes) txns.push_back(tb.txn);
            log(a, EmissionKind::Proposal, own, d->sub_round, d->origins, std::move(txns));
        }
        const auto slot = static_cast<std::uint32_t>(proposals_.size());
        proposals_.push_back(std::move(d));
        for (std::size_t i : recipients_[a]) {
            queue_.push(now_ + latency_[a][i], Event{Event::Type::Proposal, topo_.neighbors[a][i], 0, slot});
        }
        result_.sent_msgs += recipients_[a].size();
    }

    void declare(NodeId a) {
        auto d = nodes_[a].declare(ledgers_[a]);
        note_receipt(a);
        send(a, std::move(d), true);
    }

    void schedule_flush(NodeId a) {
        if (flush_pending_[a]) return;
        flush_pending_[a] = true;
        queue_.push(next_tick(), Event{Event::Type::Flush, a});
    }

    void note_receipt(NodeId a) {
        if (place_.malicious[a] || received_at_[a] >= 0 || !nodes_[a].in_view(kTxn)) return;
        received_at_[a] = now_;
        ++received_;
        if (!cfg_.consensus_mode()) check_success();
    }

    void check_success() {
        if (success_at_ >= 0) return;
        SuccessInput in;
        in.num_nodes = n_;
        in.genuine = genuine_;
        const bool consensus = cfg_.consensus_mode();
        in.reached = consensus ? closed_ : received_;
        if (place_.target >= 0) {
            in.target_reached = (consensus ? closed_at_ : received_at_)[place_.target] >= 0;
        }
        in.all_genuine_received = received_ == genuine_;
        in.max_distance = result_.max_shortest_dist;
        if (success_predicate(cfg_.mode, cfg_.network_consensus_percent, in).success) success_at_ = now_;
    }

    void apply(NodeId a, const Stage2Output& out) {
        for (const auto& p : out.proposals) send(a, p, true);
        if (!out.proposals.empty() && !place_.malicious[a]) {
            const std::uint32_t j = nodes_[a].sub_round();
            if (j < cfg_.engine.sub_rounds) {
                queue_.push(now_ + cfg_.engine.subround_timeout, Event{Event::Type::Timeout, a, j, 0});
            }
        }
        if (!out.closed.empty() && closed_at_[a] < 0) {
            closed_at_[a] = now_;
            ++closed_;
            check_success();
        }
    }

    void start_stage2() {
        for (NodeId a = 0; a < n_; ++a) {
            ConsensusNode& node = nodes_[a];
            if (cfg_.variant == Variant::SimK && !node.malicious()) {
                const auto& unl = topo_.unl[a];
                std::uint32_t good = 0;
                for (NodeId u : unl) good += place_.malicious[u] ? 0 : 1;
                consensus::ScheduleParams sp;
                sp.graded = true;
                sp.sub_rounds = cfg_.engine.sub_rounds;
                sp.trust_fractions = {unl.empty() ? 0.0 : static_cast<double>(good) / unl.size()};
                sp.completeness = node.completeness();
                sp.epsilon = cfg_.engine.epsilon;
                node.set_schedule(consensus::graded_schedule(sp));
            }
            apply(a, node.begin_stage2(now_, opt_.trace));
        }
    }

    // Returns true when the case is over.
    bool handle(const Event& e) {
        switch (e.type) {
            case Event::Type::Candidate: {
                ++result_.recvd_msgs;
                ConsensusNode& node = nodes_[e.node];
                if (node.on_candidates(*candidates_[e.payload])) schedule_flush(e.node);
                note_receipt(e.node);
                if (node.in_stage2() && !node.malicious()) apply(e.node, node.stage2_step(now_, false, opt_.trace));
                break;
            }
            case Event::Type::Proposal: {
                ++result_.recvd_msgs;
                ConsensusNode& node = nodes_[e.node];
                if (node.on_proposals(*proposals_[e.payload])) {
                    schedule_flush(e.node);
                    if (node.in_stage2()) apply(e.node, node.stage2_step(now_, false, opt_.trace));
                }
                break;
            }
            case Event::Type::Flush: {
                flush_pending_[e.node] = false;
                ConsensusNode& node = nodes_[e.node];
                if (auto c = node.stage1_batch()) send(e.node, std::move(c), false);
                for (auto& p : node.stage2_batch()) send(e.node, std::move(p), false);
                if (node.stage1_pending() || node.stage2_pending()) schedule_flush(e.node);
                break;
            }
            case Event::Type::Stage2Start: start_stage2(); break;
            case Event::Type::Timeout: {
                ConsensusNode& node = nodes_[e.node];
                if (node.sub_round() == e.sub_round) apply(e.node, node.stage2_step(now_, true, opt_.trace));
                break;
            }
            case Event::Type::Deadline:
                for (NodeId a = 0; a < n_; ++a) nodes_[a].finish(ledgers_[a], now_, opt_.trace);
                return true;
        }
        return false;
    }

    CaseResult finish() {
        result_.actual_genuine_nodes = genuine_;
        result_.pct_malicious_realized = 100.0 * (n_ - genuine_) / n_;
        result_.received = received_;
        result_.closed = closed_;

        SuccessInput in;
        in.num_nodes = n_;
        in.genuine = genuine_;
        const bool consensus = cfg_.consensus_mode();
        in.reached = consensus ? closed_ : received_;
        if (place_.target >= 0) in.target_reached = (consensus ? closed_at_ : received_at_)[place_.target] >= 0;
        in.all_genuine_received = received_ == genuine_;
        in.max_distance = result_.max_shortest_dist;
        const SuccessOutcome outcome = success_predicate(cfg_.mode, cfg_.network_consensus_percent, in);
        result_.success = outcome.success;
        result_.success2 = outcome.success2;
        result_.elapsed_ms = to_ms(outcome.success && success_at_ >= 0 ? success_at_ : now_);

        if (consensus) {
            const std::set<consensus::TxnId>* first = nullptr;
            for (NodeId a = 0; a < n_; ++a) {
                if (place_.malicious[a]) continue;
                if (!first) {
                    first = &ledgers_[a].last_closed;
                } else if (ledgers_[a].last_closed != *first) {
                    result_.forked = true;
                }
            }
        }

        if (CaseDetail* d = opt_.detail) {
            d->topology = topo_;
            d->placement = place_;
            d->received_at = received_at_;
            d->closed_at = closed_at_;
            d->distances = distances_;
            d->last_closed.clear();
            d->thresholds.clear();
            for (NodeId a = 0; a < n_; ++a) {
                d->last_closed.push_back(ledgers_[a].last_closed);
                d->thresholds.push_back(nodes_[a].schedule().final_threshold());
            }
        }
        return result_;
    }

    ScenarioConfig cfg_;
    RunOptions opt_;
    overlay::Topology topo_;
    LinkModel links_;
    std::vector<std::vector<SimTime>> latency_;
    std::vector<std::shared_ptr<const CandidateDigest>> candidates_;
    std::vector<std::shared_ptr<const ProposalDigest>> proposals_;
    Placement place_;
    std::uint32_t n_ = 0;
    std::uint32_t genuine_ = 0;
    std::vector<consensus::Transaction> registry_{{kTxn, true, 1.0}};
    std::vector<ConsensusNode> nodes_;
    std::vector<consensus::NodeLedgerState> ledgers_;
    std::vector<std::vector<std::size_t>> recipients_;
    std::vector<std::int32_t> distances_;
    std::vector<bool> flush_pending_;
    std::vector<SimTime> received_at_;
    std::vector<SimTime> closed_at_;
    std::uint32_t received_ = 0;
    std::uint32_t closed_ = 0;
    SimTime success_at_ = -1;
    EventQueue<Event> queue_;
    SimTime now_ = 0;
    CaseResult result_;
};

}  // namespace

CaseResult run_case(const ScenarioConfig& config, std::uint64_t seed, const RunOptions& options) {
    Simulation sim(config, seed, options);
    return sim.run();
}

std::string to_json_line(const CaseResult& r, const ScenarioConfig& config) {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config.hash()));
    nlohmann::json j{
        {"config_hash", hash},
        {"seed", r.seed},
        {"variant", overlay::to_string(config.variant)},
        {"mode", config.mode},
        {"success", r.success},
        {"success2", r.success2},
        {"elapsed_ms", r.elapsed_ms},
        {"sent_msgs", r.sent_msgs},
        {"recvd_msgs", r.recvd_msgs},
        {"actual_genuine_nodes", r.actual_genuine_nodes},
        {"pct_malicious_realized", r.pct_malicious_realized},
        {"max_shortest_dist", r.max_shortest_dist},
        {"avg_shortest_dist", r.avg_shortest_dist},
        {"received", r.received},
        {"closed", r.closed},
        {"forked", r.forked},
    };
    return j.dump();
}

void write_event_log(std::ostream& out, const EventLog& log) {
    for (const auto& e : log.emissions) {
        out << to_ms(e.at) << ' ' << e.src << ' ' << (e.kind == EmissionKind::Candidate ? "candidate" : "proposal")
            << ' ' << (e.own ? "own" : "fwd") << ' ' << e.sub_round << " origins=";
        for (std::size_t i = 0; i < e.origins.size(); ++i) out << (i ? "," : "") << e.origins[i];
        out << " txns=";
        for (std::size_t i = 0; i < e.txns.size(); ++i) out << (i ? "," : "") << e.txns[i];
        out << " recipients=" << e.recipients << '\n';
    }
}

}  // namespace sissle::netsim
