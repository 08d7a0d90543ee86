#include "sissle/consensus/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace sissle::consensus {

namespace {

// Inputs are decimal fractions; snapping to 12 places keeps 2(1 - 0.8) equal
// to the double nearest 0.4 instead of one ulp below it.
double snap(double v) { return std::round(v * 1e12) / 1e12; }

bool meets(double fraction, double threshold) { return fraction + 1e-12 >= threshold; }

}  // namespace

void ThresholdSchedule::validate() const {
    if (per_subround.empty()) throw ConfigError("threshold schedule is empty");
    if (!(absolute_cap > 0.0 && absolute_cap <= 1.0)) throw ConfigError("absolute cap must lie in (0, 1]");
    double prev = 0.0;
    for (double v : per_subround) {
        if (!(v > 0.0 && v <= 1.0)) throw ConfigError("thresholds must lie in (0, 1]");
        if (v + 1e-12 < prev) throw ConfigError("thresholds must be non-decreasing");
        if (v > absolute_cap + 1e-12) throw ConfigError("threshold above the absolute cap");
        prev = v;
    }
}

SimTime mandatory_wait(SimTime batch_period) {
    if (batch_period <= 0) throw DomainError("batch period must be positive");
    return 6 * batch_period;
}

double min_overlap_for_threshold(double rho) {
    if (!(rho > 0.5 && rho <= 1.0)) throw DomainError("threshold must lie in (0.5, 1]");
    return snap(2.0 * (1.0 - rho));
}

double threshold_from_trust(const std::vector<double>& good_fractions) {
    if (good_fractions.empty()) throw DomainError("no trust fractions");
    for (double f : good_fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw DomainError("trust fraction outside [0, 1]");
    }
    const double lo = *std::min_element(good_fractions.begin(), good_fractions.end());
    return snap(1.0 - lo / 2.0);
}

ThresholdSchedule graded_schedule(const ScheduleParams& params) {
    if (params.sub_rounds == 0) throw ConfigError("sub-round count must be at least 1");
    constexpr double kClassicCap = 0.8;
    constexpr double kBase[] = {0.5, 0.6, 0.7};

    double cap = kClassicCap;
    if (params.graded) {
        if (!(params.completeness >= 0.0 && params.completeness <= 1.0)) {
            throw ConfigError("completeness must lie in [0, 1]");
        }
        const double floor = 0.5 + params.epsilon;
        double target = params.trust_fractions.empty() ? kClassicCap : threshold_from_trust(params.trust_fractions);
        target = std::clamp(target, floor, kClassicCap);
        cap = kClassicCap - params.completeness * (kClassicCap - target);
    }

    ThresholdSchedule s;
    s.absolute_cap = kClassicCap;
    for (std::uint32_t j = 0; j + 1 < params.sub_rounds; ++j) {
        s.per_subround.push_back(std::min(kBase[std::min<std::uint32_t>(j, 2)], cap));
    }
    s.per_subround.push_back(cap);
    return s;
}

void EngineConfig::validate() const {
    if (sub_rounds == 0) throw ConfigError("sub_rounds must be at least 1");
    if (batch_period <= 0) throw ConfigError("batch period must be positive");
    if (subround_timeout <= 0) throw ConfigError("sub-round timeout must be positive");
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw ConfigError("epsilon must lie in (0, 0.5)");
}

std::string_view to_string(Decision d) {
    switch (d) {
        case Decision::Retain: return "retain";
        case Decision::Eliminate: return "eliminate";
        case Decision::Close: return "close";
        case Decision::HoldOver: return "hold_over";
    }
    return "?";
}

void ConsensusTrace::record(SimTime now, NodeId node, std::uint32_t sub_round, TxnId txn, double yes_fraction,
                            Decision d) {
    if (!out_) return;
    *out_ << to_ms(now) << ' ' << node << ' ' << sub_round << ' ' << txn << ' ' << yes_fraction << ' '
          << to_string(d) << '\n';
}

ConsensusNode::ConsensusNode(NodeId self, std::size_t num_nodes, const std::vector<NodeId>& unl,
                             const std::vector<NodeId>& trust, bool malicious,
                             const std::vector<Transaction>* registry, const EngineConfig* config)
    : self_(self),
      n_(num_nodes),
      malicious_(malicious),
      registry_(registry),
      config_(config),
      unl_(num_nodes),
      trust_(num_nodes),
      seen_origins_(num_nodes),
      fwd_origins_(num_nodes),
      scratch_a_(num_nodes),
      scratch_b_(num_nodes) {
    for (NodeId u : unl) unl_.set(u);
    for (NodeId u : trust) trust_.set(u);
    unl_size_ = unl_.count();
    trust_size_ = trust_.count();

    const std::size_t txns = registry_->size();
    if (!malicious_) {
        seen_txn_.assign(txns, NodeBitset(n_));
        fwd_txn_.assign(txns, NodeBitset(n_));
        rounds_.resize(config_->sub_rounds);
        for (auto& r : rounds_) {
            r.known = NodeBitset(n_);
            r.fwd = NodeBitset(n_);
            r.yes.assign(txns, NodeBitset(n_));
            r.fwd_yes.assign(txns, NodeBitset(n_));
        }
    }
    votes_.resize(config_->sub_rounds);
    schedule_ = graded_schedule(ScheduleParams{false, config_->sub_rounds, {}, 0.0, config_->epsilon});
}

std::shared_ptr<const CandidateDigest> ConsensusNode::declare(NodeLedgerState& ledger) {
    auto d = std::make_shared<CandidateDigest>();
    d->origins = NodeBitset(n_);
    d->origins.set(self_);
    if (malicious_) return d;

    seen_origins_.set(self_);
    std::vector<TxnId> order(ledger.held_over.begin(), ledger.held_over.end());
    order.insert(order.end(), ledger.queue.begin(), ledger.queue.end());
    ledger.held_over.clear();
    ledger.queue.clear();

    std::set<TxnId> listed;
    for (TxnId t : order) {
        if (!listed.insert(t).second) continue;
        NodeBitset who(n_);
        who.set(self_);
        d->txns.push_back({t, who});
        seen_txn_[t].set(self_);
        if ((*registry_)[t].valid) view_.insert(t);
    }
    return d;
}

void ConsensusNode::assimilate(TxnId t) {
    if (view_.contains(t)) return;
    switch (config_->assimilation) {
        case Assimilation::All: view_.insert(t); break;
        case Assimilation::UnlOnly:
            if (seen_txn_[t].intersect_count(unl_) > 0) view_.insert(t);
            break;
        case Assimilation::TrustLists:
            if (seen_txn_[t].intersect_count(trust_) > 0) view_.insert(t);
            break;
    }
}

bool ConsensusNode::on_candidates(const CandidateDigest& digest) {
    if (malicious_) return false;
    NodeBitset& fresh = scratch_a_;
    fresh.assign_and_not(digest.origins, seen_origins_);
    seen_origins_ |= fresh;
    bool pending = false;
    if (!config_->forward_as_set && fresh.any()) {
        fwd_origins_ |= fresh;
        pending = true;
    }

    NodeBitset& add = scratch_b_;
    for (const auto& tb : digest.txns) {
        if (!(*registry_)[tb.txn].valid) continue;
        add.assign_and_not(tb.who, seen_txn_[tb.txn]);
        if (add.none()) continue;
        seen_txn_[tb.txn] |= add;
        const bool had = view_.contains(tb.txn);
        assimilate(tb.txn);
        if (config_->forward_as_set) {
            if (!had && view_.contains(tb.txn)) {
                fwd_new_txns_.insert(tb.txn);
                pending = true;
            }
        } else {
            fwd_txn_[tb.txn] |= add;
            pending = true;
        }
    }
    return pending;
}

std::shared_ptr<const CandidateDigest> ConsensusNode::stage1_batch() {
    if (malicious_ || !stage1_pending()) return nullptr;

    std::vector<TxnId> ready;
    if (config_->forward_as_set) {
        ready.assign(fwd_new_txns_.begin(), fwd_new_txns_.end());
    } else {
        for (TxnId t = 0; t < fwd_txn_.size(); ++t) {
            if (fwd_txn_[t].any()) ready.push_back(t);
        }
    }
    std::stable_sort(ready.begin(), ready.end(),
                     [&](TxnId a, TxnId b) { return (*registry_)[a].fee > (*registry_)[b].fee; });
    if (config_->bandwidth_cap > 0 && ready.size() > config_->bandwidth_cap) ready.resize(config_->bandwidth_cap);

    auto d = std::make_shared<CandidateDigest>();
    d->origins = NodeBitset(n_);
    if (config_->forward_as_set) {
        d->origins.set(self_);
        for (TxnId t : ready) {
            NodeBitset who(n_);
            who.set(self_);
            d->txns.push_back({t, std::move(who)});
            fwd_new_txns_.erase(t);
        }
    } else {
        d->origins = fwd_origins_;
        fwd_origins_.clear();
        for (TxnId t : ready) {
            d->txns.push_back({t, fwd_txn_[t]});
            fwd_txn_[t].clear();
        }
    }
    return d;
}

bool ConsensusNode::stage1_pending() const {
    if (malicious_) return false;
    if (!fwd_new_txns_.empty() || fwd_origins_.any()) return true;
    return std::any_of(fwd_txn_.begin(), fwd_txn_.end(), [](const NodeBitset& b) { return b.any(); });
}

double ConsensusNode::completeness() const {
    if (trust_size_ == 0) return 0.0;
    return static_cast<double>(seen_origins_.intersect_count(trust_)) / static_cast<double>(trust_size_);
}

std::shared_ptr<const ProposalDigest> ConsensusNode::emit_proposal(std::uint32_t j) {
    auto d = std::make_shared<ProposalDigest>();
    d->sub_round = j;
    d->origins = NodeBitset(n_);
    d->origins.set(self_);
    if (malicious_) return d;  // every txn implicitly voted no

    RoundState& r = round(j);
    r.known.set(self_);
    std::set<TxnId>& votes = votes_[j - 1];
    for (TxnId t : view_) {
        if (eliminated_.contains(t)) continue;
        votes.insert(t);
        r.yes[t].set(self_);
        NodeBitset who(n_);
        who.set(self_);
        d->yes.push_back({t, std::move(who)});
    }
    return d;
}

Stage2Output ConsensusNode::begin_stage2(SimTime now, ConsensusTrace* trace) {
    Stage2Output out;
    sub_round_ = 1;
    sub_round_started_ = now;
    if (malicious_) {
        for (std::uint32_t j = 1; j <= config_->sub_rounds; ++j) out.proposals.push_back(emit_proposal(j));
        sub_round_ = config_->sub_rounds;
        return out;
    }
    out.proposals.push_back(emit_proposal(1));
    Stage2Output more = stage2_step(now, false, trace);
    out.proposals.insert(out.proposals.end(), more.proposals.begin(), more.proposals.end());
    out.eliminated = std::move(more.eliminated);
    out.retained = std::move(more.retained);
    out.closed = std::move(more.closed);
    return out;
}

bool ConsensusNode::on_proposals(const ProposalDigest& digest) {
    if (malicious_ || digest.sub_round < 1 || digest.sub_round > config_->sub_rounds) return false;
    RoundState& r = round(digest.sub_round);
    NodeBitset& fresh = scratch_a_;
    fresh.assign_and_not(digest.origins, r.known);
    if (fresh.none()) return false;

    NodeBitset& add = scratch_b_;
    for (const auto& tb : digest.yes) {
        add.assign_and_not(tb.who, r.known);
        r.yes[tb.txn] |= add;
        r.fwd_yes[tb.txn] |= add;
    }
    r.known |= fresh;
    r.fwd |= fresh;
    return true;
}

std::vector<std::shared_ptr<const ProposalDigest>> ConsensusNode::stage2_batch() {
    std::vector<std::shared_ptr<const ProposalDigest>> out;
    if (malicious_) return out;
    for (std::uint32_t j = 1; j <= rounds_.size(); ++j) {
        RoundState& r = round(j);
        if (r.fwd.none()) continue;
        auto d = std::make_shared<ProposalDigest>();
        d->sub_round = j;
        d->origins = r.fwd;
        r.fwd.clear();
        for (TxnId t = 0; t < r.fwd_yes.size(); ++t) {
            if (r.fwd_yes[t].none()) continue;
            d->yes.push_back({t, r.fwd_yes[t]});
            r.fwd_yes[t].clear();
        }
        out.push_back(std::move(d));
    }
    return out;
}

bool ConsensusNode::stage2_pending() const {
    return std::any_of(rounds_.begin(), rounds_.end(), [](const RoundState& r) { return r.fwd.any(); });
}

double ConsensusNode::yes_fraction(std::uint32_t j, TxnId t) const {
    if (malicious_ || unl_size_ == 0 || j < 1 || j > rounds_.size()) return 0.0;
    return static_cast<double>(round(j).yes[t].intersect_count(unl_)) / static_cast<double>(unl_size_);
}

bool ConsensusNode::voted_yes(std::uint32_t j, TxnId t) const {
    if (j < 1 || j > votes_.size()) return false;
    return votes_[j - 1].contains(t);
}

Stage2Output ConsensusNode::stage2_step(SimTime now, bool timed_out, ConsensusTrace* trace) {
    Stage2Output out;
    if (malicious_ || sub_round_ == 0) return out;
    const std::uint32_t k = config_->sub_rounds;

    while (sub_round_ < k) {
        const std::uint32_t j = sub_round_;
        const double thr = schedule_.per_subround[j - 1];
        std::vector<TxnId> live;
        for (TxnId t : view_) {
            if (!eliminated_.contains(t)) live.push_back(t);
        }
        bool ready = timed_out;
        if (!ready && !live.empty()) {
            ready = std::all_of(live.begin(), live.end(), [&](TxnId t) { return meets(yes_fraction(j, t), thr); });
        }
        if (!ready) return out;
        timed_out = false;

        for (TxnId t : live) {
            const double f = yes_fraction(j, t);
            if (meets(f, thr)) {
                out.retained.push_back(t);
                if (trace) trace->record(now, self_, j, t, f, Decision::Retain);
            } else {
                eliminated_.insert(t);
                out.eliminated.push_back(t);
                if (trace) trace->record(now, self_, j, t, f, Decision::Eliminate);
            }
        }
        ++sub_round_;
        sub_round_started_ = now;
        out.proposals.push_back(emit_proposal(sub_round_));
    }

    const double final = schedule_.final_threshold();
    for (TxnId t : view_) {
        if (closed_.contains(t)) continue;
        const double f = yes_fraction(k, t);
        if (meets(f, final)) {
            closed_.insert(t);
            out.closed.push_back(t);
            if (trace) trace->record(now, self_, k, t, f, Decision::Close);
        }
    }
    return out;
}

void ConsensusNode::finish(NodeLedgerState& ledger, SimTime now, ConsensusTrace* trace) {
    if (malicious_) return;
    for (TxnId t : view_) {
        if (closed_.contains(t)) {
            ledger.last_closed.insert(t);
            ledger.held_over.erase(t);
        } else {
            ledger.held_over.insert(t);
            if (trace) trace->record(now, self_, sub_round_, t, yes_fraction(config_->sub_rounds, t), Decision::HoldOver);
        }
    }
}

}  // namespace sissle::consensus
