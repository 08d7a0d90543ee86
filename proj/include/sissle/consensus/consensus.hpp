#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <set>
#include <string_view>
#include <vector>

#include "sissle/common/types.hpp"
#include "sissle/kernels/node_bitset.hpp"

namespace sissle::consensus {

using TxnId = std::uint32_t;

struct Transaction {
    TxnId id = 0;
    bool valid = true;
    double fee = 0.0;
};

struct CandidateSet {
    NodeId origin = 0;
    std::set<TxnId> txns;
};

struct Proposal {
    NodeId origin = 0;
    std::uint32_t sub_round = 1;
    std::map<TxnId, bool> votes;
};

struct ThresholdSchedule {
    std::vector<double> per_subround;  // last entry is the closing threshold
    double absolute_cap = 0.8;

    double final_threshold() const { return per_subround.back(); }
    void validate() const;
};

struct NodeLedgerState {
    std::set<TxnId> last_closed;
    std::set<TxnId> held_over;
    std::vector<TxnId> queue;
};

// y = 6x, the largest wait the batch period allows.
SimTime mandatory_wait(SimTime batch_period);

// w >= 2(1 - rho); rho must lie in (0.5, 1].
double min_overlap_for_threshold(double rho);

// 1 - min(f)/2 over the good-node fractions of the trust lists.
double threshold_from_trust(const std::vector<double>& good_fractions);

struct ScheduleParams {
    bool graded = false;  // SimK grading; otherwise the classic schedule
    std::uint32_t sub_rounds = 4;
    std::vector<double> trust_fractions;  // graded only
    double completeness = 0.0;            // graded only, in [0, 1]
    double epsilon = 1e-6;
};

// Classic: [0.5, 0.6, 0.7, ..., 0.8] (k=1 gives [0.8]).
// Graded: the cap slides from 0.8 toward max(0.5+eps, threshold_from_trust)
// in proportion to completeness; every sub-round threshold is clipped to it.
ThresholdSchedule graded_schedule(const ScheduleParams& params);

// One transaction's origins (candidate sets) or yes votes (proposals).
struct TxnBits {
    TxnId txn = 0;
    NodeBitset who;
};

// Several candidate sets in one message: which origins are included, and per
// transaction which of those origins listed it.
struct CandidateDigest {
    NodeBitset origins;
    std::vector<TxnBits> txns;
};

// Several proposals of one sub-round in one message.
struct ProposalDigest {
    std::uint32_t sub_round = 1;
    NodeBitset origins;
    std::vector<TxnBits> yes;
};

enum class Assimilation : std::uint8_t { All, UnlOnly, TrustLists };

struct EngineConfig {
    std::uint32_t sub_rounds = 4;
    SimTime batch_period = from_ms(25);
    SimTime subround_timeout = from_ms(1000);
    Assimilation assimilation = Assimilation::All;
    std::uint32_t bandwidth_cap = 0;  // txns per forwarded batch; 0 = unlimited
    bool forward_as_set = false;      // forward only new txn ids, without origins
    double epsilon = 1e-6;

    SimTime mandatory_wait() const { return consensus::mandatory_wait(batch_period); }
    SimTime deadline() const { return mandatory_wait() + static_cast<SimTime>(sub_rounds) * subround_timeout; }
    void validate() const;
};

enum class Decision : std::uint8_t { Retain, Eliminate, Close, HoldOver };
std::string_view to_string(Decision d);

// `time node sub_round txn yes_fraction decision`, time in ms.
class ConsensusTrace {
public:
    explicit ConsensusTrace(std::ostream* out = nullptr) : out_(out) {}
    void record(SimTime now, NodeId node, std::uint32_t sub_round, TxnId txn, double yes_fraction, Decision d);

private:
    std::ostream* out_;
};

struct Stage2Output {
    // Own proposals to send: one per sub-round entered (malicious nodes emit
    // all of theirs at once).
    std::vector<std::shared_ptr<const ProposalDigest>> proposals;
    std::vector<TxnId> eliminated;
    std::vector<TxnId> retained;
    std::vector<TxnId> closed;
};

// One server's view of a single consensus round. Transport is the caller's
// job: the node hands out digests to send and accepts digests received.
class ConsensusNode {
public:
    ConsensusNode(NodeId self, std::size_t num_nodes, const std::vector<NodeId>& unl,
                  const std::vector<NodeId>& trust, bool malicious, const std::vector<Transaction>* registry,
                  const EngineConfig* config);

    NodeId id() const { return self_; }
    bool malicious() const { return malicious_; }

    // Stage 1. Builds this node's candidate set from the ledger (held-over
    // first, then the queue). Malicious nodes declare an empty set.
    std::shared_ptr<const CandidateDigest> declare(NodeLedgerState& ledger);
    // Vets and assimilates; true when something is now waiting to be forwarded.
    bool on_candidates(const CandidateDigest& digest);
    // Pending forwards, highest fee first under a bandwidth cap. Null when
    // nothing is pending (always null for malicious nodes).
    std::shared_ptr<const CandidateDigest> stage1_batch();
    bool stage1_pending() const;

    bool in_view(TxnId t) const { return view_.contains(t); }
    const std::set<TxnId>& view() const { return view_; }
    // Share of UNL u TNL whose candidate sets have been seen.
    double completeness() const;
    void set_schedule(ThresholdSchedule schedule) { schedule_ = std::move(schedule); }
    const ThresholdSchedule& schedule() const { return schedule_; }

    // Stage 2. Emits the first proposal.
    Stage2Output begin_stage2(SimTime now, ConsensusTrace* trace = nullptr);
    // Merges proposals; true when something is now waiting to be forwarded.
    bool on_proposals(const ProposalDigest& digest);
    std::vector<std::shared_ptr<const ProposalDigest>> stage2_batch();
    bool stage2_pending() const;
    // Advances the sub-round when every retained txn meets its threshold or
    // the sub-round timed out, and closes final-round txns that reached the
    // closing threshold.
    Stage2Output stage2_step(SimTime now, bool timed_out, ConsensusTrace* trace = nullptr);
    // Round deadline: closed txns go to last_closed, the rest of the view to
    // held_over.
    void finish(NodeLedgerState& ledger, SimTime now, ConsensusTrace* trace = nullptr);

    std::uint32_t sub_round() const { return sub_round_; }
    SimTime sub_round_started() const { return sub_round_started_; }
    bool in_stage2() const { return sub_round_ > 0; }
    double yes_fraction(std::uint32_t sub_round, TxnId t) const;
    const std::set<TxnId>& closed() const { return closed_; }
    const std::set<TxnId>& eliminated() const { return eliminated_; }
    bool voted_yes(std::uint32_t sub_round, TxnId t) const;

private:
    struct RoundState {
        NodeBitset known;
        NodeBitset fwd;
        std::vector<NodeBitset> yes;      // by TxnId
        std::vector<NodeBitset> fwd_yes;  // by TxnId
    };

    std::shared_ptr<const ProposalDigest> emit_proposal(std::uint32_t j);
    RoundState& round(std::uint32_t j) { return rounds_[j - 1]; }
    const RoundState& round(std::uint32_t j) const { return rounds_[j - 1]; }
    void assimilate(TxnId t);

    NodeId self_;
    std::size_t n_;
    bool malicious_;
    const std::vector<Transaction>* registry_;
    const EngineConfig* config_;
    NodeBitset unl_;
    NodeBitset trust_;
    std::size_t unl_size_;
    std::size_t trust_size_;

    NodeBitset seen_origins_;
    NodeBitset fwd_origins_;
    std::vector<NodeBitset> seen_txn_;  // by TxnId
    std::vector<NodeBitset> fwd_txn_;
    std::set<TxnId> view_;
    std::set<TxnId> fwd_new_txns_;  // forward_as_set mode

    ThresholdSchedule schedule_;
    std::uint32_t sub_round_ = 0;
    SimTime sub_round_started_ = 0;
    std::vector<RoundState> rounds_;
    std::vector<std::set<TxnId>> votes_;  // yes votes per emitted sub-round
    std::set<TxnId> eliminated_;
    std::set<TxnId> closed_;
    NodeBitset scratch_a_;
    NodeBitset scratch_b_;
};

}  // namespace sissle::consensus
