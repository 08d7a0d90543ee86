#pragma once

#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <utility>
#include <vector>

#include "sissle/common/rng.hpp"
#include "sissle/common/types.hpp"
#include "sissle/overlay/overlay.hpp"

namespace sissle::membership {

using overlay::AffinityGroupId;
using overlay::NodeLists;
using overlay::NodeSet;
using overlay::OverlayParams;

// Descending liveness: S1 is the most alive, S4 means deleted.
enum class LivenessState : std::uint8_t { S1 = 1, S2 = 2, S3 = 3, S4 = 4 };

std::string_view to_string(LivenessState s);

struct TimingParams {
    SimTime t1 = from_ms(1000);   // consensus round period
    SimTime t2 = from_ms(6000);   // heartbeat period
    SimTime t3 = from_ms(30000);  // NML gossip period
    SimTime t4 = from_ms(1000);   // join iteration period
    SimTime t5 = from_ms(12000);  // tombstone threshold

    static TimingParams from_t1(SimTime t1);
    void validate() const;

    SimTime s1_timeout() const { return 6 * t1; }
    SimTime s2_timeout() const { return t5; }
    SimTime s3_timeout() const { return 2 * t5; }
};

struct MemberRecord {
    NodeId node = 0;
    LivenessState state = LivenessState::S2;
    SimTime last_timestamp = 0;
    std::uint64_t heartbeat_num = 0;
};

// Anything received from `sender`. Heartbeats carry a number; other traffic
// does not.
struct Contact {
    NodeId sender = 0;
    std::optional<std::uint64_t> heartbeat_num;
};

// All received communication counts as a heartbeat. A numbered heartbeat that
// is not newer than the stored one is ignored outright.
MemberRecord on_message(MemberRecord record, const Contact& contact, SimTime now, bool trusted);

struct LivenessTick {
    MemberRecord record;
    bool contact_attempt = false;  // emitted once, on entering S4
    bool remove = false;
};

// Demotes by age (S1->S2 past 6 t1, ->S3 past t5, ->S4 past 2 t5). Several
// thresholds crossed at once cascade in one call. Never promotes.
LivenessTick tick_liveness(MemberRecord record, SimTime now, const TimingParams& timing);

// Wire form of an NML: node -> freshest timestamp known for it.
using NmlTable = std::map<NodeId, SimTime>;

// Max-timestamp merge. Returns true when an entry was added or refreshed.
bool merge_nml(NmlTable& into, const NmlTable& from);

struct NodeLeave {
    NodeId node = 0;
    SimTime timestamp = 0;  // original multicast time
};

// Everything one node knows about the membership.
struct MemberState {
    NodeId self = 0;
    OverlayParams params;
    NodeLists lists;
    std::map<NodeId, MemberRecord> records;  // every NML member
    std::map<NodeId, SimTime> tombstones;    // deleted members, by last timestamp
    std::set<std::pair<NodeId, SimTime>> seen_leaves;

    MemberState() = default;
    MemberState(NodeId self_id, const OverlayParams& p) : self(self_id), params(p) {}

    AffinityGroupId group_of(NodeId n) const { return overlay::affinity_group_of(n, params); }
    bool own_group(NodeId n) const { return group_of(n) == group_of(self); }
    bool trusted(NodeId n) const { return lists.unl.contains(n) || lists.tnl.members.contains(n); }
    bool knows(NodeId n) const { return records.contains(n); }

    // Adds or refreshes an NML entry. Entries no newer than a tombstone are
    // refused. Returns true when the node is new to the NML.
    bool learn(NodeId n, SimTime timestamp);
    // Drops n from every list and leaves a tombstone.
    void forget(NodeId n);
    NmlTable nml_table() const;
    // Merges a received table through learn(); true when any node was new.
    bool absorb(const NmlTable& table);
    // Live members of one foreign group in UNL-B (S3 counts as not live).
    std::size_t live_unl_b(AffinityGroupId g) const;
};

// Received message from a peer: refreshes its record (adding it to the NML if
// needed). Returns the previous state, or nullopt if the peer was unknown.
std::optional<LivenessState> observe(MemberState& state, const Contact& contact, SimTime now);

struct JoinProgress {
    std::uint32_t iteration = 0;
    NodeSet contacted;
    std::map<NodeId, std::uint32_t> pending_retries;  // contacted, not yet answered
    NodeSet responded;
    NodeSet abandoned;
    std::uint32_t unchanged_iterations = 0;

    static constexpr std::uint32_t kQuietIterations = 5;
    bool done() const { return unchanged_iterations >= kQuietIterations; }
};

struct NmlResponse {
    NodeId from = 0;
    NmlTable table;
};

// One join iteration. Absorbs the responses, then returns the pull targets:
// every not-yet-contacted NML-A / NML-C member, up to c*b new members per
// foreign group (cumulative), and retries for silent targets. A target silent
// after d retries is abandoned; if its group then has fewer than c responders
// a substitute is pulled.
std::vector<NodeId> join_step(MemberState& state, JoinProgress& progress, const std::vector<NmlResponse>& inbox,
                              Rng& rng);

struct UnlBuild {
    std::map<NodeId, std::uint32_t> pending;  // token target -> tokens sent
    NodeSet tried;
    NodeSet failed;
    std::vector<overlay::Shortfall> shortfalls;
    bool started = false;

    bool done() const { return started && pending.empty(); }
};

// First step of UNL construction: tokens to all of NML-A and to c random
// members of every foreign group's NML-B.
std::vector<NodeId> build_unl_from_nml(MemberState& state, UnlBuild& build, Rng& rng);

// Later steps: ACKs admit their sender into the UNL; unanswered targets are
// re-sent, and after d failures replaced by an untried member of the same
// group. A group with no untried members left is recorded as a shortfall.
std::vector<NodeId> unl_build_step(MemberState& state, UnlBuild& build, const std::vector<NodeId>& acks, Rng& rng);

// Receiving a token puts the sender in the TNL; the reply is an ACK to it.
NodeId on_trust_token(MemberState& state, NodeId sender);

struct LeaveOutcome {
    bool removed = false;
    bool forward = false;
};

LeaveOutcome on_node_leave(MemberState& state, const NodeLeave& leave);

// Tokens that bring every foreign group's UNL-B back to c live members,
// drawn from live NML-B members not already in UNL-B or `pending`. A group
// whose NML-B has fewer than c members is mirrored whole.
std::vector<NodeId> replenish_unl_b(const MemberState& state, const NodeSet& pending, Rng& rng);

// Caps how much of the UNL may change inside a sliding window.
class UnlChangeGuard {
public:
    UnlChangeGuard() = default;
    UnlChangeGuard(double tolerance, SimTime window) : tolerance_(tolerance), window_(window) {}

    // True (and the change is counted) when one more change fits the budget
    // of max(1, floor(tolerance * unl_size)) changes per window.
    bool admit(SimTime now, std::size_t unl_size);
    std::size_t recent(SimTime now);

private:
    double tolerance_ = 0.2;
    SimTime window_ = from_ms(10000);
    std::deque<SimTime> changes_;
};

// `time node peer old_state new_state reason`, time in ms.
class MembershipTrace {
public:
    explicit MembershipTrace(std::ostream* out = nullptr) : out_(out) {}
    void transition(SimTime now, NodeId node, NodeId peer, std::optional<LivenessState> from, LivenessState to,
                    std::string_view reason);
    bool enabled() const { return out_ != nullptr; }

private:
    std::ostream* out_;
};

}  // namespace sissle::membership
