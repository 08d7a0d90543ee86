#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <memory>
#include <vector>

#include "sissle/common/event_queue.hpp"
#include "sissle/membership/membership.hpp"

namespace sissle::membership {

enum class MemberMsgKind : std::uint8_t { Heartbeat, NmlPull, NmlResponse, TrustToken, Ack, NodeLeave };
constexpr std::size_t kMemberMsgKinds = 6;

struct ClusterConfig {
    OverlayParams params;
    TimingParams timing;
    SimTime min_latency = from_ms(5);
    SimTime max_latency = from_ms(50);
    double unl_change_tolerance = 0.2;
    SimTime unl_change_window = 0;  // 0 -> 10 * t1
    // Introducers forward each newcomer to their trust lists.
    bool introducer_intimation = false;
    // Defaults to the first member of every affinity group.
    std::vector<NodeId> introducers;
};

enum class Phase : std::uint8_t { Absent, Joining, BuildingUnl, Live, Left, Crashed };

// Event-driven harness running the membership protocol for a set of nodes
// over a latency-only network. Used to exercise join, maintenance and leave
// end to end.
class Cluster {
public:
    Cluster(ClusterConfig config, std::uint64_t seed);

    void join(NodeId node, SimTime at);
    void leave(NodeId node, SimTime at);
    void crash(NodeId node, SimTime at);
    // A silent node is up but drops everything addressed to it.
    void set_silent(NodeId node, bool silent);
    void set_trace(std::ostream* out) { trace_ = MembershipTrace(out); }

    void run_until(SimTime t);

    SimTime now() const { return now_; }
    const ClusterConfig& config() const { return config_; }
    const MemberState& state(NodeId n) const { return nodes_[n].state; }
    Phase phase(NodeId n) const { return nodes_[n].phase; }
    const JoinProgress& join_progress(NodeId n) const { return nodes_[n].join; }
    const UnlBuild& unl_build(NodeId n) const { return nodes_[n].build; }
    std::uint64_t messages(MemberMsgKind k) const { return sent_[static_cast<std::size_t>(k)]; }
    // How many times `node` forwarded the leave notice for `left`.
    std::uint32_t leave_forwards(NodeId node, NodeId left) const;
    bool up(NodeId n) const;

private:
    struct Message {
        MemberMsgKind kind;
        NodeId src;
        NodeId dst;
        std::uint64_t heartbeat_num = 0;
        std::shared_ptr<const NmlTable> table;
        NodeLeave leave;
    };
    enum class TimerKind : std::uint8_t { Join, Maintain, Heartbeat, Gossip };
    struct Event {
        enum class Type : std::uint8_t { Deliver, Timer, Start, Leave, Crash } type;
        NodeId node = 0;
        TimerKind timer = TimerKind::Join;
        Message msg{};
    };
    struct Node {
        MemberState state;
        Phase phase = Phase::Absent;
        bool silent = false;
        JoinProgress join;
        std::vector<NmlResponse> join_inbox;
        UnlBuild build;
        std::vector<NodeId> acks;
        UnlChangeGuard guard;
        std::uint64_t heartbeat = 0;
        std::map<NodeId, std::uint32_t> leave_forwards;
    };

    void handle(const Event& e);
    void deliver(const Message& m);
    void on_timer(NodeId n, TimerKind kind);
    void start(NodeId n);
    void do_leave(NodeId n);
    void maintain(NodeId n);
    void send(MemberMsgKind kind, NodeId src, NodeId dst, std::shared_ptr<const NmlTable> table = nullptr,
              NodeLeave leave = {});
    void send_token(NodeId src, NodeId dst);
    std::shared_ptr<const NmlTable> table_of(NodeId n) const;
    NodeSet trust_targets(NodeId n) const;
    void schedule(NodeId n, TimerKind kind, SimTime after);

    ClusterConfig config_;
    Rng rng_;
    SimTime now_ = 0;
    std::vector<Node> nodes_;
    EventQueue<Event> queue_;
    std::array<std::uint64_t, kMemberMsgKinds> sent_{};
    MembershipTrace trace_;
};

}  // namespace sissle::membership
