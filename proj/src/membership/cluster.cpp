#include "sissle/membership/cluster.hpp"

#include <algorithm>

namespace sissle::membership {

Cluster::Cluster(ClusterConfig config, std::uint64_t seed) : config_(std::move(config)), rng_(seed) {
    config_.timing.validate();
    config_.params.validate(overlay::Variant::SimK);
    if (config_.unl_change_window == 0) config_.unl_change_window = 10 * config_.timing.t1;
    if (config_.introducers.empty()) {
        const std::uint32_t g = config_.params.group_size();
        for (std::uint32_t i = 0; i < g; ++i) config_.introducers.push_back(i * g);
    }
    nodes_.resize(config_.params.num_nodes);
    for (NodeId n = 0; n < nodes_.size(); ++n) {
        nodes_[n].state = MemberState(n, config_.params);
        nodes_[n].guard = UnlChangeGuard(config_.unl_change_tolerance, config_.unl_change_window);
    }
}

void Cluster::join(NodeId node, SimTime at) { queue_.push(at, Event{Event::Type::Start, node}); }
void Cluster::leave(NodeId node, SimTime at) { queue_.push(at, Event{Event::Type::Leave, node}); }
void Cluster::crash(NodeId node, SimTime at) { queue_.push(at, Event{Event::Type::Crash, node}); }
void Cluster::set_silent(NodeId node, bool silent) { nodes_[node].silent = silent; }

bool Cluster::up(NodeId n) const {
    const Phase p = nodes_[n].phase;
    return p == Phase::Joining || p == Phase::BuildingUnl || p == Phase::Live;
}

std::uint32_t Cluster::leave_forwards(NodeId node, NodeId left) const {
    auto it = nodes_[node].leave_forwards.find(left);
    return it == nodes_[node].leave_forwards.end() ? 0 : it->second;
}

void Cluster::run_until(SimTime t) {
    while (!queue_.empty() && queue_.next_time() <= t) {
        auto e = queue_.pop();
        now_ = e.at;
        handle(e.payload);
    }
    now_ = std::max(now_, t);
}

void Cluster::handle(const Event& e) {
    switch (e.type) {
        case Event::Type::Deliver: deliver(e.msg); break;
        case Event::Type::Timer: on_timer(e.node, e.timer); break;
        case Event::Type::Start: start(e.node); break;
        case Event::Type::Leave: do_leave(e.node); break;
        case Event::Type::Crash: nodes_[e.node].phase = Phase::Crashed; break;
    }
}

void Cluster::schedule(NodeId n, TimerKind kind, SimTime after) {
    Event e{Event::Type::Timer, n};
    e.timer = kind;
    queue_.push(now_ + after, e);
}

void Cluster::send(MemberMsgKind kind, NodeId src, NodeId dst, std::shared_ptr<const NmlTable> table,
                   NodeLeave leave) {
    Message m{};
    m.kind = kind;
    m.src = src;
    m.dst = dst;
    m.table = std::move(table);
    m.leave = leave;
    if (kind == MemberMsgKind::Heartbeat) m.heartbeat_num = nodes_[src].heartbeat;
    ++sent_[static_cast<std::size_t>(kind)];
    const SimTime latency = static_cast<SimTime>(rng_.uniform_int(static_cast<std::uint64_t>(config_.min_latency),
                                                                  static_cast<std::uint64_t>(config_.max_latency)));
    Event e{Event::Type::Deliver, dst};
    e.msg = std::move(m);
    queue_.push(now_ + latency, std::move(e));
}

void Cluster::send_token(NodeId src, NodeId dst) {
    Node& node = nodes_[src];
    node.build.tried.insert(dst);
    node.build.pending[dst] = 1;
    send(MemberMsgKind::TrustToken, src, dst);
}

std::shared_ptr<const NmlTable> Cluster::table_of(NodeId n) const {
    auto t = std::make_shared<NmlTable>(nodes_[n].state.nml_table());
    (*t)[n] = now_;
    return t;
}

NodeSet Cluster::trust_targets(NodeId n) const { return nodes_[n].state.lists.trust(); }

void Cluster::start(NodeId n) {
    Node& node = nodes_[n];
    if (up(n)) return;
    node.phase = Phase::Joining;
    node.join = JoinProgress{};
    node.build = UnlBuild{};
    for (NodeId i : config_.introducers) {
        if (i == n) continue;
        node.state.lists.nml.nml_c.insert(i);
        node.state.learn(i, now_);
    }
    on_timer(n, TimerKind::Join);
    schedule(n, TimerKind::Heartbeat, config_.timing.t2);
    schedule(n, TimerKind::Gossip, config_.timing.t3);
}

void Cluster::do_leave(NodeId n) {
    Node& node = nodes_[n];
    if (!up(n)) return;
    const NodeLeave notice{n, now_};
    for (const auto& [peer, _] : node.state.records) send(MemberMsgKind::NodeLeave, n, peer, nullptr, notice);
    node.phase = Phase::Left;
}

void Cluster::on_timer(NodeId n, TimerKind kind) {
    Node& node = nodes_[n];
    if (!up(n)) return;
    switch (kind) {
        case TimerKind::Join: {
            std::vector<NmlResponse> inbox;
            inbox.swap(node.join_inbox);
            for (NodeId t : join_step(node.state, node.join, inbox, rng_)) send(MemberMsgKind::NmlPull, n, t);
            if (node.join.done()) {
                node.phase = Phase::BuildingUnl;
                for (NodeId t : build_unl_from_nml(node.state, node.build, rng_)) {
                    send(MemberMsgKind::TrustToken, n, t);
                }
                schedule(n, TimerKind::Maintain, config_.timing.t1);
            } else {
                schedule(n, TimerKind::Join, config_.timing.t4);
            }
            break;
        }
        case TimerKind::Maintain:
            maintain(n);
            schedule(n, TimerKind::Maintain, config_.timing.t1);
            break;
        case TimerKind::Heartbeat:
            ++node.heartbeat;
            for (NodeId peer : trust_targets(n)) send(MemberMsgKind::Heartbeat, n, peer);
            schedule(n, TimerKind::Heartbeat, config_.timing.t2);
            break;
        case TimerKind::Gossip: {
            auto table = table_of(n);
            for (NodeId peer : trust_targets(n)) send(MemberMsgKind::NmlResponse, n, peer, table);
            schedule(n, TimerKind::Gossip, config_.timing.t3);
            break;
        }
    }
}

void Cluster::maintain(NodeId n) {
    Node& node = nodes_[n];
    MemberState& st = node.state;

    std::vector<NodeId> acks;
    acks.swap(node.acks);
    for (NodeId t : unl_build_step(st, node.build, acks, rng_)) send(MemberMsgKind::TrustToken, n, t);

    std::vector<NodeId> deleted;
    for (auto& [peer, rec] : st.records) {
        const LivenessTick tick = tick_liveness(rec, now_, config_.timing);
        if (tick.record.state != rec.state) trace_.transition(now_, n, peer, rec.state, tick.record.state, "age");
        rec = tick.record;
        if (tick.remove) deleted.push_back(peer);
    }
    for (NodeId peer : deleted) {
        st.forget(peer);
        node.build.pending.erase(peer);
        send(MemberMsgKind::NmlPull, n, peer);  // last contact attempt
    }

    if (node.phase == Phase::BuildingUnl && node.build.done()) node.phase = Phase::Live;
    if (node.phase != Phase::Live) return;

    NodeSet pending;
    for (const auto& [p, _] : node.build.pending) pending.insert(p);
    std::vector<NodeId> wanted;
    for (NodeId peer : st.lists.nml.nml_a) {
        const auto& rec = st.records.at(peer);
        if (rec.state <= LivenessState::S2 && !st.lists.unl.unl_a.contains(peer) && !pending.contains(peer)) {
            wanted.push_back(peer);
        }
    }
    for (NodeId t : replenish_unl_b(st, pending, rng_)) wanted.push_back(t);
    for (NodeId t : wanted) {
        if (!node.guard.admit(now_, st.lists.unl.size())) break;
        send_token(n, t);
    }
}

void Cluster::deliver(const Message& m) {
    Node& node = nodes_[m.dst];
    if (!up(m.dst) || node.silent) return;
    MemberState& st = node.state;

    Contact contact{m.src, std::nullopt};
    if (m.kind == MemberMsgKind::Heartbeat) contact.heartbeat_num = m.heartbeat_num;
    if (m.kind != MemberMsgKind::NodeLeave || m.leave.node != m.src) {
        const auto before = observe(st, contact, now_);
        if (auto it = st.records.find(m.src); it != st.records.end() && before != it->second.state) {
            trace_.transition(now_, m.dst, m.src, before, it->second.state, "message");
        }
    }

    switch (m.kind) {
        case MemberMsgKind::Heartbeat: break;
        case MemberMsgKind::NmlPull: {
            send(MemberMsgKind::NmlResponse, m.dst, m.src, table_of(m.dst));
            const bool introducer =
                std::find(config_.introducers.begin(), config_.introducers.end(), m.dst) != config_.introducers.end();
            if (config_.introducer_intimation && introducer) {
                auto intro = std::make_shared<NmlTable>(NmlTable{{m.src, now_}});
                for (NodeId peer : trust_targets(m.dst)) {
                    if (peer != m.src) send(MemberMsgKind::NmlResponse, m.dst, peer, intro);
                }
            }
            break;
        }
        case MemberMsgKind::NmlResponse:
            if (node.phase == Phase::Joining) {
                node.join_inbox.push_back({m.src, *m.table});
            } else {
                st.absorb(*m.table);
            }
            break;
        case MemberMsgKind::TrustToken: {
            const NodeId to = on_trust_token(st, m.src);
            send(MemberMsgKind::Ack, m.dst, to);
            break;
        }
        case MemberMsgKind::Ack: node.acks.push_back(m.src); break;
        case MemberMsgKind::NodeLeave: {
            const LeaveOutcome out = on_node_leave(st, m.leave);
            if (out.removed) {
                trace_.transition(now_, m.dst, m.leave.node, std::nullopt, LivenessState::S4, "leave");
                node.build.pending.erase(m.leave.node);
            }
            if (out.forward) {
                ++node.leave_forwards[m.leave.node];
                for (NodeId peer : trust_targets(m.dst)) {
                    if (peer != m.src) send(MemberMsgKind::NodeLeave, m.dst, peer, nullptr, m.leave);
                }
            }
            break;
        }
    }
}

}  // namespace sissle::membership
