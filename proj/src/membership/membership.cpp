#include "sissle/membership/membership.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace sissle::membership {

std::string_view to_string(LivenessState s) {
    switch (s) {
        case LivenessState::S1: return "S1";
        case LivenessState::S2: return "S2";
        case LivenessState::S3: return "S3";
        case LivenessState::S4: return "S4";
    }
    return "?";
}

TimingParams TimingParams::from_t1(SimTime t1) {
    TimingParams t;
    t.t1 = t1;
    t.t2 = 6 * t1;
    t.t3 = 30 * t1;
    t.t4 = t1;
    t.t5 = 12 * t1;
    return t;
}

void TimingParams::validate() const {
    if (t1 <= 0 || t4 <= 0) throw ConfigError("t1 and t4 must be positive");
    if (!(t1 < t2 && t2 < t3)) throw ConfigError("timing requires t1 < t2 < t3");
    if (t5 <= s1_timeout()) throw ConfigError("t5 must exceed 6*t1");
}

MemberRecord on_message(MemberRecord record, const Contact& contact, SimTime now, bool trusted) {
    if (contact.heartbeat_num && *contact.heartbeat_num <= record.heartbeat_num) return record;
    if (contact.heartbeat_num) record.heartbeat_num = *contact.heartbeat_num;
    record.last_timestamp = std::max(record.last_timestamp, now);
    record.state = trusted ? LivenessState::S1 : LivenessState::S2;
    return record;
}

LivenessTick tick_liveness(MemberRecord record, SimTime now, const TimingParams& timing) {
    const SimTime age = now - record.last_timestamp;
    LivenessState by_age = LivenessState::S1;
    if (age > timing.s3_timeout()) {
        by_age = LivenessState::S4;
    } else if (age > timing.s2_timeout()) {
        by_age = LivenessState::S3;
    } else if (age > timing.s1_timeout()) {
        by_age = LivenessState::S2;
    }
    LivenessTick out;
    const LivenessState before = record.state;
    record.state = std::max(before, by_age);
    if (record.state == LivenessState::S4 && before != LivenessState::S4) {
        out.contact_attempt = true;
        out.remove = true;
    }
    out.record = record;
    return out;
}

bool merge_nml(NmlTable& into, const NmlTable& from) {
    bool changed = false;
    for (const auto& [node, ts] : from) {
        auto [it, inserted] = into.try_emplace(node, ts);
        if (inserted) {
            changed = true;
        } else if (ts > it->second) {
            it->second = ts;
            changed = true;
        }
    }
    return changed;
}

bool MemberState::learn(NodeId n, SimTime timestamp) {
    if (n == self) return false;
    if (auto t = tombstones.find(n); t != tombstones.end()) {
        if (timestamp <= t->second) return false;
        tombstones.erase(t);
    }
    if (auto it = records.find(n); it != records.end()) {
        it->second.last_timestamp = std::max(it->second.last_timestamp, timestamp);
        return false;
    }
    records.emplace(n, MemberRecord{n, LivenessState::S2, timestamp, 0});
    if (own_group(n)) {
        lists.nml.nml_a.insert(n);
    } else {
        lists.nml.nml_b[group_of(n)].insert(n);
    }
    return true;
}

void MemberState::forget(NodeId n) {
    SimTime last = 0;
    if (auto it = records.find(n); it != records.end()) {
        last = it->second.last_timestamp;
        records.erase(it);
    }
    auto& tomb = tombstones[n];
    tomb = std::max(tomb, last);
    const AffinityGroupId g = group_of(n);
    lists.unl.unl_a.erase(n);
    lists.nml.nml_a.erase(n);
    if (auto it = lists.unl.unl_b.find(g); it != lists.unl.unl_b.end()) it->second.erase(n);
    if (auto it = lists.nml.nml_b.find(g); it != lists.nml.nml_b.end()) it->second.erase(n);
    lists.tnl.members.erase(n);
}

NmlTable MemberState::nml_table() const {
    NmlTable t;
    for (const auto& [n, rec] : records) t.emplace_hint(t.end(), n, rec.last_timestamp);
    return t;
}

bool MemberState::absorb(const NmlTable& table) {
    bool added = false;
    for (const auto& [n, ts] : table) added = learn(n, ts) || added;
    return added;
}

std::size_t MemberState::live_unl_b(AffinityGroupId g) const {
    auto it = lists.unl.unl_b.find(g);
    if (it == lists.unl.unl_b.end()) return 0;
    std::size_t live = 0;
    for (NodeId n : it->second) {
        auto r = records.find(n);
        if (r != records.end() && r->second.state <= LivenessState::S2) ++live;
    }
    return live;
}

std::optional<LivenessState> observe(MemberState& state, const Contact& contact, SimTime now) {
    if (contact.sender == state.self) return std::nullopt;
    std::optional<LivenessState> before;
    if (auto it = state.records.find(contact.sender); it != state.records.end()) {
        before = it->second.state;
    } else {
        state.learn(contact.sender, now);
    }
    auto it = state.records.find(contact.sender);
    if (it == state.records.end()) return before;
    it->second = on_message(it->second, contact, now, state.trusted(contact.sender));
    return before;
}

namespace {

std::vector<NodeId> members_in(const NodeSet& set, AffinityGroupId g, const MemberState& state) {
    std::vector<NodeId> out;
    for (NodeId n : set) {
        if (state.group_of(n) == g) out.push_back(n);
    }
    return out;
}

std::size_t count_in_group(const NodeSet& set, AffinityGroupId g, const MemberState& state) {
    return members_in(set, g, state).size();
}

}  // namespace

std::vector<NodeId> join_step(MemberState& state, JoinProgress& progress, const std::vector<NmlResponse>& inbox,
                              Rng& rng) {
    bool changed = false;
    for (const NmlResponse& r : inbox) {
        progress.responded.insert(r.from);
        progress.pending_retries.erase(r.from);
        changed = state.absorb(r.table) || changed;
    }
    ++progress.iteration;
    // an iteration still waiting on retries is not quiet yet
    bool waiting = false;
    for (const auto& [_, retries] : progress.pending_retries) waiting = waiting || retries < state.params.d;
    if (progress.iteration > 1) {
        progress.unchanged_iterations = changed || waiting ? 0 : progress.unchanged_iterations + 1;
    }
    if (progress.done()) return {};

    std::vector<NodeId> targets;
    std::vector<NodeId> dropped;
    for (auto& [n, retries] : progress.pending_retries) {
        if (retries >= state.params.d) {
            dropped.push_back(n);
        } else {
            ++retries;
            targets.push_back(n);
        }
    }
    for (NodeId n : dropped) {
        progress.pending_retries.erase(n);
        progress.abandoned.insert(n);
    }

    auto pull = [&](NodeId n) {
        progress.contacted.insert(n);
        progress.pending_retries[n] = 0;
        targets.push_back(n);
    };

    NodeSet fixed = state.lists.nml.nml_a;
    fixed.insert(state.lists.nml.nml_c.begin(), state.lists.nml.nml_c.end());
    for (NodeId n : fixed) {
        if (n != state.self && !progress.contacted.contains(n)) pull(n);
    }

    const AffinityGroupId own = state.group_of(state.self);
    const std::size_t quota_base = static_cast<std::size_t>(state.params.c) * state.params.b;
    for (const auto& [g, members] : state.lists.nml.nml_b) {
        if (g == own) continue;
        const std::size_t contacted = count_in_group(progress.contacted, g, state);
        const std::size_t responders = count_in_group(progress.responded, g, state);
        std::size_t quota = quota_base;
        if (responders < state.params.c) quota += count_in_group(progress.abandoned, g, state);
        if (contacted >= quota) continue;
        std::vector<NodeId> fresh;
        for (NodeId n : members) {
            if (!progress.contacted.contains(n)) fresh.push_back(n);
        }
        for (NodeId n : rng.sample(std::span<const NodeId>(fresh), quota - contacted)) pull(n);
    }
    return targets;
}

std::vector<NodeId> build_unl_from_nml(MemberState& state, UnlBuild& build, Rng& rng) {
    build.started = true;
    std::vector<NodeId> tokens;
    auto send = [&](NodeId n) {
        build.tried.insert(n);
        build.pending[n] = 1;
        tokens.push_back(n);
    };
    for (NodeId n : state.lists.nml.nml_a) send(n);
    for (const auto& [g, members] : state.lists.nml.nml_b) {
        if (g == state.group_of(state.self)) continue;
        const std::vector<NodeId> pool(members.begin(), members.end());
        for (NodeId n : rng.sample(std::span<const NodeId>(pool), state.params.c)) send(n);
        if (pool.size() < state.params.c) {
            build.shortfalls.push_back({state.self, g, state.params.c, static_cast<std::uint32_t>(pool.size())});
        }
    }
    return tokens;
}

std::vector<NodeId> unl_build_step(MemberState& state, UnlBuild& build, const std::vector<NodeId>& acks, Rng& rng) {
    for (NodeId a : acks) {
        if (!build.tried.contains(a) || !state.knows(a)) continue;
        build.pending.erase(a);
        if (state.own_group(a)) {
            state.lists.unl.unl_a.insert(a);
        } else {
            state.lists.unl.unl_b[state.group_of(a)].insert(a);
        }
    }

    std::vector<NodeId> tokens;
    std::vector<NodeId> failed;
    for (auto& [n, sent] : build.pending) {
        if (sent > state.params.d) {
            failed.push_back(n);
        } else {
            ++sent;
            tokens.push_back(n);
        }
    }
    for (NodeId n : failed) {
        build.pending.erase(n);
        build.failed.insert(n);
        if (state.own_group(n)) continue;
        const AffinityGroupId g = state.group_of(n);
        const std::size_t have = state.lists.unl.unl_b[g].size();
        std::size_t waiting = 0;
        for (const auto& [p, _] : build.pending) waiting += state.group_of(p) == g ? 1 : 0;
        if (have + waiting >= state.params.c) continue;
        std::vector<NodeId> untried;
        if (auto it = state.lists.nml.nml_b.find(g); it != state.lists.nml.nml_b.end()) {
            for (NodeId m : it->second) {
                if (!build.tried.contains(m)) untried.push_back(m);
            }
        }
        if (untried.empty()) {
            build.shortfalls.push_back(
                {state.self, g, state.params.c, static_cast<std::uint32_t>(have + waiting)});
            continue;
        }
        const NodeId sub = untried[rng.index(untried.size())];
        build.tried.insert(sub);
        build.pending[sub] = 1;
        tokens.push_back(sub);
    }
    return tokens;
}

NodeId on_trust_token(MemberState& state, NodeId sender) {
    state.lists.tnl.members.insert(sender);
    return sender;
}

LeaveOutcome on_node_leave(MemberState& state, const NodeLeave& leave) {
    if (leave.node == state.self) return {};
    if (!state.seen_leaves.insert({leave.node, leave.timestamp}).second) return {};
    const bool present = state.knows(leave.node) || state.trusted(leave.node) ||
                         state.lists.nml.nml_c.contains(leave.node);
    if (!present) return {};
    state.forget(leave.node);
    state.lists.nml.nml_c.erase(leave.node);
    auto& tomb = state.tombstones[leave.node];
    tomb = std::max(tomb, leave.timestamp);
    return {true, true};
}

std::vector<NodeId> replenish_unl_b(const MemberState& state, const NodeSet& pending, Rng& rng) {
    std::vector<NodeId> tokens;
    const std::uint32_t c = state.params.c;
    const AffinityGroupId own = state.group_of(state.self);
    for (const auto& [g, members] : state.lists.nml.nml_b) {
        if (g == own || members.empty()) continue;
        const std::size_t live = state.live_unl_b(g) + count_in_group(pending, g, state);
        if (live >= c) continue;
        const NodeSet* current = nullptr;
        if (auto it = state.lists.unl.unl_b.find(g); it != state.lists.unl.unl_b.end()) current = &it->second;
        std::vector<NodeId> candidates;
        for (NodeId n : members) {
            if (current != nullptr && current->contains(n)) continue;
            if (pending.contains(n)) continue;
            auto r = state.records.find(n);
            if (r == state.records.end() || r->second.state > LivenessState::S2) continue;
            candidates.push_back(n);
        }
        const std::size_t want = members.size() < c ? candidates.size() : c - live;
        for (NodeId n : rng.sample(std::span<const NodeId>(candidates), want)) tokens.push_back(n);
    }
    return tokens;
}

bool UnlChangeGuard::admit(SimTime now, std::size_t unl_size) {
    recent(now);
    const auto budget = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(tolerance_ * unl_size + 1e-9)));
    if (changes_.size() >= budget) return false;
    changes_.push_back(now);
    return true;
}

std::size_t UnlChangeGuard::recent(SimTime now) {
    while (!changes_.empty() && changes_.front() <= now - window_) changes_.pop_front();
    return changes_.size();
}

void MembershipTrace::transition(SimTime now, NodeId node, NodeId peer, std::optional<LivenessState> from,
                                 LivenessState to, std::string_view reason) {
    if (out_ == nullptr) return;
    *out_ << to_ms(now) << ' ' << node << ' ' << peer << ' ' << (from ? to_string(*from) : std::string_view("-"))
          << ' ' << to_string(to) << ' ' << reason << '\n';
}

}  // namespace sissle::membership
