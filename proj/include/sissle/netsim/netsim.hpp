#pragma once

#include <cstdint>
#include <iosfwd>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "sissle/common/rng.hpp"
#include "sissle/common/types.hpp"
#include "sissle/consensus/consensus.hpp"
#include "sissle/overlay/overlay.hpp"

namespace sissle::netsim {

using overlay::Variant;

// Who a node sends its digests to, as a filter over its links.
enum class RecipientScope : std::uint8_t { Links, UnlOnly, TnlOnly };

struct ScenarioConfig {
    Variant variant = Variant::SimK;
    std::uint32_t mode = 2;  // 1..6 and 8
    overlay::OverlayParams overlay;

    double percentage_malicious = 0.0;
    double network_consensus_percent = 100.0;
    double min_latency_factor_ni = 0.0;  // 0/0 disables network issues
    double max_latency_factor_ni = 0.0;
    double percent_nodes_ni = 0.0;
    double percent_links_ni = 0.0;
    double percentage_eclipsed = 0.0;
    std::uint32_t seed_max = 1;
    std::uint32_t upper_limit_malicious = 0;  // 0 = (c+1)(sqrt(N)-1)
    bool is_upper_limit_malicious_applicable = false;

    // Link latency factors for intra-group (k) and inter-group (l) links.
    double unla_llf_max = 1.0;
    double unlb_llf_max = 1.0;
    double min_latency_ms = 5.0;
    double max_latency_ms = 50.0;

    consensus::EngineConfig engine;
    RecipientScope recipients = RecipientScope::Links;

    bool consensus_mode() const { return mode == 1 || mode == 3 || mode == 5; }
    bool has_target() const { return mode >= 3; }
    bool eclipse_mode() const { return mode == 5 || mode == 6 || mode == 8; }
    bool ni_enabled() const { return !(min_latency_factor_ni == 0.0 && max_latency_factor_ni == 0.0); }
    std::uint32_t upper_limit() const;

    // Throws ConfigError on any violated invariant.
    void validate() const;
    std::string to_json() const;
    // FNV-1a 64 over the canonical JSON form.
    std::uint64_t hash() const;
};

ScenarioConfig scenario_from_json(const std::string& text);
std::uint64_t fnv1a64(const std::string& bytes);

// Per directed link: base latency and network-issue factor, parallel to
// Topology::neighbors.
struct LinkModel {
    std::vector<std::vector<SimTime>> base;  // microseconds, llf applied
    std::vector<std::vector<double>> ni_factor;

    SimTime latency(NodeId a, std::size_t index) const {
        return static_cast<SimTime>(std::llround(static_cast<double>(base[a][index]) * ni_factor[a][index]));
    }
};

LinkModel build_link_model(const overlay::Topology& topology, const ScenarioConfig& config, Rng& rng);

// percent_nodes_ni of nodes; for each, percent_links_ni of its outgoing
// links get a factor drawn from [min, max).
void apply_network_issues(LinkModel& links, const ScenarioConfig& config, Rng& rng);

struct Placement {
    std::vector<bool> malicious;
    std::vector<NodeId> eclipsers;
    std::vector<NodeId> random_malicious;
    NodeId source = 0;
    std::int64_t target = -1;  // -1 when the mode has none
    std::uint32_t eclipse_requested = 0;  // before the all-but-one clamp
    std::uint32_t malicious_count() const;
};

// Target, then its eclipsers, then random malicious nodes, then a genuine
// source. Eclipsers come from the target's UNL (modes 5, 6) or links (8).
Placement place_malicious(const ScenarioConfig& config, const overlay::Topology& topology, Rng& rng);

constexpr std::int32_t kUnreachable = -1;

// Hop counts from `source` over `adjacency` with `removed` nodes deleted.
std::vector<std::int32_t> shortest_distances(const std::vector<std::vector<NodeId>>& adjacency,
                                             const std::vector<bool>& removed, NodeId source);

struct SuccessInput {
    std::uint32_t num_nodes = 0;
    std::uint32_t genuine = 0;
    std::uint32_t reached = 0;  // received (propagation) or closed (consensus)
    bool target_reached = false;
    bool all_genuine_received = false;
    std::int32_t max_distance = 0;
};

struct SuccessOutcome {
    bool success = false;
    bool success2 = false;
    double effective_ncp = 0.0;
    std::uint32_t required = 0;
};

// Network_Consensus_Percent is clamped to the realised genuine percentage.
double effective_ncp(double ncp, std::uint32_t genuine, std::uint32_t num_nodes);
std::uint32_t required_nodes(double ncp, std::uint32_t genuine, std::uint32_t num_nodes);
SuccessOutcome success_predicate(std::uint32_t mode, double ncp, const SuccessInput& in);

struct CaseResult {
    std::uint64_t seed = 0;
    bool success = false;
    bool success2 = false;
    double elapsed_ms = 0.0;  // time success was reached, else end of case
    std::uint64_t sent_msgs = 0;
    std::uint64_t recvd_msgs = 0;
    std::uint32_t actual_genuine_nodes = 0;
    double pct_malicious_realized = 0.0;
    std::int32_t max_shortest_dist = 0;  // kUnreachable if a genuine node is cut off
    double avg_shortest_dist = 0.0;
    std::uint32_t received = 0;  // genuine nodes holding the transaction
    std::uint32_t closed = 0;    // genuine nodes that closed it
    bool forked = false;         // genuine last_closed sets differ

    friend bool operator==(const CaseResult&, const CaseResult&) = default;
};

std::string to_json_line(const CaseResult& r, const ScenarioConfig& config);

enum class EmissionKind : std::uint8_t { Candidate, Proposal };

// One digest handed to the network.
struct Emission {
    SimTime at = 0;
    NodeId src = 0;
    EmissionKind kind = EmissionKind::Candidate;
    bool own = false;  // the sender's own candidate set or proposal
    std::uint32_t sub_round = 0;
    std::vector<NodeId> origins;
    std::vector<consensus::TxnId> txns;  // txns carried (candidate) or voted yes (proposal)
    std::uint32_t recipients = 0;

    friend bool operator==(const Emission&, const Emission&) = default;
};

struct EventLog {
    std::vector<Emission> emissions;
    friend bool operator==(const EventLog&, const EventLog&) = default;
};

void write_event_log(std::ostream& out, const EventLog& log);

// Everything a test might want to inspect after a case.
struct CaseDetail {
    overlay::Topology topology;
    Placement placement;
    std::vector<SimTime> received_at;  // -1 if never
    std::vector<SimTime> closed_at;    // -1 if never
    std::vector<std::set<consensus::TxnId>> last_closed;
    std::vector<std::int32_t> distances;
    std::vector<double> thresholds;  // final threshold per node (consensus modes)
};

struct RunOptions {
    EventLog* log = nullptr;
    CaseDetail* detail = nullptr;
    consensus::ConsensusTrace* trace = nullptr;
};

// One case, fully determined by (config, seed).
CaseResult run_case(const ScenarioConfig& config, std::uint64_t seed, const RunOptions& options = {});

}  // namespace sissle::netsim
