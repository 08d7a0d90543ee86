#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sissle/netsim/netsim.hpp"

namespace sissle::analysis {

using netsim::CaseResult;
using netsim::ScenarioConfig;

enum class Severity : std::uint8_t { Ideal, RealWorld, Mild, ModerateSevere, VerySevere };

struct SeverityPreset {
    Severity name = Severity::Ideal;
    double pct_malicious = 0.0;
    double min_lf = 0.0;
    double max_lf = 0.0;
    double pct_links = 0.0;
    double pct_nodes = 0.0;
    double ncp = 100.0;

    friend bool operator==(const SeverityPreset&, const SeverityPreset&) = default;
};

SeverityPreset severity_preset(Severity s);
Severity parse_severity(std::string_view name);  // throws ConfigError
std::string_view to_string(Severity s);
std::vector<Severity> all_severities();
void apply_preset(ScenarioConfig& config, const SeverityPreset& preset);

// 1500 cases for odd modes, 5000 for even ones.
std::uint32_t default_seed_max(std::uint32_t mode);

// Identifies the population a batch was drawn from, minus the variant, so
// that batches of different systems can be checked for comparability.
struct BatchKey {
    std::uint32_t mode = 0;
    std::uint32_t num_nodes = 0;
    std::uint64_t base_seed = 0;
    std::uint32_t cases = 0;
    std::uint64_t scenario = 0;  // hash of the variant-independent settings

    friend bool operator==(const BatchKey&, const BatchKey&) = default;
};

BatchKey batch_key(const ScenarioConfig& config, std::uint64_t base_seed);

// Aggregates over one batch. Time columns cover successful cases only and
// distance columns cover cases with a finite max distance; each is -1 when
// its population is empty. Standard deviations are population SDs.
struct BatchStats {
    double avg_time = -1.0;
    double sd_time = -1.0;
    double psc = 0.0;
    double avg_sent = 0.0;
    double sd_sent = 0.0;
    double avg_recvd = 0.0;
    double sd_recvd = 0.0;
    double avg_agn = 0.0;
    double sd_agn = 0.0;
    double avg_pct_malicious = 0.0;
    double avg_dist = -1.0;
    double sd_dist = -1.0;
    double max_dist = -1.0;
    double ps2c = 0.0;
    bool all_failed = true;

    friend bool operator==(const BatchStats&, const BatchStats&) = default;
};

BatchStats summarize(std::span<const CaseResult> cases);

// SISSLE_WORKERS, else the hardware concurrency, at least 1.
unsigned default_workers();

// Cases base_seed .. base_seed + seed_max - 1, in seed order.
std::vector<CaseResult> run_cases(const ScenarioConfig& config, std::uint64_t base_seed, unsigned workers = 0);
BatchStats run_batch(const ScenarioConfig& config, std::uint64_t base_seed, unsigned workers = 0);

// Ratios of a subject system against a baseline; empty when undefined.
struct ComparisonReport {
    std::optional<double> speedup;        // baseline time / subject time
    std::optional<double> success_ratio;  // subject psc / baseline psc
    std::optional<double> sent_ratio;     // subject sent / baseline sent
    std::optional<double> recvd_ratio;    // subject recvd / baseline recvd
    std::optional<double> hop3_ratio;     // subject ps2c / baseline ps2c
};

ComparisonReport compare(const BatchStats& subject, const BatchStats& baseline);
// As above; throws ConfigError when the batches come from different populations.
ComparisonReport compare(const BatchKey& subject_key, const BatchStats& subject, const BatchKey& baseline_key,
                         const BatchStats& baseline);

enum class Format : std::uint8_t { Csv, Json };
Format parse_format(std::string_view name);

// Header: AvTime..PS2C then all_failed.
std::string csv_header();
std::string csv_row(const BatchStats& s);
std::string to_csv(const BatchStats& s);
BatchStats stats_from_csv(const std::string& text);
std::string to_json(const BatchStats& s);
BatchStats stats_from_json(const std::string& text);
std::string to_csv(const ComparisonReport& r);
std::string to_json(const ComparisonReport& r);

// One cell of a sweep: a labelled configuration and its result.
struct SweepCell {
    std::string label;
    ScenarioConfig config;
    BatchStats stats;
};

enum class SweepKind : std::uint8_t { Severity, Malicious, NetworkIssues, Eclipse, LinkLatency };
SweepKind parse_sweep_kind(std::string_view name);

// Configurations of the default sweeps, built from `base` (whose variant,
// overlay and engine settings are kept).
//   Severity       modes 1 and 2, every preset, each paired with a baseline
//                  cell: no malicious nodes or network issues, same NCP
//   Malicious      percentage_malicious 0..90 step 10 in base.mode
//   NetworkIssues  mode 1, NCP 100, 75% of links on every node slowed by
//                  each preset's factor range
//   Eclipse        modes 5, 6 at {0,5,15,25,35}; mode 8 at {0,100}
//   LinkLatency    mode 1 with k in {1,2,3} and l in {1..5}
std::vector<SweepCell> sweep_cells(SweepKind kind, const ScenarioConfig& base);
void run_sweep(std::vector<SweepCell>& cells, std::uint64_t base_seed, unsigned workers = 0);
std::string sweep_csv(const std::vector<SweepCell>& cells);
std::string sweep_json(const std::vector<SweepCell>& cells);

}  // namespace sissle::analysis
