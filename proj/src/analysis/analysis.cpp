#include "sissle/analysis/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace sissle::analysis {

namespace {

using nlohmann::json;

constexpr const char* kColumns[] = {"AvTime", "PSC", "AvSM",  "AvRM", "AvAGN", "SDTime", "SDSM",
                                    "SDRM",   "SDAGN", "AvPMN", "AvD",  "SDD",   "MD",     "PS2C"};

// Column order of kColumns.
std::vector<double*> fields(BatchStats& s) {
    return {&s.avg_time, &s.psc,    &s.avg_sent,          &s.avg_recvd, &s.avg_agn, &s.sd_time, &s.sd_sent,
            &s.sd_recvd, &s.sd_agn, &s.avg_pct_malicious, &s.avg_dist,  &s.sd_dist, &s.max_dist, &s.ps2c};
}

std::vector<double> values(const BatchStats& s) {
    BatchStats copy = s;
    std::vector<double> out;
    for (double* f : fields(copy)) out.push_back(*f);
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Mean and population SD with Welford's update.
struct Moments {
    std::uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }
    double sd() const { return n ? std::sqrt(m2 / static_cast<double>(n)) : 0.0; }
};

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw ConfigError("not a number: " + s);
    return v;
}

json ratio_json(const std::optional<double>& r) { return r ? json(*r) : json("undefined"); }

std::string ratio_text(const std::optional<double>& r) { return r ? fmt(*r) : "undefined"; }

std::optional<double> ratio(double num, double den, bool defined = true) {
    if (!defined || den == 0.0 || num < 0.0 || den < 0.0) return std::nullopt;
    return num / den;
}

json stats_json(const BatchStats& s) {
    json j = json::object();
    const auto v = values(s);
    for (std::size_t i = 0; i < v.size(); ++i) j[kColumns[i]] = v[i];
    j["all_failed"] = s.all_failed;
    return j;
}

std::string severity_label(const ScenarioConfig& c) {
    for (Severity s : all_severities()) {
        const auto p = severity_preset(s);
        // With network issues off the affected percentages do not matter.
        const bool ni_match = c.min_latency_factor_ni == p.min_lf && c.max_latency_factor_ni == p.max_lf &&
                              (!c.ni_enabled() || (c.percent_links_ni == p.pct_links && c.percent_nodes_ni == p.pct_nodes));
        if (c.percentage_malicious == p.pct_malicious && ni_match && c.network_consensus_percent == p.ncp) {
            return std::string(to_string(s));
        }
    }
    return "custom";
}

}  // namespace

SeverityPreset severity_preset(Severity s) {
    switch (s) {
        case Severity::Ideal: return {s, 0, 0, 0, 0, 100, 100};
        case Severity::RealWorld: return {s, 20, 1.5, 2.0, 25, 100, 80};
        case Severity::Mild: return {s, 40, 3.0, 3.5, 50, 100, 60};
        case Severity::ModerateSevere: return {s, 60, 4.5, 5.0, 75, 100, 40};
        case Severity::VerySevere: return {s, 80, 6.5, 7.0, 75, 100, 20};
    }
    throw ConfigError("unknown severity");
}

std::string_view to_string(Severity s) {
    switch (s) {
        case Severity::Ideal: return "Ideal";
        case Severity::RealWorld: return "RealWorld";
        case Severity::Mild: return "Mild";
        case Severity::ModerateSevere: return "ModerateSevere";
        case Severity::VerySevere: return "VerySevere";
    }
    return "?";
}

Severity parse_severity(std::string_view name) {
    for (Severity s : all_severities()) {
        if (name == to_string(s)) return s;
    }
    throw ConfigError("unknown severity: " + std::string(name));
}

std::vector<Severity> all_severities() {
    return {Severity::Ideal, Severity::RealWorld, Severity::Mild, Severity::ModerateSevere, Severity::VerySevere};
}

void apply_preset(ScenarioConfig& config, const SeverityPreset& p) {
    config.percentage_malicious = p.pct_malicious;
    config.min_latency_factor_ni = p.min_lf;
    config.max_latency_factor_ni = p.max_lf;
    config.percent_links_ni = p.pct_links;
    config.percent_nodes_ni = p.pct_nodes;
    config.network_consensus_percent = p.ncp;
}

std::uint32_t default_seed_max(std::uint32_t mode) { return mode % 2 == 1 ? 1500 : 5000; }

BatchKey batch_key(const ScenarioConfig& c, std::uint64_t base_seed) {
    const json j{
        {"mode", c.mode},
        {"num_nodes", c.overlay.num_nodes},
        {"percentage_malicious", c.percentage_malicious},
        {"network_consensus_percent", c.network_consensus_percent},
        {"ni", {c.min_latency_factor_ni, c.max_latency_factor_ni, c.percent_nodes_ni, c.percent_links_ni}},
        {"percentage_eclipsed", c.percentage_eclipsed},
        {"upper_limit", {c.is_upper_limit_malicious_applicable, c.upper_limit_malicious}},
        {"latency_ms", {c.min_latency_ms, c.max_latency_ms}},
    };
    return {c.mode, c.overlay.num_nodes, base_seed, c.seed_max, netsim::fnv1a64(j.dump())};
}

BatchStats summarize(std::span<const CaseResult> cases) {
    BatchStats s;
    if (cases.empty()) return s;
    Moments time, sent, recvd, agn, dist;
    double pct_mal = 0.0;
    std::uint64_t ok = 0, ok2 = 0;
    std::int32_t max_dist = -1;
    for (const auto& r : cases) {
        if (r.success) {
            ++ok;
            time.add(r.elapsed_ms);
        }
        ok2 += r.success2 ? 1 : 0;
        sent.add(static_cast<double>(r.sent_msgs));
        recvd.add(static_cast<double>(r.recvd_msgs));
        agn.add(r.actual_genuine_nodes);
        pct_mal += r.pct_malicious_realized;
        if (r.max_shortest_dist != netsim::kUnreachable) {
            dist.add(r.max_shortest_dist);
            max_dist = std::max(max_dist, r.max_shortest_dist);
        }
    }
    const auto n = static_cast<double>(cases.size());
    s.all_failed = ok == 0;
    if (ok) {
        s.avg_time = time.mean;
        s.sd_time = time.sd();
    }
    s.psc = 100.0 * static_cast<double>(ok) / n;
    s.ps2c = 100.0 * static_cast<double>(ok2) / n;
    s.avg_sent = sent.mean;
    s.sd_sent = sent.sd();
    s.avg_recvd = recvd.mean;
    s.sd_recvd = recvd.sd();
    s.avg_agn = agn.mean;
    s.sd_agn = agn.sd();
    s.avg_pct_malicious = pct_mal / n;
    if (dist.n) {
        s.avg_dist = dist.mean;
        s.sd_dist = dist.sd();
        s.max_dist = max_dist;
    }
    return s;
}

unsigned default_workers() {
    if (const char* env = std::getenv("SISSLE_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    return std::max(1U, std::thread::hardware_concurrency());
}

std::vector<CaseResult> run_cases(const ScenarioConfig& config, std::uint64_t base_seed, unsigned workers) {
    config.validate();
    if (workers == 0) workers = default_workers();
    std::vector<CaseResult> out(config.seed_max);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < out.size(); i = next++) out[i] = netsim::run_case(config, base_seed + i);
    };
    workers = std::min<unsigned>(workers, config.seed_max);
    if (workers <= 1) {
        work();
        return out;
    }
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    pool.clear();
    return out;
}

BatchStats run_batch(const ScenarioConfig& config, std::uint64_t base_seed, unsigned workers) {
    const auto cases = run_cases(config, base_seed, workers);
    return summarize(cases);
}

ComparisonReport compare(const BatchStats& subject, const BatchStats& baseline) {
    ComparisonReport r;
    r.speedup = ratio(baseline.avg_time, subject.avg_time, !subject.all_failed && !baseline.all_failed);
    r.success_ratio = ratio(subject.psc, baseline.psc);
    r.sent_ratio = ratio(subject.avg_sent, baseline.avg_sent);
    r.recvd_ratio = ratio(subject.avg_recvd, baseline.avg_recvd);
    r.hop3_ratio = ratio(subject.ps2c, baseline.ps2c);
    return r;
}

ComparisonReport compare(const BatchKey& subject_key, const BatchStats& subject, const BatchKey& baseline_key,
                         const BatchStats& baseline) {
    if (!(subject_key == baseline_key)) throw ConfigError("batches come from different configurations");
    return compare(subject, baseline);
}

Format parse_format(std::string_view name) {
    if (name == "csv") return Format::Csv;
    if (name == "json") return Format::Json;
    throw ConfigError("format must be csv or json");
}

std::string csv_header() {
    std::string h;
    for (const char* c : kColumns) h += std::string(c) + ",";
    return h + "all_failed";
}

std::string csv_row(const BatchStats& s) {
    std::string row;
    for (double v : values(s)) row += fmt(v) + ",";
    return row + (s.all_failed ? "true" : "false");
}

std::string to_csv(const BatchStats& s) { return csv_header() + "\n" + csv_row(s) + "\n"; }

BatchStats stats_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string header, row;
    if (!std::getline(is, header) || !std::getline(is, row)) throw ConfigError("CSV needs a header and a row");
    if (header != csv_header()) throw ConfigError("unexpected CSV header");
    const auto cells = split(row, ',');
    if (cells.size() != std::size(kColumns) + 1) throw ConfigError("unexpected CSV column count");
    BatchStats s;
    const auto f = fields(s);
    for (std::size_t i = 0; i < f.size(); ++i) *f[i] = parse_double(cells[i]);
    if (cells.back() != "true" && cells.back() != "false") throw ConfigError("all_failed must be true or false");
    s.all_failed = cells.back() == "true";
    return s;
}

std::string to_json(const BatchStats& s) { return stats_json(s).dump(); }

BatchStats stats_from_json(const std::string& text) {
    const json j = json::parse(text);
    BatchStats s;
    const auto f = fields(s);
    for (std::size_t i = 0; i < f.size(); ++i) *f[i] = j.at(kColumns[i]).get<double>();
    s.all_failed = j.at("all_failed").get<bool>();
    return s;
}

std::string to_csv(const ComparisonReport& r) {
    return "speedup,success_ratio,sent_ratio,recvd_ratio,hop3_ratio\n" + ratio_text(r.speedup) + "," +
           ratio_text(r.success_ratio) + "," + ratio_text(r.sent_ratio) + "," + ratio_text(r.recvd_ratio) + "," +
           ratio_text(r.hop3_ratio) + "\n";
}

std::string to_json(const ComparisonReport& r) {
    return json{{"speedup", ratio_json(r.speedup)},
                {"success_ratio", ratio_json(r.success_ratio)},
                {"sent_ratio", ratio_json(r.sent_ratio)},
                {"recvd_ratio", ratio_json(r.recvd_ratio)},
                {"hop3_ratio", ratio_json(r.hop3_ratio)}}
        .dump();
}

SweepKind parse_sweep_kind(std::string_view name) {
    if (name == "severity") return SweepKind::Severity;
    if (name == "malicious") return SweepKind::Malicious;
    if (name == "ni") return SweepKind::NetworkIssues;
    if (name == "eclipse") return SweepKind::Eclipse;
    if (name == "llf") return SweepKind::LinkLatency;
    throw ConfigError("sweep must be severity, malicious, ni, eclipse or llf");
}

std::vector<SweepCell> sweep_cells(SweepKind kind, const ScenarioConfig& base) {
    std::vector<SweepCell> cells;
    auto add = [&](ScenarioConfig c, std::string label) {
        cells.push_back({std::move(label), std::move(c), {}});
    };
    switch (kind) {
        case SweepKind::Severity:
            for (std::uint32_t mode : {1U, 2U}) {
                for (Severity s : all_severities()) {
                    const auto p = severity_preset(s);
                    auto c = base;
                    c.mode = mode;
                    apply_preset(c, p);
                    add(c, std::string(to_string(s)));
                    apply_preset(c, severity_preset(Severity::Ideal));
                    c.network_consensus_percent = p.ncp;
                    add(c, "baseline/" + std::string(to_string(s)));
                }
            }
            break;
        case SweepKind::Malicious:
            for (int pct = 0; pct <= 90; pct += 10) {
                auto c = base;
                c.percentage_malicious = pct;
                add(c, "malicious=" + std::to_string(pct));
            }
            break;
        case SweepKind::NetworkIssues:
            for (Severity s : all_severities()) {
                const auto p = severity_preset(s);
                if (p.max_lf == 0.0) continue;
                auto c = base;
                c.mode = 1;
                apply_preset(c, severity_preset(Severity::Ideal));
                c.min_latency_factor_ni = p.min_lf;
                c.max_latency_factor_ni = p.max_lf;
                c.percent_links_ni = 75;
                c.percent_nodes_ni = 100;
                add(c, "ni=" + std::string(to_string(s)));
            }
            break;
        case SweepKind::Eclipse:
            for (std::uint32_t mode : {5U, 6U}) {
                for (int pct : {0, 5, 15, 25, 35}) {
                    auto c = base;
                    c.mode = mode;
                    c.percentage_eclipsed = pct;
                    add(c, "eclipsed=" + std::to_string(pct));
                }
            }
            for (int pct : {0, 100}) {
                auto c = base;
                c.mode = 8;
                c.percentage_eclipsed = pct;
                add(c, "eclipsed=" + std::to_string(pct));
            }
            break;
        case SweepKind::LinkLatency:
            // SimC has a single factor, so it only gets the k == l cells.
            for (int k = 1; k <= 3; ++k) {
                for (int l = 1; l <= 5; ++l) {
                    if (base.variant == netsim::Variant::SimC && k != l) continue;
                    auto c = base;
                    c.mode = 1;
                    c.unla_llf_max = k;
                    c.unlb_llf_max = l;
                    add(c, "k=" + std::to_string(k) + " l=" + std::to_string(l));
                }
            }
            break;
    }
    return cells;
}

void run_sweep(std::vector<SweepCell>& cells, std::uint64_t base_seed, unsigned workers) {
    for (auto& cell : cells) cell.stats = run_batch(cell.config, base_seed, workers);
}

std::string sweep_csv(const std::vector<SweepCell>& cells) {
    std::string out = "variant,mode,severity,label," + csv_header() + "\n";
    for (const auto& cell : cells) {
        out += std::string(overlay::to_string(cell.config.variant)) + "," + std::to_string(cell.config.mode) + "," +
               severity_label(cell.config) + "," + cell.label + "," + csv_row(cell.stats) + "\n";
    }
    return out;
}

std::string sweep_json(const std::vector<SweepCell>& cells) {
    json arr = json::array();
    for (const auto& cell : cells) {
        char hash[17];
        std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(cell.config.hash()));
        arr.push_back({{"variant", overlay::to_string(cell.config.variant)},
                       {"mode", cell.config.mode},
                       {"severity", severity_label(cell.config)},
                       {"label", cell.label},
                       {"config_hash", hash},
                       {"stats", stats_json(cell.stats)}});
    }
    return arr.dump(2);
}

}  // namespace sissle::analysis
