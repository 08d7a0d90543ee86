#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "sissle/analysis/analysis.hpp"
#include "sissle/overlay/path_census.hpp"

using namespace sissle;
namespace an = sissle::analysis;
namespace ns = sissle::netsim;

namespace {

// Raw flag values; folded into a ScenarioConfig after parsing so that
// explicit flags override a --severity preset.
struct Flags {
    std::string variant = "SimK";
    std::uint32_t mode = 2;
    std::uint32_t num_nodes = 256;
    std::uint32_t c = 2, b = 2, d = 5;
    std::string ratio = "10/256";
    double pct_malicious = 0, ncp = 100;
    double min_lf = 0, max_lf = 0, pct_nodes = 0, pct_links = 0;
    double pct_eclipsed = 0;
    std::uint64_t seed = 0;
    std::uint32_t seed_max = 0;  // 0 = mode default
    std::string severity;
    double unla = 1, unlb = 1;
    std::string upper_limit;
    std::uint32_t bandwidth_cap = 0;
    std::string assimilation = "all";
    bool forward_as_set = false;
    std::string format = "csv";
    std::string out;
};

constexpr const char* kSeverityFlags[] = {
    "--percentage-malicious",  "--network-consensus-percent", "--min-latency-factor-ni",
    "--max-latency-factor-ni", "--percent-nodes-ni",          "--percent-links-ni",
};

bool given(const CLI::App& app, const char* flag) { return app.get_option(flag)->count() > 0; }

void add_scenario_flags(CLI::App& app, Flags& f) {
    app.add_option("--variant", f.variant, "SimC, SimRM or SimK")->capture_default_str();
    app.add_option("--mode", f.mode, "1-6 or 8")->capture_default_str();
    app.add_option("--num-nodes", f.num_nodes, "a perfect square")->capture_default_str();
    app.add_option("--c", f.c, "UNL-B picks per foreign group")->capture_default_str();
    app.add_option("--b", f.b, "NML-B multiplier")->capture_default_str();
    app.add_option("--d", f.d, "retry limit")->capture_default_str();
    app.add_option("--outbound-links-to-node-ratio", f.ratio, "SimC links per node, as num/den")
        ->capture_default_str();
    app.add_option(kSeverityFlags[0], f.pct_malicious)->capture_default_str();
    app.add_option(kSeverityFlags[1], f.ncp)->capture_default_str();
    app.add_option(kSeverityFlags[2], f.min_lf)->capture_default_str();
    app.add_option(kSeverityFlags[3], f.max_lf)->capture_default_str();
    app.add_option(kSeverityFlags[4], f.pct_nodes)->capture_default_str();
    app.add_option(kSeverityFlags[5], f.pct_links)->capture_default_str();
    app.add_option("--percentage-eclipsed", f.pct_eclipsed)->capture_default_str();
    app.add_option("--seed", f.seed, "first seed")->capture_default_str();
    app.add_option("--seed-max", f.seed_max, "cases per batch (default 1500 odd, 5000 even modes)");
    app.add_option("--severity", f.severity, "Ideal, RealWorld, Mild, ModerateSevere or VerySevere");
    app.add_option("--unla-llf-max", f.unla, "intra-group link latency factor")->capture_default_str();
    app.add_option("--unlb-llf-max", f.unlb, "inter-group link latency factor")->capture_default_str();
    app.add_option("--upper-limit-malicious", f.upper_limit, "cap on malicious nodes in mode 8 (auto)")->expected(0, 1);
    app.add_option("--bandwidth-cap", f.bandwidth_cap, "txns per forwarded batch, 0 = unlimited")
        ->capture_default_str();
    app.add_option("--assimilation", f.assimilation, "all, unl or trust")->capture_default_str();
    app.add_flag("--forward-as-set", f.forward_as_set, "forward only new txn ids");
}

void add_output_flags(CLI::App& app, Flags& f) {
    app.add_option("--format", f.format, "csv or json")->capture_default_str();
    app.add_option("--out", f.out, "output file (default stdout)");
}

overlay::Ratio parse_ratio(const std::string& s) {
    const auto slash = s.find('/');
    if (slash == std::string::npos) throw ConfigError("ratio must be num/den");
    return {static_cast<std::uint32_t>(std::stoul(s.substr(0, slash))),
            static_cast<std::uint32_t>(std::stoul(s.substr(slash + 1)))};
}

consensus::Assimilation parse_assimilation(const std::string& s) {
    if (s == "all") return consensus::Assimilation::All;
    if (s == "unl") return consensus::Assimilation::UnlOnly;
    if (s == "trust") return consensus::Assimilation::TrustLists;
    throw ConfigError("assimilation must be all, unl or trust");
}

ns::ScenarioConfig build_config(const Flags& f, const CLI::App& app) {
    ns::ScenarioConfig c;
    c.variant = overlay::parse_variant(f.variant);
    c.mode = f.mode;
    c.overlay.num_nodes = f.num_nodes;
    c.overlay.c = f.c;
    c.overlay.b = f.b;
    c.overlay.d = f.d;
    c.overlay.outbound_links_to_node_ratio = parse_ratio(f.ratio);
    if (!f.severity.empty()) an::apply_preset(c, an::severity_preset(an::parse_severity(f.severity)));
    double ns::ScenarioConfig::* targets[] = {
        &ns::ScenarioConfig::percentage_malicious,  &ns::ScenarioConfig::network_consensus_percent,
        &ns::ScenarioConfig::min_latency_factor_ni, &ns::ScenarioConfig::max_latency_factor_ni,
        &ns::ScenarioConfig::percent_nodes_ni,      &ns::ScenarioConfig::percent_links_ni,
    };
    const double values[] = {f.pct_malicious, f.ncp, f.min_lf, f.max_lf, f.pct_nodes, f.pct_links};
    for (std::size_t i = 0; i < std::size(targets); ++i) {
        if (f.severity.empty() || given(app, kSeverityFlags[i])) c.*targets[i] = values[i];
    }
    c.percentage_eclipsed = f.pct_eclipsed;
    c.seed_max = given(app, "--seed-max") ? f.seed_max : an::default_seed_max(f.mode);
    c.unla_llf_max = f.unla;
    c.unlb_llf_max = f.unlb;
    if (given(app, "--upper-limit-malicious")) {
        c.is_upper_limit_malicious_applicable = true;
        c.upper_limit_malicious =
            f.upper_limit.empty() || f.upper_limit == "auto" ? 0 : static_cast<std::uint32_t>(std::stoul(f.upper_limit));
    }
    c.engine.bandwidth_cap = f.bandwidth_cap;
    c.engine.assimilation = parse_assimilation(f.assimilation);
    c.engine.forward_as_set = f.forward_as_set;
    c.validate();
    return c;
}

// Writes to --out, or stdout when it is empty.
void emit(const Flags& f, const std::string& text) {
    if (f.out.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream file(f.out, std::ios::binary);
    if (!file) throw ConfigError("cannot write " + f.out);
    file << text;
    if (!text.empty() && text.back() != '\n') file << '\n';
}

std::ofstream open_or_throw(const std::string& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw ConfigError("cannot write " + path);
    return file;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Affinity-group overlay consensus simulator"};
    app.require_subcommand(1);

    Flags f;

    auto* run = app.add_subcommand("run", "run one case and print its JSON record");
    add_scenario_flags(*run, f);
    add_output_flags(*run, f);
    std::string event_log, trace;
    run->add_option("--event-log", event_log, "write every emission to this file");
    run->add_option("--trace", trace, "write per-node threshold decisions to this file");

    auto* batch = app.add_subcommand("batch", "run seed-max cases and print aggregate statistics");
    add_scenario_flags(*batch, f);
    add_output_flags(*batch, f);
    std::string cases_path;
    batch->add_option("--cases", cases_path, "write one JSON line per case to this file");

    auto* sweep = app.add_subcommand("sweep", "run one of the default sweeps");
    add_scenario_flags(*sweep, f);
    add_output_flags(*sweep, f);
    std::string kind = "severity";
    sweep->add_option("--kind", kind, "severity, malicious, ni, eclipse or llf")->capture_default_str();

    auto* cmp = app.add_subcommand("compare", "run --variant against --baseline and print ratios");
    add_scenario_flags(*cmp, f);
    add_output_flags(*cmp, f);
    std::string baseline = "SimC";
    cmp->add_option("--baseline", baseline, "baseline variant")->capture_default_str();

    auto* topo = app.add_subcommand("topology", "print the topology of one seed");
    add_scenario_flags(*topo, f);
    std::string topo_format = "json";
    std::string topo_out;
    topo->add_option("--format", topo_format, "json (summary) or edges")->capture_default_str();
    topo->add_option("--out", topo_out, "output file (default stdout)");

    auto* census = app.add_subcommand("census", "print the route-count lower bounds");
    add_scenario_flags(*census, f);

    auto* preset = app.add_subcommand("preset", "print the severity presets");
    add_output_flags(*preset, f);
    preset->add_option("--severity", f.severity, "one preset (default all)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto config = build_config(f, *run);
            ns::EventLog log;
            std::ofstream trace_file;
            std::unique_ptr<consensus::ConsensusTrace> tracer;
            if (!trace.empty()) {
                trace_file = open_or_throw(trace);
                tracer = std::make_unique<consensus::ConsensusTrace>(&trace_file);
            }
            const auto r = ns::run_case(config, f.seed, {event_log.empty() ? nullptr : &log, nullptr, tracer.get()});
            if (!event_log.empty()) {
                auto file = open_or_throw(event_log);
                ns::write_event_log(file, log);
            }
            emit(f, ns::to_json_line(r, config));
        } else if (batch->parsed()) {
            const auto config = build_config(f, *batch);
            const auto cases = an::run_cases(config, f.seed);
            if (!cases_path.empty()) {
                auto file = open_or_throw(cases_path);
                for (const auto& r : cases) file << ns::to_json_line(r, config) << '\n';
            }
            const auto stats = an::summarize(cases);
            emit(f, an::parse_format(f.format) == an::Format::Csv ? an::to_csv(stats) : an::to_json(stats));
        } else if (sweep->parsed()) {
            const auto base = build_config(f, *sweep);
            auto cells = an::sweep_cells(an::parse_sweep_kind(kind), base);
            // Unless --seed-max was given, each cell uses its own mode default.
            if (!given(*sweep, "--seed-max")) {
                for (auto& cell : cells) cell.config.seed_max = an::default_seed_max(cell.config.mode);
            }
            an::run_sweep(cells, f.seed);
            emit(f, an::parse_format(f.format) == an::Format::Csv ? an::sweep_csv(cells) : an::sweep_json(cells));
        } else if (cmp->parsed()) {
            const auto subject = build_config(f, *cmp);
            auto base = subject;
            base.variant = overlay::parse_variant(baseline);
            if (base.variant == overlay::Variant::SimC) base.unlb_llf_max = base.unla_llf_max;
            base.validate();
            const auto report = an::compare(an::batch_key(subject, f.seed), an::run_batch(subject, f.seed),
                                            an::batch_key(base, f.seed), an::run_batch(base, f.seed));
            emit(f, an::parse_format(f.format) == an::Format::Csv ? an::to_csv(report) : an::to_json(report));
        } else if (topo->parsed()) {
            const auto config = build_config(f, *topo);
            Rng root(f.seed);
            Rng topo_rng = root.fork(1);
            Rng link_rng = root.fork(2);
            Rng ni_rng = root.fork(3);
            const auto t = overlay::build_topology(config.variant, config.overlay, topo_rng);
            std::ostringstream os;
            if (topo_format == "edges") {
                auto links = ns::build_link_model(t, config, link_rng);
                ns::apply_network_issues(links, config, ni_rng);
                overlay::LinkLatencies ms(t.num_nodes());
                for (NodeId a = 0; a < t.num_nodes(); ++a) {
                    for (std::size_t i = 0; i < t.neighbors[a].size(); ++i) ms[a].push_back(to_ms(links.latency(a, i)));
                }
                overlay::write_edge_list(os, t, ms);
            } else if (topo_format == "json") {
                os << overlay::topology_summary_json(t);
            } else {
                throw ConfigError("topology format must be json or edges");
            }
            f.out = topo_out;
            emit(f, os.str());
        } else if (census->parsed()) {
            const auto config = build_config(f, *census);
            std::ostringstream os;
            os << "hops,same_group,cross_group\n";
            for (std::uint32_t h = 1; h <= 3; ++h) {
                const auto p = overlay::path_census(config.overlay, h);
                os << h << ',' << p.same_group_count << ',' << p.cross_group_count << '\n';
            }
            emit(f, os.str());
        } else if (preset->parsed()) {
            std::vector<an::Severity> list = an::all_severities();
            if (!f.severity.empty()) list = {an::parse_severity(f.severity)};
            std::ostringstream os;
            const bool csv = an::parse_format(f.format) == an::Format::Csv;
            if (csv) os << "severity,pct_malicious,min_lf,max_lf,pct_links,pct_nodes,ncp\n";
            for (auto s : list) {
                const auto p = an::severity_preset(s);
                if (csv) {
                    os << an::to_string(s) << ',' << p.pct_malicious << ',' << p.min_lf << ',' << p.max_lf << ','
                       << p.pct_links << ',' << p.pct_nodes << ',' << p.ncp << '\n';
                } else {
                    os << "{\"severity\":\"" << an::to_string(s) << "\",\"pct_malicious\":" << p.pct_malicious
                       << ",\"min_lf\":" << p.min_lf << ",\"max_lf\":" << p.max_lf << ",\"pct_links\":" << p.pct_links
                       << ",\"pct_nodes\":" << p.pct_nodes << ",\"ncp\":" << p.ncp << "}\n";
                }
            }
            emit(f, os.str());
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
