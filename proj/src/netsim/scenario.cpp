#include <json.hpp>

#include "sissle/netsim/netsim.hpp"

namespace sissle::netsim {

namespace {

using nlohmann::json;

void check_percent(double v, const char* name) {
    if (!(v >= 0.0 && v <= 100.0)) throw ConfigError(std::string(name) + " must lie in [0, 100]");
}

std::string_view to_string(consensus::Assimilation a) {
    switch (a) {
        case consensus::Assimilation::All: return "all";
        case consensus::Assimilation::UnlOnly: return "unl";
        case consensus::Assimilation::TrustLists: return "trust";
    }
    return "?";
}

consensus::Assimilation parse_assimilation(const std::string& s) {
    if (s == "all") return consensus::Assimilation::All;
    if (s == "unl") return consensus::Assimilation::UnlOnly;
    if (s == "trust") return consensus::Assimilation::TrustLists;
    throw ConfigError("unknown assimilation scope: " + s);
}

std::string_view to_string(RecipientScope r) {
    switch (r) {
        case RecipientScope::Links: return "links";
        case RecipientScope::UnlOnly: return "unl";
        case RecipientScope::TnlOnly: return "tnl";
    }
    return "?";
}

RecipientScope parse_recipients(const std::string& s) {
    if (s == "links") return RecipientScope::Links;
    if (s == "unl") return RecipientScope::UnlOnly;
    if (s == "tnl") return RecipientScope::TnlOnly;
    throw ConfigError("unknown recipient scope: " + s);
}

}  // namespace

std::uint32_t ScenarioConfig::upper_limit() const {
    return upper_limit_malicious != 0 ? upper_limit_malicious : overlay::fault_bound(overlay);
}

void ScenarioConfig::validate() const {
    overlay.validate(variant);
    if (mode == 7) throw ConfigError("mode 7 does not exist");
    if (mode < 1 || mode > 8) throw ConfigError("mode must be one of 1-6 or 8");
    check_percent(percentage_malicious, "percentage_malicious");
    check_percent(network_consensus_percent, "network_consensus_percent");
    check_percent(percent_nodes_ni, "percentNodesAffectedByNI");
    check_percent(percent_links_ni, "percentLinksAffectedByNI");
    check_percent(percentage_eclipsed, "percentageEclipsed");
    if (ni_enabled() && !(min_latency_factor_ni >= 1.0 && min_latency_factor_ni <= max_latency_factor_ni)) {
        throw ConfigError("network issue factors need 1 <= min <= max (or 0/0 to disable)");
    }
    if (seed_max < 1) throw ConfigError("seedMax must be at least 1");
    if (!(unla_llf_max > 0.0 && unlb_llf_max > 0.0)) throw ConfigError("link latency factors must be positive");
    if (variant == Variant::SimC && unla_llf_max != unlb_llf_max) {
        throw ConfigError("SimC takes a single link latency factor (k == l)");
    }
    if (!(min_latency_ms > 0.0 && min_latency_ms <= max_latency_ms)) {
        throw ConfigError("latency range needs 0 < min <= max");
    }
    if (mode == 8 && is_upper_limit_malicious_applicable && upper_limit() == 0) {
        throw ConfigError("upperLimitMalicious must be positive");
    }
    engine.validate();
}

std::string ScenarioConfig::to_json() const {
    const auto& o = overlay;
    json j{
        {"variant", overlay::to_string(variant)},
        {"mode", mode},
        {"num_nodes", o.num_nodes},
        {"c", o.c},
        {"b", o.b},
        {"d", o.d},
        {"outbound_links_to_node_ratio", {o.outbound_links_to_node_ratio.num, o.outbound_links_to_node_ratio.den}},
        {"simrm_outbound_links", o.simrm_outbound_links},
        {"simrm_unl_size", o.simrm_unl_size},
        {"percentage_malicious", percentage_malicious},
        {"network_consensus_percent", network_consensus_percent},
        {"min_latency_factor_ni", min_latency_factor_ni},
        {"max_latency_factor_ni", max_latency_factor_ni},
        {"percent_nodes_ni", percent_nodes_ni},
        {"percent_links_ni", percent_links_ni},
        {"percentage_eclipsed", percentage_eclipsed},
        {"seed_max", seed_max},
        {"upper_limit_malicious", upper_limit_malicious},
        {"is_upper_limit_malicious_applicable", is_upper_limit_malicious_applicable},
        {"unla_llf_max", unla_llf_max},
        {"unlb_llf_max", unlb_llf_max},
        {"min_latency_ms", min_latency_ms},
        {"max_latency_ms", max_latency_ms},
        {"sub_rounds", engine.sub_rounds},
        {"batch_period_us", engine.batch_period},
        {"subround_timeout_us", engine.subround_timeout},
        {"assimilation", to_string(engine.assimilation)},
        {"bandwidth_cap", engine.bandwidth_cap},
        {"forward_as_set", engine.forward_as_set},
        {"epsilon", engine.epsilon},
        {"recipients", to_string(recipients)},
    };
    return j.dump();
}

ScenarioConfig scenario_from_json(const std::string& text) {
    const json j = json::parse(text);
    ScenarioConfig c;
    c.variant = overlay::parse_variant(j.at("variant").get<std::string>());
    c.mode = j.at("mode");
    c.overlay.num_nodes = j.at("num_nodes");
    c.overlay.c = j.at("c");
    c.overlay.b = j.at("b");
    c.overlay.d = j.at("d");
    c.overlay.outbound_links_to_node_ratio = {j.at("outbound_links_to_node_ratio")[0],
                                              j.at("outbound_links_to_node_ratio")[1]};
    c.overlay.simrm_outbound_links = j.at("simrm_outbound_links");
    c.overlay.simrm_unl_size = j.at("simrm_unl_size");
    c.percentage_malicious = j.at("percentage_malicious");
    c.network_consensus_percent = j.at("network_consensus_percent");
    c.min_latency_factor_ni = j.at("min_latency_factor_ni");
    c.max_latency_factor_ni = j.at("max_latency_factor_ni");
    c.percent_nodes_ni = j.at("percent_nodes_ni");
    c.percent_links_ni = j.at("percent_links_ni");
    c.percentage_eclipsed = j.at("percentage_eclipsed");
    c.seed_max = j.at("seed_max");
    c.upper_limit_malicious = j.at("upper_limit_malicious");
    c.is_upper_limit_malicious_applicable = j.at("is_upper_limit_malicious_applicable");
    c.unla_llf_max = j.at("unla_llf_max");
    c.unlb_llf_max = j.at("unlb_llf_max");
    c.min_latency_ms = j.at("min_latency_ms");
    c.max_latency_ms = j.at("max_latency_ms");
    c.engine.sub_rounds = j.at("sub_rounds");
    c.engine.batch_period = j.at("batch_period_us");
    c.engine.subround_timeout = j.at("subround_timeout_us");
    c.engine.assimilation = parse_assimilation(j.at("assimilation"));
    c.engine.bandwidth_cap = j.at("bandwidth_cap");
    c.engine.forward_as_set = j.at("forward_as_set");
    c.engine.epsilon = j.at("epsilon");
    c.recipients = parse_recipients(j.at("recipients"));
    return c;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t ScenarioConfig::hash() const { return fnv1a64(to_json()); }

}  // namespace sissle::netsim
