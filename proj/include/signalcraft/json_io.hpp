#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "signalcraft/design_result.hpp"
#include "signalcraft/dist.hpp"
#include "signalcraft/equilibrium.hpp"
#include "signalcraft/evaluate.hpp"
#include "signalcraft/lp_design.hpp"
#include "signalcraft/mechanism.hpp"
#include "signalcraft/preference.hpp"
#include "signalcraft/set_designer.hpp"

namespace signalcraft {

using json = nlohmann::json;

// Serialization with a fixed numeric layout: floating-point values always
// carry 17 significant digits so outputs are byte-stable and lossless.
inline void dump_number(std::string& out, const json& j) {
    char buf[40];
    if (j.is_number_float()) {
        std::snprintf(buf, sizeof(buf), "%.17g", j.get<double>());
    } else if (j.is_number_unsigned()) {
        std::snprintf(buf, sizeof(buf), "%llu",
                      static_cast<unsigned long long>(j.get<std::uint64_t>()));
    } else {
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(j.get<std::int64_t>()));
    }
    out += buf;
}

inline void dump_json(std::string& out, const json& j, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent) * depth, ' ');
    const std::string pad_in(static_cast<std::size_t>(indent) * (depth + 1), ' ');
    if (j.is_object()) {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out += ",\n";
            first = false;
            out += pad_in;
            out += json(it.key()).dump();
            out += ": ";
            dump_json(out, it.value(), indent, depth + 1);
        }
        out += "\n" + pad + "}";
    } else if (j.is_array()) {
        if (j.empty()) {
            out += "[]";
            return;
        }
        bool scalars = true;
        for (const auto& v : j)
            if (v.is_object() || v.is_array()) scalars = false;
        if (scalars) {
            out += "[";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ", ";
                dump_json(out, j[i], indent, depth + 1);
            }
            out += "]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += ",\n";
            out += pad_in;
            dump_json(out, j[i], indent, depth + 1);
        }
        out += "\n" + pad + "]";
    } else if (j.is_number()) {
        dump_number(out, j);
    } else {
        out += j.dump();
    }
}

inline std::string dump_json(const json& j, int indent = 2) {
    std::string out;
    dump_json(out, j, indent, 0);
    out += "\n";
    return out;
}

// ---- distributions ----

inline Prior prior_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind"))
        throw ConfigError("distribution: expected an object with a 'kind'");
    const std::string kind = j.at("kind").get<std::string>();
    Prior prior = [&] {
        if (kind == "uniform") return Prior::uniform(j.at("a").get<double>(), j.at("b").get<double>());
        if (kind == "exponential")
            return Prior::truncated_exponential(j.at("rate").get<double>(), j.at("M").get<double>());
        if (kind == "normal")
            return Prior::truncated_normal(j.at("mean").get<double>(), j.at("sd").get<double>(),
                                           j.at("M").get<double>());
        if (kind == "discrete")
            return Prior::discrete(j.at("nu").get<std::vector<double>>(),
                                   j.at("p").get<std::vector<double>>());
        if (kind == "empirical")
            return Prior::from_samples(j.at("samples").get<std::vector<double>>());
        if (kind == "mixture") {
            std::vector<Prior> parts;
            for (const auto& part : j.at("parts")) parts.push_back(prior_from_json(part));
            return Prior::mixture(std::move(parts), j.at("weights").get<std::vector<double>>());
        }
        throw ConfigError("distribution: unknown kind '" + kind + "'");
    }();
    if (j.contains("density_bound")) prior = prior.with_density_bound(j.at("density_bound").get<double>());
    return prior;
}

inline CostModel cost_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "linear") return CostModel::linear(j.at("C").get<double>());
    if (kind == "epidemic")
        return CostModel::epidemic(j.at("gamma").get<double>(), j.at("p").get<double>());
    throw ConfigError("cost model: unknown kind '" + kind + "'");
}

// ---- mechanisms ----

inline json to_json(const IntervalMechanism& mech) {
    return json{{"breakpoints", mech.breakpoints}, {"rows", mech.rows}};
}

inline IntervalMechanism mechanism_from_json(const json& j) {
    return IntervalMechanism(j.at("breakpoints").get<std::vector<double>>(),
                             j.at("rows").get<std::vector<std::vector<double>>>());
}

inline json to_json(const DirectMechanism& direct) {
    json pairs = json::array();
    for (std::size_t i = 0; i < direct.size(); ++i)
        pairs.push_back(json::array({direct.q[i], direct.theta_bar[i]}));
    return json{{"pairs", pairs}};
}

inline DirectMechanism direct_from_json(const json& j) {
    DirectMechanism d;
    for (const auto& pair : j.at("pairs")) {
        d.q.push_back(pair.at(0).get<double>());
        d.theta_bar.push_back(pair.at(1).get<double>());
    }
    return d;
}

inline json to_json(const Diagnostics& diag) {
    json metrics = json::object();
    for (const auto& [key, value] : diag.metrics) metrics[key] = value;
    return json{{"notes", diag.notes}, {"metrics", metrics}};
}

inline json to_json(const DesignResult& res) {
    json j{{"regime", res.regime},
           {"value", res.value},
           {"direct", to_json(res.direct)},
           {"diagnostics", to_json(res.diagnostics)}};
    if (res.mechanism.has_value()) j["mechanism"] = to_json(*res.mechanism);
    return j;
}

inline json to_json(const LpDesignResult& res, const std::string& designer) {
    return json{{"designer", designer},
                {"value", res.value},
                {"lp_objective", res.lp_objective},
                {"conditional", res.conditional},
                {"mechanism", to_json(res.mechanism)},
                {"direct", to_json(res.direct)},
                {"diagnostics", to_json(res.diagnostics)}};
}

inline json to_json(const EvalReport& report) {
    return json{{"value", report.value},
                {"v_no_info", report.v_no_info},
                {"v_full_info", report.v_full_info},
                {"conditional", report.conditional},
                {"method", report.method},
                {"seed", report.seed},
                {"mc_samples", report.mc_samples}};
}

inline json to_json(const MpcReport& report) {
    return json{{"feasible", report.feasible},
                {"prefix_slack", report.prefix_slack},
                {"mean_gap", report.mean_gap}};
}

// ---- file helpers ----

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& err) {
        throw ConfigError("parse failure in '" + path + "': " + err.what());
    }
    return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << text;
}

inline std::string csv_cell(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace signalcraft
