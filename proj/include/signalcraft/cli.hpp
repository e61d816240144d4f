#pragma once

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "signalcraft/json_io.hpp"
#include "signalcraft/studies.hpp"

namespace signalcraft::cli {

struct Instance {
    Prior prior;
    std::optional<ValueDist> values;
    EquilibriumMap map;
    std::optional<Preference> preference;
    std::string designer = "set";
    LipschitzOptions solver;
    std::uint64_t seed = 1;
    std::size_t mc_samples = 0;
};

inline Preference preference_from_json(const json& j, const EquilibriumMap& map,
                                       const std::optional<ValueDist>& values,
                                       double theta_max) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "set")
        return SetBasedPref{j.at("omegas").get<std::vector<std::pair<double, double>>>()};
    if (kind == "scaled-capacity") {
        auto breaks = j.at("theta_breaks").get<std::vector<double>>();
        if (j.contains("gammas"))
            return CapacityPref(std::move(breaks), j.at("gammas").get<std::vector<double>>());
        return CapacityPref::from_remote_floor(std::move(breaks),
                                               j.at("b_values").get<std::vector<double>>(), map,
                                               theta_max);
    }
    if (kind == "band-linear") {
        const double slope = j.at("slope").get<double>();
        const double intercept = j.value("intercept", 0.0);
        const double halfwidth = j.at("halfwidth").get<double>();
        BandPref band;
        band.lo = [slope, intercept, halfwidth](double theta) {
            return slope * theta + intercept - halfwidth;
        };
        band.hi = [slope, intercept, halfwidth](double theta) {
            return slope * theta + intercept + halfwidth;
        };
        return band;
    }
    if (kind == "h-rho") return make_h_rho(j.at("rho").get<double>(), theta_max);
    if (kind == "h-ref") {
        if (!values.has_value()) throw ConfigError("h-ref preference needs a value distribution");
        return make_h_ref(j.at("lambda").get<double>(), *values, theta_max);
    }
    throw ConfigError("preference: unknown kind '" + kind + "'");
}

inline Instance parse_instance(const json& config) {
    if (!config.contains("prior")) throw ConfigError("config: missing 'prior'");
    Prior prior = prior_from_json(config.at("prior"));

    std::optional<ValueDist> values;
    if (config.contains("value_dist")) values = prior_from_json(config.at("value_dist"));

    EquilibriumMap map = EquilibriumMap::identity();
    if (config.contains("equilibrium")) {
        const std::string kind = config.at("equilibrium").at("kind").get<std::string>();
        if (kind != "identity") throw ConfigError("equilibrium: unknown override '" + kind + "'");
    } else if (values.has_value() && config.contains("cost")) {
        map = EquilibriumMap(*values, cost_from_json(config.at("cost")));
    } else if (values.has_value() || config.contains("cost")) {
        throw ConfigError("config: a crossing map needs both 'value_dist' and 'cost'");
    }

    Instance inst{std::move(prior), std::move(values), std::move(map), std::nullopt};
    if (config.contains("preference"))
        inst.preference = preference_from_json(config.at("preference"), inst.map, inst.values,
                                               inst.prior.upper());
    inst.designer = config.value("designer", std::string("set"));
    if (config.contains("solver")) {
        const json& s = config.at("solver");
        inst.solver.eps = s.value("eps", 0.0);
        inst.solver.delta = s.value("delta", 0.0);
        inst.solver.tau = s.value("tau", 0.0);
        inst.solver.delta_cap = s.value("delta_cap", 2000.0);
        inst.solver.tau_cap = s.value("tau_cap", 2000.0);
        inst.solver.allow_capped = s.value("allow_capped", true);
        inst.solver.eval.quad_tol = s.value("quad_tol", 1e-9);
    }
    inst.seed = config.value("seed", 1ULL);
    if (const char* env = std::getenv("SIGNALCRAFT_SEED")) inst.seed = std::strtoull(env, nullptr, 10);
    inst.mc_samples = config.value("mc_samples", 0ULL);
    return inst;
}

inline void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty() || out_path == "-")
        std::cout << text;
    else
        write_text_file(out_path, text);
}

inline DirectMechanism sorted_direct(const DirectMechanism& d) {
    std::vector<std::size_t> order(d.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return d.theta_bar[a] < d.theta_bar[b]; });
    DirectMechanism s;
    for (std::size_t i : order) {
        s.q.push_back(d.q[i]);
        s.theta_bar.push_back(d.theta_bar[i]);
    }
    return s;
}

inline int run_design(const std::string& config_path, const std::string& out_path) {
    const json config = load_json_file(config_path);
    const Instance inst = parse_instance(config);
    if (!inst.preference.has_value() || !std::holds_alternative<SetBasedPref>(*inst.preference))
        throw ConfigError("design: needs a set-based preference");
    const auto& omegas = std::get<SetBasedPref>(*inst.preference).omegas;
    const DesignResult res = design(inst.prior, inst.map, omegas);
    emit(dump_json(to_json(res)), out_path);
    return 0;
}

inline int run_design_lp(const std::string& config_path, const std::string& out_path,
                         const std::string& dump_path) {
    const json config = load_json_file(config_path);
    const Instance inst = parse_instance(config);
    if (!inst.preference.has_value()) throw ConfigError("design-lp: missing 'preference'");

    if (inst.designer == "scaled-capacity") {
        if (!std::holds_alternative<CapacityPref>(*inst.preference))
            throw ConfigError("design-lp: the scaled-capacity designer needs capacity thresholds");
        const auto& pref = std::get<CapacityPref>(*inst.preference);
        DiscretePrior dprior;
        if (inst.prior.is_discrete()) {
            dprior.nu = inst.prior.atoms();
            dprior.p = inst.prior.masses();
            dprior.upper = inst.prior.upper();
        } else if (inst.solver.delta > 0.0) {
            dprior = inst.prior.delta_discretize(inst.solver.delta);
        } else {
            throw ConfigError("design-lp: scaled-capacity needs a discrete prior or solver.delta");
        }
        std::vector<double> gammas;
        for (double nu : dprior.nu) gammas.push_back(pref.gamma_at(nu));
        std::optional<std::vector<double>> weights;
        if (config.contains("weights")) weights = config.at("weights").get<std::vector<double>>();
        const LpDesignResult res =
            design_scaled_capacity(dprior, gammas, weights ? &*weights : nullptr);
        if (!dump_path.empty()) {
            std::vector<double> bounds{0.0};
            for (double g : gammas) bounds.push_back(g);
            bounds.push_back(kInf);
            std::vector<std::vector<double>> c(dprior.nu.size(),
                                               std::vector<double>(dprior.nu.size() + 1, 0.0));
            for (std::size_t j = 0; j < dprior.nu.size(); ++j)
                for (std::size_t i = j + 1; i <= dprior.nu.size(); ++i)
                    c[j][i] = weights ? (*weights)[j] / dprior.p[j] : 1.0;
            std::ostringstream text;
            dump_lp(build_design_lp(dprior, bounds, c), text);
            write_text_file(dump_path, text.str());
        }
        emit(dump_json(to_json(res, "scaled-capacity")), out_path);
        return 0;
    }

    if (inst.designer == "lipschitz") {
        if (!std::holds_alternative<SmoothPref>(*inst.preference))
            throw ConfigError("design-lp: the lipschitz designer needs a smooth preference");
        if (!dump_path.empty())
            throw ConfigError("design-lp: --dump-lp supports the scaled-capacity designer only");
        const LpDesignResult res = design_lipschitz(
            inst.prior, std::get<SmoothPref>(*inst.preference), inst.map, inst.solver);
        emit(dump_json(to_json(res, "lipschitz")), out_path);
        return 0;
    }
    throw ConfigError("design-lp: unknown designer '" + inst.designer + "'");
}

inline int run_evaluate(const std::string& config_path, const std::string& out_path) {
    const json config = load_json_file(config_path);
    const Instance inst = parse_instance(config);
    if (!inst.preference.has_value()) throw ConfigError("evaluate: missing 'preference'");
    if (!config.contains("mechanism")) throw ConfigError("evaluate: missing 'mechanism'");
    const json& mech_json = config.at("mechanism");
    const IntervalMechanism mech = mech_json.is_string()
                                       ? mechanism_from_json(load_json_file(mech_json.get<std::string>()))
                                       : mechanism_from_json(mech_json);
    EvalSettings st;
    st.quad_tol = inst.solver.eval.quad_tol;
    EvalReport report = evaluate_report(inst.prior, *inst.preference, mech, inst.map, st);
    json out = to_json(report);
    if (inst.mc_samples > 0) {
        const McResult mc =
            value_monte_carlo(inst.prior, *inst.preference, mech, inst.map, inst.mc_samples, inst.seed);
        out["mc_value"] = mc.mean;
        out["mc_std_error"] = mc.std_error;
        out["seed"] = mc.seed;
        out["mc_samples"] = mc.samples;
    }
    if (config.contains("conditional_csv")) {
        if (!inst.prior.is_discrete())
            throw ConfigError("evaluate: conditional values need a discrete prior");
        DiscretePrior d;
        d.nu = inst.prior.atoms();
        d.p = inst.prior.masses();
        d.upper = inst.prior.upper();
        const auto cond = conditional_values(d, *inst.preference, mech, inst.map, st);
        std::string csv = "j,nu,p,Vj\n";
        for (std::size_t j = 0; j < cond.size(); ++j)
            csv += std::to_string(j + 1) + "," + csv_cell(d.nu[j]) + "," + csv_cell(d.p[j]) + "," +
                   csv_cell(cond[j]) + "\n";
        write_text_file(config.at("conditional_csv").get<std::string>(), csv);
    }
    emit(dump_json(out), out_path);
    return 0;
}

inline int run_sweep(const std::string& config_path, const std::string& out_path, int jobs) {
    const json config = load_json_file(config_path);
    const Instance inst = parse_instance(config);
    if (!inst.values.has_value() || !inst.map.has_values())
        throw ConfigError("sweep: needs 'value_dist' and 'cost'");
    std::vector<double> grid;
    if (config.contains("b_grid")) {
        grid = config.at("b_grid").get<std::vector<double>>();
    } else {
        const double lo = config.value("b_min", 0.0);
        const double hi = config.value("b_max", 1.0);
        const int points = config.value("points", 21);
        if (points < 2) throw ConfigError("sweep: need at least two grid points");
        for (int i = 0; i < points; ++i)
            grid.push_back(lo + (hi - lo) * i / (points - 1));
    }
    const auto rows = sweep_capacity(inst.prior, inst.map.values(), inst.map.cost(), grid, jobs);
    std::string csv = "b,V_opt,V_ni,V_fi\n";
    for (const auto& row : rows)
        csv += csv_cell(row.b) + "," + csv_cell(row.v_opt) + "," + csv_cell(row.v_ni) + "," +
               csv_cell(row.v_fi) + "\n";
    emit(csv, out_path);
    return 0;
}

inline int run_convergence(const std::string& config_path, const std::string& out_path, int jobs) {
    const json config = load_json_file(config_path);
    const Instance inst = parse_instance(config);
    if (!inst.preference.has_value() || !std::holds_alternative<SmoothPref>(*inst.preference))
        throw ConfigError("convergence: needs a smooth preference");
    if (!config.contains("levels")) throw ConfigError("convergence: missing 'levels'");
    std::vector<std::pair<double, double>> levels;
    for (const auto& level : config.at("levels"))
        levels.emplace_back(level.at(0).get<double>(), level.at(1).get<double>());
    const auto rows = convergence_study(inst.prior, inst.map, std::get<SmoothPref>(*inst.preference),
                                        levels, jobs, inst.solver);
    std::string csv = "delta,tau,value,gap\n";
    for (const auto& row : rows)
        csv += csv_cell(row.delta) + "," + csv_cell(row.tau) + "," + csv_cell(row.value) + "," +
               csv_cell(row.gap) + "\n";
    emit(csv, out_path);
    return 0;
}

inline int run_check(const std::string& mech_path, const std::string& prior_path, double tol,
                     const std::string& out_path) {
    const json mech_json = load_json_file(mech_path);
    const Prior prior = prior_from_json(load_json_file(prior_path));
    DirectMechanism direct;
    if (mech_json.contains("pairs")) {
        direct = direct_from_json(mech_json);
    } else {
        direct = direct_of(mechanism_from_json(mech_json), prior);
    }
    const MpcReport report = check_mpc(sorted_direct(direct), prior, tol);
    emit(dump_json(to_json(report)), out_path);
    return 0;
}

inline int run(std::vector<std::string> args) {
    CLI::App app{"signaling mechanism design toolkit"};
    app.require_subcommand(1);
    std::string config_path, out_path, dump_path, mech_path, prior_path;
    double tol = 1e-8;
    int jobs = default_jobs();

    auto* design_cmd = app.add_subcommand("design", "state-independent set-based design");
    design_cmd->add_option("--config", config_path, "instance config")->required();
    design_cmd->add_option("--out", out_path, "output path (default stdout)");

    auto* lp_cmd = app.add_subcommand("design-lp", "discretized LP design");
    lp_cmd->add_option("--config", config_path, "instance config")->required();
    lp_cmd->add_option("--out", out_path, "output path (default stdout)");
    lp_cmd->add_option("--dump-lp", dump_path, "write the LP in plain text");

    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a mechanism");
    eval_cmd->add_option("--config", config_path, "instance config")->required();
    eval_cmd->add_option("--out", out_path, "output path (default stdout)");

    auto* sweep_cmd = app.add_subcommand("sweep", "capacity sweep study");
    sweep_cmd->add_option("--config", config_path, "instance config")->required();
    sweep_cmd->add_option("--out", out_path, "CSV output path (default stdout)");
    sweep_cmd->add_option("--jobs", jobs, "parallel workers");

    auto* conv_cmd = app.add_subcommand("convergence", "discretization convergence study");
    conv_cmd->add_option("--config", config_path, "instance config")->required();
    conv_cmd->add_option("--out", out_path, "CSV output path (default stdout)");
    conv_cmd->add_option("--jobs", jobs, "parallel workers");

    auto* check_cmd = app.add_subcommand("check", "implementability report for a mechanism");
    check_cmd->add_option("--mechanism", mech_path, "mechanism file")->required();
    check_cmd->add_option("--prior", prior_path, "prior file")->required();
    check_cmd->add_option("--tol", tol, "feasibility tolerance");
    check_cmd->add_option("--out", out_path, "output path (default stdout)");

    std::vector<char*> argv;
    std::string name = "signalcraft";
    argv.push_back(name.data());
    for (auto& arg : args) argv.push_back(arg.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& help) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& err) {
        std::cerr << err.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (design_cmd->parsed()) return run_design(config_path, out_path);
        if (lp_cmd->parsed()) return run_design_lp(config_path, out_path, dump_path);
        if (eval_cmd->parsed()) return run_evaluate(config_path, out_path);
        if (sweep_cmd->parsed()) return run_sweep(config_path, out_path, jobs);
        if (conv_cmd->parsed()) return run_convergence(config_path, out_path, jobs);
        if (check_cmd->parsed()) return run_check(mech_path, prior_path, tol, out_path);
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 2;
    } catch (const json::exception& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 2;
    } catch (const SolverError& err) {
        std::cerr << "solver error: " << err.what() << "\n";
        return 3;
    }
    return 2;
}

}  // namespace signalcraft::cli
