#pragma once

#include <algorithm>
#include <cmath>
#include <thread>
#include <utility>
#include <vector>

#include "signalcraft/evaluate.hpp"
#include "signalcraft/lp_design.hpp"
#include "signalcraft/set_designer.hpp"

namespace signalcraft {

namespace detail {

// Runs fn(i) for i in [0, count) across at most jobs threads.
template <class Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(jobs, count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace detail

inline int default_jobs() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

struct SweepRow {
    double b = 0.0;      // remote-mass floor
    double v_opt = 0.0;  // designed mechanism
    double v_ni = 0.0;   // no information
    double v_fi = 0.0;   // full information
};

// Optimal-versus-benchmark compliance as the capacity floor b varies; the
// target set is {y >= b}.
inline std::vector<SweepRow> sweep_capacity(const Prior& prior, const ValueDist& values,
                                            const CostModel& cost,
                                            const std::vector<double>& b_grid,
                                            int jobs = 1,
                                            const EvalSettings& st = {}) {
    const EquilibriumMap map(values, cost);
    std::vector<SweepRow> rows(b_grid.size());
    detail::parallel_for(b_grid.size(), jobs, [&](std::size_t i) {
        const double b = b_grid[i];
        SweepRow row;
        row.b = b;
        const std::vector<std::pair<double, double>> omegas{{b, 1.0}};
        try {
            row.v_opt = design(prior, map, omegas).value;
        } catch (const std::invalid_argument&) {
            row.v_opt = 0.0;  // floor unreachable by any posterior
        }
        const SetBasedPref pref{omegas};
        row.v_ni = value_no_info(prior, pref, map, st);
        row.v_fi = value_full_info(prior, pref, map, st);
        rows[i] = row;
    });
    return rows;
}

struct ConvergenceRow {
    double delta = 0.0;
    double tau = 0.0;
    double value = 0.0;  // planner value of the constructed mechanism
    double gap = 0.0;    // distance to the finest level
};

// Value of the discretized design along a grid of (delta, tau) levels; gaps
// are measured against the finest level in the list.
inline std::vector<ConvergenceRow> convergence_study(
    const Prior& prior, const EquilibriumMap& map, const SmoothPref& pref,
    const std::vector<std::pair<double, double>>& levels, int jobs = 1,
    const LipschitzOptions& base = {}) {
    std::vector<ConvergenceRow> rows(levels.size());
    detail::parallel_for(levels.size(), jobs, [&](std::size_t i) {
        LipschitzOptions opt = base;
        opt.delta = levels[i].first;
        opt.tau = levels[i].second;
        opt.delta_cap = std::max(opt.delta_cap, opt.delta);
        opt.tau_cap = std::max(opt.tau_cap, opt.tau);
        const LpDesignResult res = design_lipschitz(prior, pref, map, opt);
        rows[i] = ConvergenceRow{levels[i].first, levels[i].second, res.value, 0.0};
    });
    std::size_t finest = 0;
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (levels[i].first * levels[i].second > levels[finest].first * levels[finest].second)
            finest = i;
    for (auto& row : rows) row.gap = std::abs(row.value - rows[finest].value);
    return rows;
}

}  // namespace signalcraft
