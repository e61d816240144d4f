#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "signalcraft/common.hpp"
#include "signalcraft/dist.hpp"

namespace signalcraft {

inline constexpr std::size_t kMaxIntervals = 100000;
inline constexpr double kSignalMassFloor = 1e-14;

// Public signaling rule, constant on the intervals of a partition of [0, M]:
// rows[j][i] is the probability of signal i when the state lies in interval j.
struct IntervalMechanism {
    std::vector<double> breakpoints;         // t_0 = 0 < t_1 < ... < t_n
    std::vector<std::vector<double>> rows;   // n x K, each row a distribution

    IntervalMechanism(std::vector<double> bp, std::vector<std::vector<double>> r)
        : breakpoints(std::move(bp)), rows(std::move(r)) {
        if (breakpoints.size() < 2 || rows.size() + 1 != breakpoints.size())
            throw std::invalid_argument("mechanism: breakpoints/rows shape mismatch");
        if (rows.size() > kMaxIntervals)
            throw std::invalid_argument("mechanism: too many intervals");
        if (std::abs(breakpoints.front()) > 1e-12)
            throw std::invalid_argument("mechanism: partition must start at 0");
        for (std::size_t j = 1; j < breakpoints.size(); ++j)
            if (!(breakpoints[j] > breakpoints[j - 1]))
                throw std::invalid_argument("mechanism: breakpoints must be strictly increasing");
        const std::size_t k = rows.front().size();
        for (const auto& row : rows) {
            if (row.size() != k) throw std::invalid_argument("mechanism: ragged signal rows");
            double sum = 0.0;
            for (double v : row) {
                if (v < -1e-12 || v > 1.0 + 1e-12)
                    throw std::invalid_argument("mechanism: row entry outside [0, 1]");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-10)
                throw std::invalid_argument("mechanism: signal row does not sum to 1");
        }
    }

    std::size_t signal_count() const { return rows.front().size(); }
    std::size_t interval_count() const { return rows.size(); }
    double upper() const { return breakpoints.back(); }

    // Interval j covers [t_j, t_{j+1}); the last also covers t_n.
    std::size_t interval_of(double theta) const {
        auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), theta);
        std::size_t idx = it == breakpoints.begin()
                              ? 0
                              : static_cast<std::size_t>(it - breakpoints.begin()) - 1;
        return std::min(idx, rows.size() - 1);
    }
};

// Reduced form: signal probabilities with the posterior means they induce.
struct DirectMechanism {
    std::vector<double> q;
    std::vector<double> theta_bar;

    std::size_t size() const { return q.size(); }
};

inline IntervalMechanism no_info(double m = 1.0) {
    return IntervalMechanism({0.0, m}, {{1.0}});
}

// Grid proxy for full disclosure: n equal cells, one signal each.
inline IntervalMechanism full_info_grid(std::size_t n, double m = 1.0) {
    if (n < 1) throw std::invalid_argument("full_info_grid: need n >= 1");
    std::vector<double> bp(n + 1);
    std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j <= n; ++j) bp[j] = m * static_cast<double>(j) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) rows[j][j] = 1.0;
    return IntervalMechanism(std::move(bp), std::move(rows));
}

// Mass and partial mean of the prior on interval j of the partition. Cells
// are left-closed, so an atom sitting on a breakpoint counts rightward; the
// final cell also takes the top endpoint.
inline void interval_moments(const IntervalMechanism& mech, const Prior& prior,
                             std::vector<double>& mass, std::vector<double>& partial_mean) {
    const std::size_t n = mech.interval_count();
    mass.assign(n, 0.0);
    partial_mean.assign(n, 0.0);
    double prev_cdf = 0.0;
    double prev_pqi = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double hi = mech.breakpoints[j + 1];
        const double cur_cdf = (j + 1 == n) ? prior.cdf(hi) : prior.cdf_left(hi);
        const double cur_pqi = prior.partial_quantile_integral(cur_cdf);
        mass[j] = cur_cdf - prev_cdf;
        partial_mean[j] = cur_pqi - prev_pqi;
        prev_cdf = cur_cdf;
        prev_pqi = cur_pqi;
    }
}

inline DirectMechanism direct_of(const IntervalMechanism& mech, const Prior& prior) {
    if (prior.upper() > mech.upper() + 1e-12)
        throw std::invalid_argument("direct_of: uncovered mass beyond the last breakpoint");
    std::vector<double> mass, pm;
    interval_moments(mech, prior, mass, pm);
    const std::size_t k = mech.signal_count();
    DirectMechanism out;
    for (std::size_t i = 0; i < k; ++i) {
        double qi = 0.0, num = 0.0;
        for (std::size_t j = 0; j < mech.interval_count(); ++j) {
            qi += mech.rows[j][i] * mass[j];
            num += mech.rows[j][i] * pm[j];
        }
        if (qi < kSignalMassFloor) continue;
        out.q.push_back(qi);
        out.theta_bar.push_back(num / qi);
    }
    return out;
}

struct MpcReport {
    bool feasible = true;
    std::vector<double> prefix_slack;  // sum q theta_bar - integral of F^{-1}, per prefix
    double mean_gap = 0.0;             // sum q theta_bar - prior mean

    double worst_slack() const {
        double w = 0.0;
        for (double s : prefix_slack) w = std::min(w, s);
        return w;
    }
};

// Mean-preserving-contraction feasibility of a direct mechanism against the
// prior: prefix majorization plus mean preservation. Pairs must be sorted by
// posterior mean.
inline MpcReport check_mpc(const DirectMechanism& direct, const Prior& prior, double tol = 1e-8) {
    for (std::size_t i = 1; i < direct.size(); ++i)
        if (direct.theta_bar[i] < direct.theta_bar[i - 1])
            throw std::invalid_argument("check_mpc: pairs must be sorted by posterior mean");
    MpcReport report;
    double cum_q = 0.0, cum_qm = 0.0;
    for (std::size_t i = 0; i < direct.size(); ++i) {
        cum_q += direct.q[i];
        cum_qm += direct.q[i] * direct.theta_bar[i];
        const double slack = cum_qm - prior.partial_quantile_integral(std::min(cum_q, 1.0));
        report.prefix_slack.push_back(slack);
        if (slack < -tol) report.feasible = false;
    }
    report.mean_gap = cum_qm - prior.mean();
    if (std::abs(report.mean_gap) > tol) report.feasible = false;
    if (std::abs(cum_q - 1.0) > tol) report.feasible = false;
    return report;
}

inline bool is_mps(const IntervalMechanism& mech) {
    std::vector<std::size_t> assigned;
    for (const auto& row : mech.rows) {
        std::size_t unit = row.size();
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (std::abs(row[i] - 1.0) <= 1e-12) {
                if (unit != row.size()) return false;
                unit = i;
            } else if (std::abs(row[i]) > 1e-12) {
                return false;
            }
        }
        if (unit == row.size()) return false;
        if (assigned.empty() || assigned.back() != unit) assigned.push_back(unit);
    }
    for (std::size_t j = 1; j < assigned.size(); ++j)
        if (assigned[j] <= assigned[j - 1]) return false;
    return true;
}

}  // namespace signalcraft
