#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "signalcraft/common.hpp"
#include "signalcraft/design_result.hpp"
#include "signalcraft/dist.hpp"
#include "signalcraft/equilibrium.hpp"
#include "signalcraft/lp.hpp"
#include "signalcraft/mechanism.hpp"
#include "signalcraft/preference.hpp"

namespace signalcraft {

// Preferred remote-mass bands pulled back to posterior-mean space: the k-th
// band complies iff the posterior mean lands in [lo[k], hi[k]].
struct PreferredSets {
    std::vector<std::pair<double, double>> omegas;  // bands that survived the pullback
    std::vector<double> lo, hi;                     // preimage intervals, increasing
    std::vector<std::string> warnings;

    static PreferredSets from_theta_intervals(std::vector<std::pair<double, double>> thetas) {
        PreferredSets sets;
        double prev = -kInf;
        for (const auto& [l, h] : thetas) {
            if (!(l <= h) || !(l >= 0.0))
                throw std::invalid_argument("preferred sets: bad theta interval");
            if (!(l > prev)) throw std::invalid_argument("preferred sets: intervals must increase");
            prev = h;
            sets.lo.push_back(l);
            sets.hi.push_back(h);
        }
        if (sets.lo.empty()) throw std::invalid_argument("preferred sets: empty");
        return sets;
    }

    std::size_t count() const { return lo.size(); }
    bool contains(double theta_bar, double tol = 1e-9) const {
        for (std::size_t k = 0; k < lo.size(); ++k)
            if (theta_bar >= lo[k] - tol && theta_bar <= hi[k] + tol) return true;
        return false;
    }
};

inline PreferredSets preimage_intervals(const std::vector<std::pair<double, double>>& omegas,
                                        const EquilibriumMap& map, double m) {
    SetBasedPref validated{omegas};  // checks disjoint increasing inside [0, 1]
    PreferredSets sets;
    const double m_at_zero = map.remote_mass(0.0);
    const double m_at_top = map.remote_mass(m);
    for (const auto& [w_lo, w_hi] : validated.omegas) {
        if (m_at_zero > w_hi + 1e-12) {
            sets.warnings.push_back("band below the reachable range dropped");
            continue;
        }
        const auto pre_lo = map.remote_mass_inverse(w_lo, m);
        if (!pre_lo.has_value()) {
            sets.warnings.push_back("band above the reachable range dropped");
            continue;
        }
        double pre_hi = m;
        if (m_at_top > w_hi) {
            auto pred = [&](double t) { return map.remote_mass(t) <= w_hi; };
            pre_hi = bisect_boundary(pred, 0.0, m, (m + 1.0) * 1e-14);
        }
        if (pre_hi < *pre_lo - 1e-12) {
            sets.warnings.push_back("band with empty preimage dropped");
            continue;
        }
        sets.omegas.emplace_back(w_lo, w_hi);
        sets.lo.push_back(*pre_lo);
        sets.hi.push_back(std::max(*pre_lo, pre_hi));
    }
    if (sets.lo.empty()) throw std::invalid_argument("unreachable preference");
    return sets;
}

enum class Regime { R1, R2, R3, R4 };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::R1: return "R1";
        case Regime::R2: return "R2";
        case Regime::R3: return "R3";
        default: return "R4";
    }
}

inline Regime classify_regime(const Prior& prior, const PreferredSets& sets) {
    if (sets.count() == 0) throw std::invalid_argument("classify_regime: empty sets");
    const double mu = prior.mean();
    if (sets.contains(mu, 1e-12)) return Regime::R1;
    if (mu > sets.hi.back()) return Regime::R2;
    if (mu < sets.lo.front()) return Regime::R3;
    return Regime::R4;
}

// Threshold design when the prior mean sits above every preferred band.
inline DesignResult design_r2(const Prior& prior, const PreferredSets& sets) {
    const double mu = prior.mean();
    const double m = prior.upper();
    const double top = sets.hi.back();
    if (!(mu >= top)) throw std::invalid_argument("design_r2: instance is not in regime R2");

    const double envelope = prior.bar_f(top);
    const double ratio = (m - top) > 1e-15 ? (m - mu) / (m - top) : 0.0;
    const double q1 = std::min(envelope, ratio);

    DesignResult res;
    res.regime = "R2";
    res.value = q1;
    res.diagnostics.metrics["bar_f"] = envelope;
    res.diagnostics.metrics["mass_ratio"] = ratio;
    res.diagnostics.notes.push_back(envelope <= ratio ? "envelope binding" : "mass ratio binding");

    if (q1 >= 1.0 - 1e-12) {
        // boundary with R1: the mean itself sits at the band edge
        res.mechanism = no_info(m);
        res.direct.q = {1.0};
        res.direct.theta_bar = {mu};
        res.value = 1.0;
        return res;
    }
    if (q1 < 1e-12) {
        res.mechanism = no_info(m);
        res.direct.q = {1.0};
        res.direct.theta_bar = {mu};
        res.diagnostics.notes.push_back("no persuasion possible");
        return res;
    }

    const double t1 = prior.quantile(q1);
    const double low = prior.partial_quantile_integral(q1) / q1;
    const double high = (mu - q1 * low) / (1.0 - q1);
    if (sets.contains(low, 1e-8)) {
        res.mechanism = IntervalMechanism({0.0, t1, m}, {{1.0, 0.0}, {0.0, 1.0}});
        res.direct.q = {q1, 1.0 - q1};
        res.direct.theta_bar = {low, high};
    } else {
        // The threshold split misses the band; certify the direct optimum
        // with the target posteriors instead.
        res.direct.q = {q1, 1.0 - q1};
        res.direct.theta_bar = {top, (mu - q1 * top) / (1.0 - q1)};
        res.diagnostics.notes.push_back("threshold posteriors left the band; direct certificate only");
    }
    return res;
}

// Threshold design when the prior mean sits below every preferred band.
inline DesignResult design_r3(const Prior& prior, const PreferredSets& sets) {
    const double mu = prior.mean();
    const double m = prior.upper();
    const double bottom = sets.lo.front();
    if (!(mu <= bottom)) throw std::invalid_argument("design_r3: instance is not in regime R3");

    // residual(q) <= 0 exactly when q <= bar_f applied to the induced low
    // posterior; the feasible q form an interval reaching 1.
    auto residual = [&](double q) {
        return prior.partial_quantile_integral(q) - q * bottom + (bottom - mu);
    };
    const double q_min = (bottom - mu) / bottom;
    double q2;
    if (residual(q_min) <= 0.0) {
        q2 = q_min;
    } else {
        auto pred = [&](double q) { return residual(q) > 0.0; };
        q2 = bisect_boundary(pred, q_min, 1.0, 1e-13);
    }

    DesignResult res;
    res.regime = "R3";
    res.value = 1.0 - q2;
    res.diagnostics.metrics["q_low"] = q2;
    if (q2 >= 1.0 - 1e-12) {
        res.mechanism = no_info(m);
        res.direct.q = {1.0};
        res.direct.theta_bar = {mu};
        res.value = 0.0;
        res.diagnostics.notes.push_back("no feasible split below the band");
        return res;
    }
    if (q2 < 1e-12) {
        res.mechanism = no_info(m);
        res.direct.q = {1.0};
        res.direct.theta_bar = {mu};
        res.value = 1.0;
        return res;
    }

    const double t1 = prior.quantile(q2);
    const double low = prior.partial_quantile_integral(q2) / q2;
    const double high = (mu - q2 * low) / (1.0 - q2);
    if (sets.contains(high, 1e-8)) {
        res.mechanism = IntervalMechanism({0.0, t1, m}, {{1.0, 0.0}, {0.0, 1.0}});
        res.direct.q = {q2, 1.0 - q2};
        res.direct.theta_bar = {low, high};
    } else {
        res.direct.q = {q2, 1.0 - q2};
        res.direct.theta_bar = {bottom - (bottom - mu) / q2, bottom};
        res.diagnostics.notes.push_back("threshold posteriors left the band; direct certificate only");
    }
    return res;
}

// Split-and-mix design attaining full compliance when the prior spreads
// enough mass around the gap containing its mean.
inline std::optional<DesignResult> design_r4a(const Prior& prior, const EquilibriumMap& map,
                                              const PreferredSets& sets, int t_points = 200,
                                              int target_points = 50) {
    (void)map;
    const double mu = prior.mean();
    const double m = prior.upper();

    std::vector<double> low_targets, high_targets;
    for (std::size_t k = 0; k < sets.count(); ++k) {
        const int n = sets.hi[k] > sets.lo[k] + 1e-15 ? target_points : 1;
        for (int i = 0; i < n; ++i) {
            const double theta =
                n == 1 ? sets.lo[k] : sets.lo[k] + (sets.hi[k] - sets.lo[k]) * i / (n - 1);
            if (theta < mu - 1e-12) low_targets.push_back(theta);
            if (theta > mu + 1e-12) high_targets.push_back(theta);
        }
    }
    if (low_targets.empty() || high_targets.empty()) return std::nullopt;

    struct Candidate {
        double t, lambda, delta, theta_lo, theta_hi, score;
    };
    std::optional<Candidate> best;
    for (int j = 1; j < t_points; ++j) {
        const double u = static_cast<double>(j) / t_points;
        const double t = prior.quantile(u);
        const double mass = prior.cdf(t);
        if (mass < 1e-12 || mass > 1.0 - 1e-12) continue;
        const double s_lo = prior.conditional_mean_below(t);
        const double s_hi = prior.conditional_mean_above(t);
        auto odds = [&](double theta) {
            return (1.0 - mass) * (s_hi - theta) / (mass * (theta - s_lo));
        };
        for (double tl : low_targets) {
            if (tl <= s_lo + 1e-12) continue;
            const double p_lo = odds(tl);
            for (double th : high_targets) {
                if (th <= s_lo + 1e-12) continue;
                const double p_hi = odds(th);
                if (std::abs(p_lo - p_hi) < 1e-14) continue;
                const double delta = (1.0 - p_hi) / (p_lo - p_hi);
                const double lambda = delta * p_lo;
                if (delta < -1e-10 || delta > 1.0 + 1e-10) continue;
                if (lambda < -1e-10 || lambda > 1.0 + 1e-10) continue;
                const double d = clamp01(delta), l = clamp01(lambda);
                const double score = std::min(std::min(l, 1.0 - l), std::min(d, 1.0 - d));
                if (!best || score > best->score + 1e-12) best = Candidate{t, l, d, tl, th, score};
            }
        }
    }
    if (!best) return std::nullopt;

    DesignResult res;
    res.regime = "R4a";
    res.value = 1.0;
    res.mechanism = IntervalMechanism({0.0, best->t, m}, {{best->lambda, 1.0 - best->lambda},
                                                          {best->delta, 1.0 - best->delta}});
    const DirectMechanism realized = direct_of(*res.mechanism, prior);
    res.direct = realized;
    res.diagnostics.metrics["t"] = best->t;
    res.diagnostics.metrics["lambda"] = best->lambda;
    res.diagnostics.metrics["delta"] = best->delta;
    if (realized.size() != 2 || std::abs(realized.theta_bar[0] - best->theta_lo) > 1e-8 ||
        std::abs(realized.theta_bar[1] - best->theta_hi) > 1e-8)
        return std::nullopt;
    return res;
}

// One convex program per placement of the off-band posterior; the convex
// majorization boundary enters through tangent cuts.
inline DesignResult design_r4_general(const Prior& prior, const PreferredSets& sets,
                                      double cut_tol = 1e-8, int max_cuts = 200) {
    const double mu = prior.mean();
    const double m = prior.upper();
    const std::size_t k_sets = sets.count();
    const std::size_t n_vars = 2 * (k_sets + 1);  // q then z, slack last

    std::optional<DesignResult> best;
    for (std::size_t slot = 0; slot <= k_sets; ++slot) {
        const double gap_lo = slot == 0 ? 0.0 : sets.hi[slot - 1];
        const double gap_hi = slot == k_sets ? m : sets.lo[slot];

        LpProblem lp;
        lp.num_vars = n_vars;
        lp.objective.assign(n_vars, 0.0);
        for (std::size_t k = 0; k < k_sets; ++k) lp.objective[k] = 1.0;  // max on-band mass

        std::vector<double> row(n_vars, 0.0);
        for (std::size_t k = 0; k <= k_sets; ++k) row[k] = 1.0;
        lp.add_eq(row, 1.0);
        std::fill(row.begin(), row.end(), 0.0);
        for (std::size_t k = 0; k <= k_sets; ++k) row[k_sets + 1 + k] = 1.0;
        lp.add_eq(row, mu);

        auto add_band = [&](std::size_t idx, double lo, double hi) {
            std::vector<double> r(n_vars, 0.0);
            r[idx] = lo;
            r[k_sets + 1 + idx] = -1.0;
            lp.add_ub(r, 0.0);
            std::fill(r.begin(), r.end(), 0.0);
            r[idx] = -hi;
            r[k_sets + 1 + idx] = 1.0;
            lp.add_ub(r, 0.0);
        };
        for (std::size_t k = 0; k < k_sets; ++k) add_band(k, sets.lo[k], sets.hi[k]);
        add_band(k_sets, gap_lo, gap_hi);

        // sorted order of the K+1 posteriors for this placement
        std::vector<std::size_t> order;
        for (std::size_t k = 0; k < slot; ++k) order.push_back(k);
        order.push_back(k_sets);
        for (std::size_t k = slot; k < k_sets; ++k) order.push_back(k);

        auto add_cut = [&](std::size_t prefix_len, double x_hat) {
            const double slope = prior.quantile(clamp01(x_hat));
            const double offset = slope * x_hat - prior.partial_quantile_integral(clamp01(x_hat));
            std::vector<double> r(n_vars, 0.0);
            for (std::size_t pos = 0; pos < prefix_len; ++pos) {
                r[order[pos]] = slope;
                r[k_sets + 1 + order[pos]] = -1.0;
            }
            lp.add_ub(r, offset);
        };
        for (std::size_t n = 1; n <= k_sets; ++n)
            for (double x : {0.25, 0.5, 0.75}) add_cut(n, x);

        LpSolution sol;
        bool converged = false;
        int cuts = static_cast<int>(3 * k_sets);
        while (cuts < max_cuts) {
            sol = solve_lp(lp);
            if (sol.status != LpStatus::Optimal) break;
            double worst = 0.0;
            std::size_t worst_prefix = 0;
            double worst_x = 0.0;
            for (std::size_t n = 1; n <= k_sets; ++n) {
                double qs = 0.0, zs = 0.0;
                for (std::size_t pos = 0; pos < n; ++pos) {
                    qs += sol.x[order[pos]];
                    zs += sol.x[k_sets + 1 + order[pos]];
                }
                const double gap = prior.partial_quantile_integral(clamp01(qs)) - zs;
                if (gap > worst) {
                    worst = gap;
                    worst_prefix = n;
                    worst_x = qs;
                }
            }
            if (worst < cut_tol) {
                converged = true;
                break;
            }
            add_cut(worst_prefix, worst_x);
            ++cuts;
        }
        if (sol.status != LpStatus::Optimal || !converged) continue;

        DesignResult res;
        res.regime = "R4";
        res.value = sol.objective;
        res.diagnostics.metrics["placement"] = static_cast<double>(slot);
        res.diagnostics.metrics["cuts"] = static_cast<double>(cuts);
        for (std::size_t pos = 0; pos <= k_sets; ++pos) {
            const std::size_t idx = order[pos];
            const double q = sol.x[idx];
            if (q < 1e-12) continue;
            res.direct.q.push_back(q);
            res.direct.theta_bar.push_back(sol.x[k_sets + 1 + idx] / q);
        }
        if (!best || res.value > best->value + 1e-12) best = std::move(res);
    }
    if (!best) throw SolverError("design_r4_general: every placement infeasible");
    return *best;
}

// Classifies the instance and dispatches to the matching designer.
inline DesignResult design(const Prior& prior, const EquilibriumMap& map,
                           const std::vector<std::pair<double, double>>& omegas) {
    const PreferredSets sets = preimage_intervals(omegas, map, prior.upper());
    const Regime regime = classify_regime(prior, sets);
    DesignResult res;
    switch (regime) {
        case Regime::R1: {
            res.regime = "R1";
            res.value = 1.0;
            res.mechanism = no_info(prior.upper());
            res.direct.q = {1.0};
            res.direct.theta_bar = {prior.mean()};
            break;
        }
        case Regime::R2: res = design_r2(prior, sets); break;
        case Regime::R3: res = design_r3(prior, sets); break;
        case Regime::R4: {
            auto mixed = design_r4a(prior, map, sets);
            res = mixed ? *mixed : design_r4_general(prior, sets);
            break;
        }
    }
    for (const auto& w : sets.warnings) res.diagnostics.notes.push_back(w);
    return res;
}

}  // namespace signalcraft
