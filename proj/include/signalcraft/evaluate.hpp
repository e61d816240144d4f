#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "signalcraft/common.hpp"
#include "signalcraft/dist.hpp"
#include "signalcraft/equilibrium.hpp"
#include "signalcraft/mechanism.hpp"
#include "signalcraft/numeric.hpp"
#include "signalcraft/preference.hpp"
#include "signalcraft/rng.hpp"

namespace signalcraft {

struct EvalSettings {
    double quad_tol = 1e-9;
    int cell_scan = 512;   // indicator scan points per mechanism cell
    int range_scan = 2048; // indicator scan points over the whole state range
};

namespace detail {

// Per-signal view keeping the original column indices; signals with
// negligible probability have q = 0 and must be skipped.
struct SignalView {
    double q = 0.0;
    double theta_bar = 0.0;
    double y = 0.0;
};

inline std::vector<SignalView> signal_views(const Prior& prior, const IntervalMechanism& mech,
                                            const Preference& pref, const EquilibriumMap& map) {
    if (prior.upper() > mech.upper() + 1e-12)
        throw std::invalid_argument("evaluate: mechanism does not cover the prior support");
    std::vector<double> mass, pm;
    interval_moments(mech, prior, mass, pm);
    const bool need_mass = !std::holds_alternative<CapacityPref>(pref);
    std::vector<SignalView> views(mech.signal_count());
    for (std::size_t i = 0; i < views.size(); ++i) {
        double q = 0.0, num = 0.0;
        for (std::size_t j = 0; j < mech.interval_count(); ++j) {
            q += mech.rows[j][i] * mass[j];
            num += mech.rows[j][i] * pm[j];
        }
        if (q < kSignalMassFloor) continue;
        views[i].q = q;
        views[i].theta_bar = num / q;
        if (need_mass) views[i].y = map.remote_mass(views[i].theta_bar);
    }
    return views;
}

inline double signal_utility(const Preference& pref, const SignalView& s, double theta) {
    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, SetBasedPref>) return p.contains(s.y) ? 1.0 : 0.0;
            if constexpr (std::is_same_v<T, CapacityPref>)
                return p.complies(s.theta_bar, theta) ? 1.0 : 0.0;
            if constexpr (std::is_same_v<T, BandPref>) return p.complies(s.y, theta) ? 1.0 : 0.0;
            if constexpr (std::is_same_v<T, SmoothPref>) return p.h(s.y, theta);
        },
        pref);
}

// Mass of {theta in (lo, hi] : pred(theta)} for an atomless distribution,
// located by scanning plus bisection at each flip.
template <class Pred>
double indicator_mass(const Prior& leaf, double lo, double hi, const Pred& pred, int scan) {
    if (!(hi > lo)) return 0.0;
    std::vector<double> cuts{lo};
    bool prev = pred(lo);
    double prev_t = lo;
    for (int k = 1; k <= scan; ++k) {
        const double t = lo + (hi - lo) * k / scan;
        const bool cur = pred(t);
        if (cur != prev) {
            double a = prev_t, b = t;
            for (int it = 0; it < 60 && b - a > 1e-13 * (1.0 + hi); ++it) {
                const double mid = 0.5 * (a + b);
                (pred(mid) == prev ? a : b) = mid;
            }
            cuts.push_back(0.5 * (a + b));
        }
        prev = cur;
        prev_t = t;
    }
    cuts.push_back(hi);
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        if (!pred(0.5 * (cuts[k] + cuts[k + 1]))) continue;
        total += leaf.cdf(cuts[k + 1]) - leaf.cdf(cuts[k]);
    }
    return total;
}

// Expected utility contribution of one leaf component of the prior, given
// the posterior views computed under the full prior.
inline double leaf_value(const Prior& leaf, const Preference& pref, const IntervalMechanism& mech,
                         const std::vector<SignalView>& views, const EvalSettings& st) {
    if (leaf.is_discrete()) {
        double total = 0.0;
        const auto& nu = leaf.atoms();
        const auto& p = leaf.masses();
        for (std::size_t a = 0; a < nu.size(); ++a) {
            if (p[a] <= 0.0) continue;
            const auto& row = mech.rows[mech.interval_of(nu[a])];
            double util = 0.0;
            for (std::size_t i = 0; i < views.size(); ++i) {
                if (row[i] <= 0.0 || views[i].q <= 0.0) continue;
                util += row[i] * signal_utility(pref, views[i], nu[a]);
            }
            total += p[a] * util;
        }
        return total;
    }

    double total = 0.0;
    for (std::size_t j = 0; j < mech.interval_count(); ++j) {
        const double lo = mech.breakpoints[j];
        const double hi = std::min(mech.breakpoints[j + 1], leaf.upper());
        if (!(hi > lo)) continue;
        const double cell_mass = leaf.cdf(hi) - leaf.cdf(lo);
        if (cell_mass <= 0.0) continue;
        for (std::size_t i = 0; i < views.size(); ++i) {
            const double w = mech.rows[j][i];
            if (w <= 0.0 || views[i].q <= 0.0) continue;
            const SignalView& s = views[i];
            const double part = std::visit(
                [&](const auto& p) -> double {
                    using T = std::decay_t<decltype(p)>;
                    if constexpr (std::is_same_v<T, SetBasedPref>) {
                        return p.contains(s.y) ? cell_mass : 0.0;
                    }
                    if constexpr (std::is_same_v<T, CapacityPref>) {
                        const double end = p.compliant_end(s.theta_bar);
                        if (end <= lo) return 0.0;
                        if (end >= hi) return cell_mass;
                        return leaf.cdf_left(end) - leaf.cdf(lo);
                    }
                    if constexpr (std::is_same_v<T, BandPref>) {
                        auto pred = [&](double theta) { return p.complies(s.y, theta); };
                        return indicator_mass(leaf, lo, hi, pred, st.cell_scan);
                    }
                    if constexpr (std::is_same_v<T, SmoothPref>) {
                        auto f = [&](double theta) { return p.h(s.y, theta) * leaf.density(theta); };
                        return adaptive_simpson(f, lo, hi, st.quad_tol);
                    }
                },
                pref);
            total += w * part;
        }
    }
    return total;
}

}  // namespace detail

// Expected planner utility of a mechanism: E[h(m(posterior mean); state)].
inline double value(const Prior& prior, const Preference& pref, const IntervalMechanism& mech,
                    const EquilibriumMap& map, const EvalSettings& st = {}) {
    const auto views = detail::signal_views(prior, mech, pref, map);
    double total = 0.0;
    prior.for_leaf_components([&](double w, const Prior& leaf) {
        total += w * detail::leaf_value(leaf, pref, mech, views, st);
    });
    return total;
}

inline double value_no_info(const Prior& prior, const Preference& pref, const EquilibriumMap& map,
                            const EvalSettings& st = {}) {
    return value(prior, pref, no_info(prior.upper()), map, st);
}

// Benchmark value when the state is always disclosed: E[h(m(state); state)].
inline double value_full_info(const Prior& prior, const Preference& pref,
                              const EquilibriumMap& map, const EvalSettings& st = {}) {
    double total = 0.0;
    prior.for_leaf_components([&](double weight, const Prior& leaf) {
        if (leaf.is_discrete()) {
            const auto& nu = leaf.atoms();
            const auto& p = leaf.masses();
            double part = 0.0;
            for (std::size_t a = 0; a < nu.size(); ++a) {
                if (p[a] <= 0.0) continue;
                detail::SignalView s;
                s.q = p[a];
                s.theta_bar = nu[a];
                if (!std::holds_alternative<CapacityPref>(pref)) s.y = map.remote_mass(nu[a]);
                part += p[a] * detail::signal_utility(pref, s, nu[a]);
            }
            total += weight * part;
            return;
        }
        const double m_hi = leaf.upper();
        const double part = std::visit(
            [&](const auto& p) -> double {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, SetBasedPref>) {
                    double mass = 0.0;
                    for (const auto& [w_lo, w_hi] : p.omegas) {
                        if (map.remote_mass(0.0) > w_hi) continue;
                        const auto pre_lo = map.remote_mass_inverse(w_lo, m_hi);
                        if (!pre_lo.has_value()) continue;
                        double pre_hi = m_hi;
                        if (map.remote_mass(m_hi) > w_hi) {
                            auto pred = [&](double t) { return map.remote_mass(t) <= w_hi; };
                            pre_hi = bisect_boundary(pred, 0.0, m_hi, (m_hi + 1.0) * 1e-14);
                        }
                        mass += std::max(0.0, leaf.cdf(pre_hi) - leaf.cdf(*pre_lo));
                    }
                    return mass;
                }
                if constexpr (std::is_same_v<T, CapacityPref>) {
                    double mass = 0.0;
                    for (std::size_t k = 0; k < p.breaks.size(); ++k) {
                        const double piece_lo = p.breaks[k];
                        const double piece_hi =
                            (k + 1 < p.breaks.size()) ? std::min(p.breaks[k + 1], m_hi) : m_hi;
                        if (!(piece_hi > piece_lo) || p.gammas[k] == kInf) continue;
                        const double sub_lo = std::max(piece_lo, p.gammas[k]);
                        if (sub_lo >= piece_hi) continue;
                        mass += leaf.cdf(piece_hi) - leaf.cdf(sub_lo);
                    }
                    return mass;
                }
                if constexpr (std::is_same_v<T, BandPref>) {
                    auto pred = [&](double theta) { return p.complies(map.remote_mass(theta), theta); };
                    return detail::indicator_mass(leaf, 0.0, m_hi, pred, st.range_scan);
                }
                if constexpr (std::is_same_v<T, SmoothPref>) {
                    auto f = [&](double theta) {
                        return p.h(map.remote_mass(theta), theta) * leaf.density(theta);
                    };
                    return adaptive_simpson(f, 0.0, m_hi, st.quad_tol);
                }
            },
            pref);
        total += weight * part;
    });
    return total;
}

// Per-state compliance/utility for a discrete prior; weighting by the state
// masses recovers value().
inline std::vector<double> conditional_values(const DiscretePrior& dprior, const Preference& pref,
                                              const IntervalMechanism& mech,
                                              const EquilibriumMap& map,
                                              const EvalSettings& st = {}) {
    const Prior prior = dprior.as_prior();
    const auto views = detail::signal_views(prior, mech, pref, map);
    (void)st;
    std::vector<double> out(dprior.nu.size(), 0.0);
    for (std::size_t a = 0; a < dprior.nu.size(); ++a) {
        const auto& row = mech.rows[mech.interval_of(dprior.nu[a])];
        double util = 0.0;
        for (std::size_t i = 0; i < views.size(); ++i) {
            if (row[i] <= 0.0 || views[i].q <= 0.0) continue;
            util += row[i] * detail::signal_utility(pref, views[i], dprior.nu[a]);
        }
        out[a] = util;
    }
    return out;
}

struct McResult {
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t seed = 0;
    std::size_t samples = 0;
};

// Seeded Monte Carlo estimate of value(); deterministic for a given seed.
inline McResult value_monte_carlo(const Prior& prior, const Preference& pref,
                                  const IntervalMechanism& mech, const EquilibriumMap& map,
                                  std::size_t samples, std::uint64_t seed) {
    const auto views = detail::signal_views(prior, mech, pref, map);
    Xoshiro256 rng(seed);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        const double theta = prior.quantile(rng.uniform());
        const auto& row = mech.rows[mech.interval_of(theta)];
        double pick = rng.uniform();
        std::size_t signal = row.size() - 1;
        for (std::size_t i = 0; i < row.size(); ++i) {
            pick -= row[i];
            if (pick <= 0.0) {
                signal = i;
                break;
            }
        }
        const double util =
            views[signal].q > 0.0 ? detail::signal_utility(pref, views[signal], theta) : 0.0;
        sum += util;
        sum_sq += util * util;
    }
    McResult res;
    res.seed = seed;
    res.samples = samples;
    res.mean = sum / static_cast<double>(samples);
    const double var =
        std::max(0.0, sum_sq / static_cast<double>(samples) - res.mean * res.mean);
    res.std_error = std::sqrt(var / static_cast<double>(samples));
    return res;
}

struct EvalReport {
    double value = 0.0;
    std::vector<double> conditional;  // empty unless the prior is discrete
    double v_no_info = 0.0;
    double v_full_info = 0.0;
    std::string method = "quadrature";
    std::uint64_t seed = 0;
    std::size_t mc_samples = 0;
};

inline EvalReport evaluate_report(const Prior& prior, const Preference& pref,
                                  const IntervalMechanism& mech, const EquilibriumMap& map,
                                  const EvalSettings& st = {}) {
    EvalReport report;
    report.value = value(prior, pref, mech, map, st);
    report.v_no_info = value_no_info(prior, pref, map, st);
    report.v_full_info = value_full_info(prior, pref, map, st);
    if (prior.is_discrete()) {
        DiscretePrior d;
        d.nu = prior.atoms();
        d.p = prior.masses();
        d.upper = prior.upper();
        report.conditional = conditional_values(d, pref, mech, map, st);
    }
    return report;
}

}  // namespace signalcraft
