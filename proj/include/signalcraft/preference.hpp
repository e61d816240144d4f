#pragma once

#include <functional>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "signalcraft/common.hpp"
#include "signalcraft/dist.hpp"
#include "signalcraft/equilibrium.hpp"

namespace signalcraft {

// Fixed target band(s) for the remote mass, independent of the state.
struct SetBasedPref {
    std::vector<std::pair<double, double>> omegas;  // disjoint, increasing

    SetBasedPref() = default;
    explicit SetBasedPref(std::vector<std::pair<double, double>> o) : omegas(std::move(o)) {
        double prev_hi = -1.0;
        for (const auto& [lo, hi] : omegas) {
            if (!(0.0 <= lo && lo <= hi && hi <= 1.0))
                throw std::invalid_argument("set preference: intervals must sit inside [0, 1]");
            if (!(lo > prev_hi))
                throw std::invalid_argument("set preference: intervals must be disjoint increasing");
            prev_hi = hi;
        }
    }

    bool contains(double y) const {
        for (const auto& [lo, hi] : omegas)
            if (y >= lo - 1e-12 && y <= hi + 1e-12) return true;
        return false;
    }
};

// Capacity rule in posterior-mean space: the outcome complies in state theta
// iff the induced posterior mean is at least gamma(theta). gamma is a
// nondecreasing step function, gammas[k] on [breaks[k], breaks[k+1]).
// An infinite gamma marks states that can never comply.
struct CapacityPref {
    std::vector<double> breaks;
    std::vector<double> gammas;

    CapacityPref() = default;
    CapacityPref(std::vector<double> b, std::vector<double> g)
        : breaks(std::move(b)), gammas(std::move(g)) {
        if (breaks.empty() || breaks.size() != gammas.size())
            throw std::invalid_argument("capacity preference: breaks/gammas size mismatch");
        if (std::abs(breaks.front()) > 1e-12)
            throw std::invalid_argument("capacity preference: first break must be 0");
        for (std::size_t k = 1; k < breaks.size(); ++k) {
            if (!(breaks[k] > breaks[k - 1]))
                throw std::invalid_argument("capacity preference: breaks must increase");
            if (gammas[k] < gammas[k - 1] - 1e-12)
                throw std::invalid_argument("capacity preference: gamma must be nondecreasing");
        }
    }

    // Builds gamma(theta) = m^{-1}(b(theta)) from a remote-mass capacity rule.
    static CapacityPref from_remote_floor(std::vector<double> breaks, const std::vector<double>& b,
                                          const EquilibriumMap& map, double theta_max) {
        std::vector<double> gammas;
        gammas.reserve(b.size());
        for (double floor_y : b) {
            if (!(floor_y >= 0.0 && floor_y <= 1.0))
                throw std::invalid_argument("capacity preference: b outside [0, 1]");
            const auto gamma = map.remote_mass_inverse(floor_y, theta_max);
            gammas.push_back(gamma.value_or(kInf));
        }
        return CapacityPref(std::move(breaks), std::move(gammas));
    }

    // Indicator boundaries are honored to this tolerance; the assignment
    // programs produce posteriors that sit exactly on a threshold.
    static constexpr double kEdgeTol = 1e-9;

    double gamma_at(double theta) const {
        std::size_t k = 0;
        while (k + 1 < breaks.size() && theta >= breaks[k + 1]) ++k;
        return gammas[k];
    }

    bool complies(double theta_bar, double theta) const {
        return theta_bar >= gamma_at(theta) - kEdgeTol;
    }

    // End of {theta : gamma(theta) <= c}, always an interval [0, T).
    double compliant_end(double c) const {
        if (gammas.front() > c + kEdgeTol) return 0.0;
        for (std::size_t k = 1; k < gammas.size(); ++k)
            if (gammas[k] > c + kEdgeTol) return breaks[k];
        return kInf;
    }
};

// Two-sided state-dependent acceptance band in remote-mass space.
struct BandPref {
    std::function<double(double)> lo;
    std::function<double(double)> hi;

    bool complies(double y, double theta) const {
        return y >= lo(theta) - 1e-12 && y <= hi(theta) + 1e-12;
    }
};

// Smooth utility of (remote mass, state) with its Lipschitz constants.
struct SmoothPref {
    std::function<double(double, double)> h;  // (y, theta)
    double eta1 = 0.0;
    double eta2 = 0.0;
};

using Preference = std::variant<SetBasedPref, CapacityPref, BandPref, SmoothPref>;

inline bool is_indicator(const Preference& pref) {
    return !std::holds_alternative<SmoothPref>(pref);
}

// Occupancy objective from the computational study: a weighted mix of
// in-person productivity net infection losses plus a moderation bonus.
inline SmoothPref make_h_rho(double rho, double theta_max) {
    SmoothPref pref;
    pref.h = [rho](double y, double theta) {
        return 0.5 * ((1.0 - rho) * (5.0 * (1.0 - y * y) - theta * (1.0 - y) * (1.0 - y))) +
               rho * y * (1.0 - y);
    };
    pref.eta1 = 0.5 * (1.0 - rho) * (10.0 + 2.0 * theta_max) + rho;
    pref.eta2 = 0.5 * (1.0 - rho);
    return pref;
}

// Reference utility: expected gain of in-person workers net the quadratic
// infection loss, traded off by lambda.
inline SmoothPref make_h_ref(double lambda, const ValueDist& values, double theta_max) {
    SmoothPref pref;
    const double total_gain = values.mean();
    pref.h = [lambda, values, total_gain](double y, double theta) {
        const double gain = total_gain - values.partial_quantile_integral(clamp01(y));
        return lambda * gain - (1.0 - lambda) * theta * (1.0 - y) * (1.0 - y);
    };
    pref.eta1 = lambda * values.quantile(1.0) + 2.0 * (1.0 - lambda) * theta_max;
    pref.eta2 = 1.0 - lambda;
    return pref;
}

}  // namespace signalcraft
