#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "signalcraft/common.hpp"
#include "signalcraft/dist.hpp"

namespace signalcraft {

// The value-of-in-person-work distribution G shares the Prior catalog.
using ValueDist = Prior;

// Infectious cost beta(theta, y) = theta * c1(y) + c2(y).
struct CostModel {
    std::function<double(double)> c1;
    std::function<double(double)> c2;
    double c_upper = 0.0;  // bound on c1, attained at y = 0

    static CostModel linear(double c) {
        if (!(c >= 0.0)) throw std::invalid_argument("linear cost: C must be >= 0");
        return CostModel{[c](double y) { return c * (1.0 - y); }, [](double) { return 0.0; }, c};
    }

    // Two-period community transmission model: cost gamma*p*(1-p)*theta*(1-y).
    static CostModel epidemic(double gamma, double p) {
        if (!(gamma >= 0.0) || p < 0.0 || p > 1.0)
            throw std::invalid_argument("epidemic cost: need gamma >= 0, p in [0, 1]");
        const double c = gamma * p * (1.0 - p);
        return linear(c);
    }

    // Checks the shape requirements on a grid; degenerate c1 == 0 is allowed
    // but reported as a warning.
    std::vector<std::string> validate() const {
        std::vector<std::string> warnings;
        if (std::abs(c1(1.0)) > 1e-12 || std::abs(c2(1.0)) > 1e-12)
            throw std::invalid_argument("cost model: c1(1) and c2(1) must vanish");
        bool strictly_decreasing = true;
        for (int k = 0; k < 100; ++k) {
            const double y0 = k / 100.0, y1 = (k + 1) / 100.0;
            if (!(c1(y1) < c1(y0))) strictly_decreasing = false;
            if (c2(y1) > c2(y0) + 1e-12)
                throw std::invalid_argument("cost model: c2 must be nonincreasing");
            if (c1(y0) > c_upper + 1e-12)
                throw std::invalid_argument("cost model: c1 exceeds its bound C");
        }
        if (!strictly_decreasing) warnings.push_back("c1 is not strictly decreasing (degenerate)");
        return warnings;
    }
};

// Equilibrium response of the population: the map from posterior mean belief
// to the mass of remote agents, m(t) = inf{u >= 0 : G^{-1}(u) >= c1(u) t + c2(u)}.
// An analytic override replaces the crossing computation (used for instances
// posed directly in terms of m).
class EquilibriumMap {
  public:
    EquilibriumMap(ValueDist values, CostModel cost)
        : values_(std::move(values)), cost_(std::move(cost)) {}

    static EquilibriumMap identity() {
        EquilibriumMap map;
        map.override_ = [](double t) { return clamp01(t); };
        return map;
    }

    static EquilibriumMap analytic(std::function<double(double)> fn) {
        EquilibriumMap map;
        map.override_ = std::move(fn);
        return map;
    }

    double remote_mass(double theta_bar) const {
        if (theta_bar < 0.0) throw std::invalid_argument("remote_mass: theta_bar must be >= 0");
        if (override_) return (*override_)(theta_bar);
        auto gap = [&](double u) {
            return values_->quantile(u) - cost_->c1(u) * theta_bar - cost_->c2(u);
        };
        if (gap(0.0) >= 0.0) return 0.0;
        if (gap(1.0 - 1e-13) < 0.0) return 1.0;
        return bisect_first_nonnegative(gap, 0.0, 1.0, 1e-13);
    }

    // inf{theta_bar in [0, theta_max] : m(theta_bar) >= y}; empty when the
    // map never reaches y on that range.
    std::optional<double> remote_mass_inverse(double y, double theta_max) const {
        if (y < -1e-12 || y > 1.0 + 1e-12)
            throw std::invalid_argument("remote_mass_inverse: y outside [0, 1]");
        y = clamp01(y);
        if (y == 0.0) return 0.0;
        if (remote_mass(theta_max) < y) return std::nullopt;
        if (remote_mass(0.0) >= y) return 0.0;
        auto pred = [&](double t) { return remote_mass(t) < y; };
        return bisect_boundary(pred, 0.0, theta_max, (theta_max + 1.0) * 1e-14);
    }

    double critical_type(double y) const {
        if (!values_) throw std::logic_error("critical_type: no value distribution");
        return values_->quantile(y);
    }

    bool has_values() const { return values_.has_value(); }
    const ValueDist& values() const { return *values_; }
    const CostModel& cost() const { return *cost_; }
    std::optional<double> value_density_bound() const {
        return values_ ? values_->density_bound() : std::nullopt;
    }
    double cost_upper() const { return cost_ ? cost_->c_upper : 0.0; }

  private:
    EquilibriumMap() = default;
    std::optional<ValueDist> values_;
    std::optional<CostModel> cost_;
    std::optional<std::function<double(double)>> override_;
};

inline double critical_type(const ValueDist& values, double y) {
    if (y < -1e-12 || y > 1.0 + 1e-12) throw std::invalid_argument("critical_type: y outside [0, 1]");
    return values.quantile(clamp01(y));
}

}  // namespace signalcraft
