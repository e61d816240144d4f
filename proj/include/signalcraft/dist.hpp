#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "signalcraft/common.hpp"
#include "signalcraft/numeric.hpp"

namespace signalcraft {

class Prior;

struct DiscretePrior {
    std::vector<double> nu;  // support points, strictly increasing
    std::vector<double> p;   // masses
    double delta = 0.0;      // discretization rate used to build it, 0 if none
    double upper = 0.0;      // end of the covered grid
    bool grid_extended = false;

    Prior as_prior() const;
    double mean() const {
        double s = 0.0;
        for (std::size_t j = 0; j < nu.size(); ++j) s += nu[j] * p[j];
        return s;
    }
};

namespace detail {

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}
// Antiderivative of the standard normal CDF.
inline double std_normal_cdf_integral(double x) {
    return x * std_normal_cdf(x) + std_normal_pdf(x);
}

struct UniformNode {
    double a, b;
};
struct TruncExpNode {
    double rate, m, z;  // z = 1 - exp(-rate*m)
};
struct TruncNormalNode {
    double mu, sd, m, phi_lo, z;  // z = Phi((m-mu)/sd) - Phi((0-mu)/sd)
};
struct DiscreteNode {
    std::vector<double> nu, p, cum;
};
struct MixtureNode {
    std::vector<Prior> parts;
    std::vector<double> w;
};

using PriorNode =
    std::variant<UniformNode, TruncExpNode, TruncNormalNode, DiscreteNode, MixtureNode>;

}  // namespace detail

// A distribution on [0, M]. Supplies the CDF, generalized inverses, partial
// quantile integrals and the delta-discretization. Immutable; cheap to copy.
class Prior {
  public:
    static Prior uniform(double a, double b) {
        if (!(a >= 0.0) || !(b > a)) throw std::invalid_argument("uniform: need 0 <= a < b");
        return Prior(detail::UniformNode{a, b}, 1.0 / (b - a));
    }

    static Prior truncated_exponential(double rate, double m) {
        if (!(rate > 0.0) || !(m > 0.0))
            throw std::invalid_argument("truncated_exponential: need rate > 0, M > 0");
        const double z = -std::expm1(-rate * m);
        return Prior(detail::TruncExpNode{rate, m, z}, rate / z);
    }

    static Prior truncated_normal(double mu, double sd, double m) {
        if (!(sd > 0.0) || !(m > 0.0))
            throw std::invalid_argument("truncated_normal: need sd > 0, M > 0");
        const double lo = detail::std_normal_cdf((0.0 - mu) / sd);
        const double hi = detail::std_normal_cdf((m - mu) / sd);
        const double z = hi - lo;
        if (!(z > 1e-300)) throw std::invalid_argument("truncated_normal: no mass on [0, M]");
        const double xi_star = clamp(mu, 0.0, m);
        const double bound = detail::std_normal_pdf((xi_star - mu) / sd) / (sd * z);
        return Prior(detail::TruncNormalNode{mu, sd, m, lo, z}, bound);
    }

    static Prior discrete(std::vector<double> nu, std::vector<double> p) {
        if (nu.empty() || nu.size() != p.size())
            throw std::invalid_argument("discrete: support/mass size mismatch");
        double total = 0.0;
        for (std::size_t j = 0; j < nu.size(); ++j) {
            if (!(nu[j] >= 0.0)) throw std::invalid_argument("discrete: negative support point");
            if (j > 0 && !(nu[j] > nu[j - 1]))
                throw std::invalid_argument("discrete: support must be strictly increasing");
            if (!(p[j] >= 0.0)) throw std::invalid_argument("discrete: negative mass");
            total += p[j];
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("discrete: masses must sum to 1");
        std::vector<double> cum(p.size());
        std::partial_sum(p.begin(), p.end(), cum.begin());
        cum.back() = 1.0;
        return Prior(detail::DiscreteNode{std::move(nu), std::move(p), std::move(cum)},
                     std::nullopt);
    }

    static Prior mixture(std::vector<Prior> parts, std::vector<double> weights);

    static Prior from_samples(std::vector<double> samples) {
        if (samples.empty()) throw std::invalid_argument("from_samples: empty sample set");
        std::sort(samples.begin(), samples.end());
        if (samples.front() < 0.0) throw std::invalid_argument("from_samples: negative sample");
        std::vector<double> nu, p;
        const double w = 1.0 / static_cast<double>(samples.size());
        for (double s : samples) {
            if (!nu.empty() && s == nu.back())
                p.back() += w;
            else {
                nu.push_back(s);
                p.push_back(w);
            }
        }
        return discrete(std::move(nu), std::move(p));
    }

    double upper() const;

    double cdf(double t) const;
    double cdf_left(double t) const;

    // sup{t : CDF(t) <= u}, clamped to [0, M].
    double quantile(double u) const;
    // inf{t : CDF(t) >= u}.
    double quantile_low(double u) const;

    // integral of the CDF over [0, q]
    double cdf_integral(double q) const;

    // integral of the quantile over [0, x]; convex, equals the mean at x = 1
    double partial_quantile_integral(double x) const {
        if (x < -1e-12 || x > 1.0 + 1e-12)
            throw std::invalid_argument("partial_quantile_integral: x outside [0, 1]");
        x = clamp01(x);
        if (x == 0.0) return 0.0;
        const double q = quantile_low(x);
        return x * q - cdf_integral(q);
    }

    double mean() const { return upper() - cdf_integral(upper()); }

    // sup{x : partial_quantile_integral(x) <= x * theta}
    double bar_f(double theta) const {
        if (theta >= mean()) return 1.0;
        auto pred = [&](double x) { return partial_quantile_integral(x) <= x * theta; };
        return bisect_boundary(pred, 0.0, 1.0, 1e-12);
    }

    double conditional_mean_below(double t) const {
        const double mass = cdf(t);
        if (mass < 1e-12) throw std::invalid_argument("empty condition");
        return partial_quantile_integral(mass) / mass;
    }

    double conditional_mean_above(double t) const {
        const double mass = 1.0 - cdf_left(t);
        if (mass < 1e-12) throw std::invalid_argument("empty condition");
        return (mean() - partial_quantile_integral(1.0 - mass)) / mass;
    }

    std::optional<double> density_bound() const { return density_bound_; }

    Prior with_density_bound(double kappa) const {
        Prior copy = *this;
        copy.density_bound_ = kappa;
        return copy;
    }

    bool has_density() const;
    double density(double t) const;

    bool is_discrete() const { return std::holds_alternative<detail::DiscreteNode>(*node_); }
    const std::vector<double>& atoms() const { return disc().nu; }
    const std::vector<double>& masses() const { return disc().p; }

    // Flattens mixtures into weighted leaf distributions.
    template <class Fn>
    void for_leaf_components(Fn&& fn, double weight = 1.0) const;

    DiscretePrior delta_discretize(double delta) const {
        if (!(delta > 0.0)) throw std::invalid_argument("delta_discretize: delta must be > 0");
        const double m = upper();
        const double cells = m * delta;
        int n = static_cast<int>(std::ceil(cells - 1e-9));
        if (n < 1) n = 1;
        const bool extended = std::abs(cells - static_cast<double>(n)) > 1e-9;
        DiscretePrior out;
        out.delta = delta;
        out.upper = static_cast<double>(n) / delta;
        out.grid_extended = extended;
        out.nu.resize(n);
        out.p.resize(n);
        double prev = 0.0;
        for (int j = 1; j <= n; ++j) {
            out.nu[j - 1] = static_cast<double>(j - 1) / delta;
            const double cur = (j == n) ? 1.0 : cdf(static_cast<double>(j) / delta);
            out.p[j - 1] = cur - prev;
            prev = cur;
        }
        return out;
    }

  private:
    template <class Node>
    Prior(Node node, std::optional<double> bound)
        : node_(std::make_shared<const detail::PriorNode>(std::move(node))),
          density_bound_(bound) {}

    const detail::DiscreteNode& disc() const {
        const auto* d = std::get_if<detail::DiscreteNode>(node_.get());
        if (!d) throw std::logic_error("not a discrete distribution");
        return *d;
    }

    std::shared_ptr<const detail::PriorNode> node_;
    std::optional<double> density_bound_;
};

inline Prior Prior::mixture(std::vector<Prior> parts, std::vector<double> weights) {
    if (parts.empty() || parts.size() != weights.size())
        throw std::invalid_argument("mixture: parts/weights size mismatch");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("mixture: negative weight");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture: weights must sum to 1");
    std::optional<double> bound = 0.0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!bound.has_value()) break;
        auto part_bound = parts[i].density_bound();
        if (part_bound.has_value())
            *bound += weights[i] * *part_bound;
        else
            bound.reset();
    }
    return Prior(detail::MixtureNode{std::move(parts), std::move(weights)}, bound);
}

inline double Prior::upper() const {
    return std::visit(
        [](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, detail::UniformNode>) return n.b;
            if constexpr (std::is_same_v<T, detail::TruncExpNode>) return n.m;
            if constexpr (std::is_same_v<T, detail::TruncNormalNode>) return n.m;
            if constexpr (std::is_same_v<T, detail::DiscreteNode>) return n.nu.back();
            if constexpr (std::is_same_v<T, detail::MixtureNode>) {
                double m = 0.0;
                for (const auto& part : n.parts) m = std::max(m, part.upper());
                return m;
            }
        },
        *node_);
}

inline double Prior::cdf(double t) const {
    return std::visit(
        [&](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, detail::UniformNode>) {
                if (t < n.a) return 0.0;
                if (t >= n.b) return 1.0;
                return (t - n.a) / (n.b - n.a);
            }
            if constexpr (std::is_same_v<T, detail::TruncExpNode>) {
                if (t <= 0.0) return 0.0;
                if (t >= n.m) return 1.0;
                return -std::expm1(-n.rate * t) / n.z;
            }
            if constexpr (std::is_same_v<T, detail::TruncNormalNode>) {
                if (t <= 0.0) return 0.0;
                if (t >= n.m) return 1.0;
                return (detail::std_normal_cdf((t - n.mu) / n.sd) - n.phi_lo) / n.z;
            }
            if constexpr (std::is_same_v<T, detail::DiscreteNode>) {
                auto it = std::upper_bound(n.nu.begin(), n.nu.end(), t);
                if (it == n.nu.begin()) return 0.0;
                return n.cum[static_cast<std::size_t>(it - n.nu.begin()) - 1];
            }
            if constexpr (std::is_same_v<T, detail::MixtureNode>) {
                double s = 0.0;
                for (std::size_t i = 0; i < n.parts.size(); ++i) s += n.w[i] * n.parts[i].cdf(t);
                return s;
            }
        },
        *node_);
}

inline double Prior::cdf_left(double t) const {
    return std::visit(
        [&](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, detail::DiscreteNode>) {
                auto it = std::lower_bound(n.nu.begin(), n.nu.end(), t);
                if (it == n.nu.begin()) return 0.0;
                return n.cum[static_cast<std::size_t>(it - n.nu.begin()) - 1];
            } else if constexpr (std::is_same_v<T, detail::MixtureNode>) {
                double s = 0.0;
                for (std::size_t i = 0; i < n.parts.size(); ++i)
                    s += n.w[i] * n.parts[i].cdf_left(t);
                return s;
            } else {
                return cdf(t);
            }
        },
        *node_);
}

inline double Prior::quantile(double u) const {
    if (u < -1e-12 || u > 1.0 + 1e-12) throw std::invalid_argument("quantile: u outside [0, 1]");
    u = clamp01(u);
    return std::visit(
        [&](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, detail::UniformNode>) {
                return n.a + u * (n.b - n.a);
            }
            if constexpr (std::is_same_v<T, detail::TruncExpNode>) {
                return u >= 1.0 ? n.m : std::min(n.m, -std::log1p(-u * n.z) / n.rate);
            }
            if constexpr (std::is_same_v<T, detail::TruncNormalNode>) {
                if (u >= 1.0) return n.m;
                auto pred = [&](double t) { return cdf(t) <= u; };
                if (!pred(0.0)) return 0.0;
                return bisect_boundary(pred, 0.0, n.m, n.m * 1e-15);
            }
            if constexpr (std::is_same_v<T, detail::DiscreteNode>) {
                for (std::size_t k = 0; k < n.cum.size(); ++k)
                    if (n.cum[k] > u) return n.nu[k];
                return n.nu.back();
            }
            if constexpr (std::is_same_v<T, detail::MixtureNode>) {
                const double m = upper();
                auto pred = [&](double t) { return cdf(t) <= u; };
                if (!pred(0.0)) return 0.0;
                return bisect_boundary(pred, 0.0, m, (m + 1.0) * 1e-15);
            }
        },
        *node_);
}

inline double Prior::quantile_low(double u) const {
    u = clamp01(u);
    if (u == 0.0) return 0.0;
    return std::visit(
        [&](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, detail::DiscreteNode>) {
                if (u <= 0.0) return 0.0;
                for (std::size_t k = 0; k < n.cum.size(); ++k)
                    if (n.cum[k] >= u) return n.nu[k];
                return n.nu.back();
            } else if constexpr (std::is_same_v<T, detail::MixtureNode>) {
                const double m = upper();
                if (cdf(0.0) >= u) return 0.0;
                auto pred = [&](double t) { return cdf(t) < u; };
                return bisect_boundary(pred, 0.0, m, (m + 1.0) * 1e-15);
            } else {
                return quantile(u);
            }
        },
        *node_);
}

inline double Prior::cdf_integral(double q) const {
    if (q <= 0.0) return 0.0;
    return std::visit(
        [&](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, detail::UniformNode>) {
                if (q <= n.a) return 0.0;
                if (q <= n.b) {
                    const double d = q - n.a;
                    return 0.5 * d * d / (n.b - n.a);
                }
                return 0.5 * (n.b - n.a) + (q - n.b);
            }
            if constexpr (std::is_same_v<T, detail::TruncExpNode>) {
                const double t = std::min(q, n.m);
                const double base = (t + std::expm1(-n.rate * t) / n.rate) / n.z;
                return base + std::max(0.0, q - n.m);
            }
            if constexpr (std::is_same_v<T, detail::TruncNormalNode>) {
                const double t = std::min(q, n.m);
                const double xi0 = (0.0 - n.mu) / n.sd;
                const double xit = (t - n.mu) / n.sd;
                const double raw = n.sd * (detail::std_normal_cdf_integral(xit) -
                                           detail::std_normal_cdf_integral(xi0));
                return (raw - n.phi_lo * t) / n.z + std::max(0.0, q - n.m);
            }
            if constexpr (std::is_same_v<T, detail::DiscreteNode>) {
                double s = 0.0;
                for (std::size_t k = 0; k < n.nu.size() && n.nu[k] < q; ++k)
                    s += n.p[k] * (q - n.nu[k]);
                return s;
            }
            if constexpr (std::is_same_v<T, detail::MixtureNode>) {
                double s = 0.0;
                for (std::size_t i = 0; i < n.parts.size(); ++i)
                    s += n.w[i] * n.parts[i].cdf_integral(q);
                return s;
            }
        },
        *node_);
}

inline bool Prior::has_density() const {
    return std::visit(
        [](const auto& n) -> bool {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, detail::DiscreteNode>) return false;
            else if constexpr (std::is_same_v<T, detail::MixtureNode>) {
                for (const auto& part : n.parts)
                    if (!part.has_density()) return false;
                return true;
            } else {
                return true;
            }
        },
        *node_);
}

inline double Prior::density(double t) const {
    return std::visit(
        [&](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, detail::UniformNode>) {
                return (t >= n.a && t <= n.b) ? 1.0 / (n.b - n.a) : 0.0;
            } else if constexpr (std::is_same_v<T, detail::TruncExpNode>) {
                return (t >= 0.0 && t <= n.m) ? n.rate * std::exp(-n.rate * t) / n.z : 0.0;
            } else if constexpr (std::is_same_v<T, detail::TruncNormalNode>) {
                return (t >= 0.0 && t <= n.m)
                           ? detail::std_normal_pdf((t - n.mu) / n.sd) / (n.sd * n.z)
                           : 0.0;
            } else if constexpr (std::is_same_v<T, detail::MixtureNode>) {
                double s = 0.0;
                for (std::size_t i = 0; i < n.parts.size(); ++i)
                    s += n.w[i] * n.parts[i].density(t);
                return s;
            } else {
                throw std::logic_error("density: discrete distribution");
            }
        },
        *node_);
}

template <class Fn>
void Prior::for_leaf_components(Fn&& fn, double weight) const {
    if (const auto* mix = std::get_if<detail::MixtureNode>(node_.get())) {
        for (std::size_t i = 0; i < mix->parts.size(); ++i)
            mix->parts[i].for_leaf_components(fn, weight * mix->w[i]);
    } else {
        fn(weight, *this);
    }
}

inline Prior DiscretePrior::as_prior() const { return Prior::discrete(nu, p); }

}  // namespace signalcraft
