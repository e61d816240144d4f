#include <catch2/catch_amalgamated.hpp>

#include "signalcraft/evaluate.hpp"
#include "signalcraft/set_designer.hpp"

using namespace signalcraft;
using Catch::Approx;

namespace {

// Exhaustive two-signal direct search at a fixed resolution; never beats the
// optimum of a one-band instance by more than the grid spacing allows.
double two_signal_grid_oracle(const Prior& prior, const PreferredSets& sets, int steps = 1000) {
    const double mu = prior.mean();
    const double m = prior.upper();
    double best = 0.0;
    for (int qi = 1; qi < steps; ++qi) {
        const double q = static_cast<double>(qi) / steps;
        for (int ti = 0; ti <= steps; ++ti) {
            const double t1 = m * ti / steps;
            const double t2 = (mu - q * t1) / (1.0 - q);
            if (t2 < 0.0 || t2 > m) continue;
            const double lo_q = t1 <= t2 ? q : 1.0 - q;
            const double lo_t = std::min(t1, t2);
            if (lo_q * lo_t < prior.partial_quantile_integral(lo_q) - 1e-9) continue;
            double val = 0.0;
            if (sets.contains(t1, 1e-12)) val += q;
            if (sets.contains(t2, 1e-12)) val += 1.0 - q;
            best = std::max(best, val);
        }
    }
    return best;
}

void check_direct_feasible(const DesignResult& res, const Prior& prior) {
    DirectMechanism sorted = res.direct;
    std::vector<std::size_t> order(sorted.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return res.direct.theta_bar[a] < res.direct.theta_bar[b];
    });
    DirectMechanism d;
    for (std::size_t i : order) {
        d.q.push_back(res.direct.q[i]);
        d.theta_bar.push_back(res.direct.theta_bar[i]);
    }
    CHECK(check_mpc(d, prior, 1e-8).feasible);
}

}  // namespace

TEST_CASE("preimage intervals") {
    SECTION("identity map passes bands through") {
        const auto sets = preimage_intervals({{0.4, 0.6}}, EquilibriumMap::identity(), 1.0);
        REQUIRE(sets.count() == 1);
        CHECK(sets.lo[0] == Approx(0.4).margin(1e-10));
        CHECK(sets.hi[0] == Approx(0.6).margin(1e-10));
    }
    SECTION("upper clamp at the state bound") {
        const EquilibriumMap map(Prior::uniform(0, 6), CostModel::linear(1.0));
        const auto sets = preimage_intervals({{5.0 / 11.0, 1.0}}, map, 10.0);
        REQUIRE(sets.count() == 1);
        CHECK(sets.lo[0] == Approx(5.0).margin(1e-8));
        CHECK(sets.hi[0] == Approx(10.0).margin(1e-10));
    }
    SECTION("full range") {
        const auto sets = preimage_intervals({{0.0, 1.0}}, EquilibriumMap::identity(), 1.0);
        CHECK(sets.lo[0] == Approx(0.0));
        CHECK(sets.hi[0] == Approx(1.0));
    }
    SECTION("unreachable band") {
        const EquilibriumMap map(Prior::uniform(0, 6), CostModel::linear(1.0));
        // m(10) = 0.625, so [0.9, 1] has no preimage on [0, 10]
        CHECK_THROWS_AS(preimage_intervals({{0.9, 1.0}}, map, 10.0), std::invalid_argument);
    }
}

TEST_CASE("regime classification") {
    const Prior u01 = Prior::uniform(0, 1);
    CHECK(classify_regime(u01, PreferredSets::from_theta_intervals({{0.4, 0.6}})) == Regime::R1);
    CHECK(classify_regime(u01, PreferredSets::from_theta_intervals({{0.0, 0.3}})) == Regime::R2);
    CHECK(classify_regime(u01, PreferredSets::from_theta_intervals({{0.7, 0.9}})) == Regime::R3);
    CHECK(classify_regime(u01, PreferredSets::from_theta_intervals({{0.35, 0.45}, {0.55, 0.65}})) ==
          Regime::R4);
}

TEST_CASE("regime R2 design") {
    const Prior u01 = Prior::uniform(0, 1);
    const auto sets = PreferredSets::from_theta_intervals({{0.2, 0.3}});
    const DesignResult res = design_r2(u01, sets);
    CHECK(res.value == Approx(0.6).margin(1e-9));
    REQUIRE(res.mechanism.has_value());
    CHECK(res.mechanism->breakpoints[1] == Approx(0.6).margin(1e-9));
    REQUIRE(res.direct.size() == 2);
    CHECK(res.direct.q[0] == Approx(0.6).margin(1e-9));
    CHECK(res.direct.theta_bar[0] == Approx(0.3).margin(1e-9));
    CHECK(res.direct.q[1] == Approx(0.4).margin(1e-9));
    CHECK(res.direct.theta_bar[1] == Approx(0.8).margin(1e-9));
    CHECK(is_mps(*res.mechanism));
    check_direct_feasible(res, u01);

    SECTION("tangency at the first prefix") {
        const MpcReport report = check_mpc(res.direct, u01, 1e-8);
        CHECK(std::abs(report.prefix_slack[0]) <= 1e-8);
    }
    SECTION("grid oracle cannot do materially better") {
        CHECK(two_signal_grid_oracle(u01, sets) <= res.value + 2e-3);
    }
    SECTION("wider prior") {
        const Prior u520 = Prior::uniform(5, 20);
        const auto wide = PreferredSets::from_theta_intervals({{5.0, 10.0}});
        const DesignResult r = design_r2(u520, wide);
        CHECK(r.value == Approx(std::min(u520.bar_f(10.0), 7.5 / 10.0)).margin(1e-9));
        CHECK(r.value == Approx(2.0 / 3.0).margin(1e-9));
        CHECK(two_signal_grid_oracle(u520, wide) <= r.value + 2e-3);
        check_direct_feasible(r, u520);
    }
    SECTION("unpersuadable atom at the top") {
        const Prior atom = Prior::discrete({20.0}, {1.0});
        const DesignResult r = design_r2(atom, PreferredSets::from_theta_intervals({{5.0, 10.0}}));
        CHECK(r.value == Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("regime R3 design") {
    const Prior u01 = Prior::uniform(0, 1);
    const auto sets = PreferredSets::from_theta_intervals({{0.7, 0.9}});
    const DesignResult res = design_r3(u01, sets);
    CHECK(res.value == Approx(0.6).margin(1e-9));
    REQUIRE(res.direct.size() == 2);
    CHECK(res.direct.q[0] == Approx(0.4).margin(1e-9));
    CHECK(res.direct.theta_bar[0] == Approx(0.2).margin(1e-8));
    CHECK(res.direct.q[1] == Approx(0.6).margin(1e-9));
    CHECK(res.direct.theta_bar[1] == Approx(0.7).margin(1e-8));
    REQUIRE(res.mechanism.has_value());
    CHECK(res.mechanism->breakpoints[1] == Approx(0.4).margin(1e-9));
    check_direct_feasible(res, u01);
    CHECK(two_signal_grid_oracle(u01, sets) <= res.value + 2e-3);

    SECTION("steeper target") {
        const DesignResult r = design_r3(u01, PreferredSets::from_theta_intervals({{0.9, 0.95}}));
        CHECK(r.value == Approx(0.2).margin(1e-9));
        check_direct_feasible(r, u01);
    }
    SECTION("boundary with R1") {
        const DesignResult r = design_r3(u01, PreferredSets::from_theta_intervals({{0.5, 0.6}}));
        CHECK(r.value == Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("regime R4a mixing design") {
    const Prior u01 = Prior::uniform(0, 1);
    const auto sets = PreferredSets::from_theta_intervals({{0.4, 0.4}, {0.6, 0.6}});
    const auto res = design_r4a(u01, EquilibriumMap::identity(), sets);
    REQUIRE(res.has_value());
    CHECK(res->value == Approx(1.0));
    REQUIRE(res->mechanism.has_value());
    const auto& mech = *res->mechanism;
    CHECK(mech.breakpoints[1] == Approx(0.5).margin(1e-9));
    CHECK(mech.rows[0][0] == Approx(0.7).margin(1e-6));
    CHECK(mech.rows[0][1] == Approx(0.3).margin(1e-6));
    CHECK(mech.rows[1][0] == Approx(0.3).margin(1e-6));
    CHECK(mech.rows[1][1] == Approx(0.7).margin(1e-6));
    REQUIRE(res->direct.size() == 2);
    CHECK(res->direct.theta_bar[0] == Approx(0.4).margin(1e-9));
    CHECK(res->direct.theta_bar[1] == Approx(0.6).margin(1e-9));
    CHECK_FALSE(is_mps(mech));
    check_direct_feasible(*res, u01);

    SECTION("mean preservation of any straddling pair") {
        double qm = 0.0;
        for (std::size_t i = 0; i < res->direct.size(); ++i)
            qm += res->direct.q[i] * res->direct.theta_bar[i];
        CHECK(qm == Approx(u01.mean()).margin(1e-9));
    }
}

TEST_CASE("regime R4 general programs") {
    const Prior u01 = Prior::uniform(0, 1);

    SECTION("agrees with the mixing construction") {
        const auto sets = PreferredSets::from_theta_intervals({{0.4, 0.4}, {0.6, 0.6}});
        const DesignResult res = design_r4_general(u01, sets);
        CHECK(res.value == Approx(1.0).margin(1e-8));
        check_direct_feasible(res, u01);
    }
    SECTION("two wide bands") {
        const auto sets = PreferredSets::from_theta_intervals({{0.35, 0.45}, {0.55, 0.65}});
        const DesignResult res = design_r4_general(u01, sets);
        CHECK(res.value == Approx(1.0).margin(1e-8));
        check_direct_feasible(res, u01);
    }
    SECTION("degenerate single band matches the threshold designer") {
        const auto sets = PreferredSets::from_theta_intervals({{0.7, 0.9}});
        const DesignResult general = design_r4_general(u01, sets);
        const DesignResult direct = design_r3(u01, sets);
        CHECK(general.value == Approx(direct.value).margin(1e-7));
    }
}

TEST_CASE("design dispatcher") {
    const Prior u01 = Prior::uniform(0, 1);
    const auto identity = EquilibriumMap::identity();

    SECTION("R1 returns no information") {
        const DesignResult res = design(u01, identity, {{0.4, 0.6}});
        CHECK(res.value == Approx(1.0));
        CHECK(res.regime == "R1");
        REQUIRE(res.mechanism.has_value());
        CHECK(res.mechanism->interval_count() == 1);
    }
    SECTION("R2 instance through the map") {
        const DesignResult res = design(u01, identity, {{0.1, 0.3}});
        CHECK(res.regime == "R2");
        CHECK(res.value == Approx(0.6).margin(1e-9));
    }
    SECTION("R4 falls back to the mixing design") {
        const DesignResult res = design(u01, identity, {{0.4, 0.45}, {0.55, 0.6}});
        CHECK(res.value == Approx(1.0).margin(1e-9));
    }
    SECTION("unreachable preference") {
        const EquilibriumMap map(Prior::uniform(0, 6), CostModel::linear(1.0));
        CHECK_THROWS_AS(design(Prior::uniform(0, 10), map, {{0.9, 1.0}}), std::invalid_argument);
    }
}

TEST_CASE("designed value dominates both benchmarks") {
    struct Instance {
        Prior prior;
        std::vector<std::pair<double, double>> omegas;
    };
    const Instance cases[] = {
        {Prior::uniform(0, 1), {{0.1, 0.3}}},
        {Prior::uniform(0, 1), {{0.7, 0.9}}},
        {Prior::uniform(0, 1), {{0.4, 0.45}, {0.55, 0.6}}},
        {Prior::uniform(0, 1), {{0.4, 0.6}}},
    };
    const auto identity = EquilibriumMap::identity();
    for (const auto& c : cases) {
        const DesignResult res = design(c.prior, identity, c.omegas);
        const SetBasedPref pref{c.omegas};
        const double ni = value_no_info(c.prior, pref, identity);
        const double fi = value_full_info(c.prior, pref, identity);
        CHECK(res.value >= std::max(ni, fi) - 1e-6);
        check_direct_feasible(res, c.prior);
        if (res.mechanism.has_value()) {
            // re-verify the claimed value through the evaluator
            const double replayed = value(c.prior, pref, *res.mechanism, identity);
            CHECK(replayed == Approx(res.value).margin(1e-6));
            CHECK(replayed >= std::max(ni, fi) - 1e-6);
        }
    }
}
