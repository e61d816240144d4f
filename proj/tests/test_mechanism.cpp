#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "signalcraft/mechanism.hpp"

using namespace signalcraft;
using Catch::Approx;

TEST_CASE("direct_of basics") {
    const Prior u01 = Prior::uniform(0, 1);

    SECTION("no information") {
        const DirectMechanism d = direct_of(no_info(1.0), u01);
        REQUIRE(d.size() == 1);
        CHECK(d.q[0] == Approx(1.0).margin(1e-12));
        CHECK(d.theta_bar[0] == Approx(0.5).margin(1e-12));
    }

    SECTION("two-interval partition at 0.6") {
        const IntervalMechanism mps({0.0, 0.6, 1.0}, {{1.0, 0.0}, {0.0, 1.0}});
        const DirectMechanism d = direct_of(mps, u01);
        REQUIRE(d.size() == 2);
        CHECK(d.q[0] == Approx(0.6).margin(1e-12));
        CHECK(d.theta_bar[0] == Approx(0.3).margin(1e-12));
        CHECK(d.q[1] == Approx(0.4).margin(1e-12));
        CHECK(d.theta_bar[1] == Approx(0.8).margin(1e-12));
    }

    SECTION("mixed rows") {
        const IntervalMechanism mix({0.0, 0.5, 1.0}, {{0.7, 0.3}, {0.3, 0.7}});
        const DirectMechanism d = direct_of(mix, u01);
        REQUIRE(d.size() == 2);
        CHECK(d.q[0] == Approx(0.5).margin(1e-12));
        CHECK(d.theta_bar[0] == Approx(0.4).margin(1e-12));
        CHECK(d.q[1] == Approx(0.5).margin(1e-12));
        CHECK(d.theta_bar[1] == Approx(0.6).margin(1e-12));
    }

    SECTION("uncovered support") {
        CHECK_THROWS_AS(direct_of(no_info(1.0), Prior::uniform(0, 2)), std::invalid_argument);
    }
}

TEST_CASE("check_mpc") {
    const Prior u01 = Prior::uniform(0, 1);

    SECTION("no information is always implementable") {
        DirectMechanism d;
        d.q = {1.0};
        d.theta_bar = {u01.mean()};
        CHECK(check_mpc(d, u01).feasible);
    }

    SECTION("spread beyond the prior is infeasible") {
        DirectMechanism d;
        d.q = {0.5, 0.5};
        d.theta_bar = {0.1, 0.9};
        const MpcReport report = check_mpc(d, u01);
        CHECK_FALSE(report.feasible);
        CHECK(report.prefix_slack[0] == Approx(0.05 - 0.125).margin(1e-12));
    }

    SECTION("threshold mechanism is tight at the first prefix") {
        DirectMechanism d;
        d.q = {0.6, 0.4};
        d.theta_bar = {0.3, 0.8};
        const MpcReport report = check_mpc(d, u01);
        CHECK(report.feasible);
        CHECK(report.prefix_slack[0] == Approx(0.0).margin(1e-12));
    }

    SECTION("unsorted input rejected") {
        DirectMechanism d;
        d.q = {0.5, 0.5};
        d.theta_bar = {0.7, 0.3};
        CHECK_THROWS_AS(check_mpc(d, u01), std::invalid_argument);
    }
}

TEST_CASE("benchmark mechanisms") {
    const DirectMechanism ni = direct_of(no_info(20.0), Prior::uniform(5, 20));
    REQUIRE(ni.size() == 1);
    CHECK(ni.theta_bar[0] == Approx(12.5).margin(1e-9));

    const DirectMechanism fi2 = direct_of(full_info_grid(2, 1.0), Prior::uniform(0, 1));
    REQUIRE(fi2.size() == 2);
    CHECK(fi2.q[0] == Approx(0.5).margin(1e-12));
    CHECK(fi2.theta_bar[0] == Approx(0.25).margin(1e-12));
    CHECK(fi2.theta_bar[1] == Approx(0.75).margin(1e-12));

    const DirectMechanism fi1 = direct_of(full_info_grid(1, 1.0), Prior::uniform(0, 1));
    const DirectMechanism ni1 = direct_of(no_info(1.0), Prior::uniform(0, 1));
    REQUIRE(fi1.size() == ni1.size());
    CHECK(fi1.theta_bar[0] == Approx(ni1.theta_bar[0]).margin(1e-15));
}

TEST_CASE("is_mps") {
    CHECK(is_mps(no_info(1.0)));
    CHECK(is_mps(full_info_grid(3, 1.0)));
    const IntervalMechanism mixing({0.0, 0.5, 1.0}, {{0.7, 0.3}, {0.3, 0.7}});
    CHECK_FALSE(is_mps(mixing));
    // contiguous merge of the same signal counts; non-contiguous reuse does not
    const IntervalMechanism merged({0.0, 0.3, 0.6, 1.0}, {{1, 0}, {1, 0}, {0, 1}});
    CHECK(is_mps(merged));
    const IntervalMechanism reused({0.0, 0.3, 0.6, 1.0}, {{1, 0}, {0, 1}, {1, 0}});
    CHECK_FALSE(is_mps(reused));
}

TEST_CASE("mechanism validation") {
    CHECK_THROWS_AS(IntervalMechanism({0.0, 1.0}, {{0.5, 0.4}}), std::invalid_argument);
    CHECK_THROWS_AS(IntervalMechanism({0.0, 0.5, 0.4}, {{1.0}, {1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(IntervalMechanism({0.1, 1.0}, {{1.0}}), std::invalid_argument);
}

TEST_CASE("every representable mechanism is implementable") {
    Xoshiro256 rng(101);
    const Prior priors[] = {Prior::uniform(0, 1), Prior::uniform(5, 20),
                            Prior::truncated_exponential(0.5, 10.0)};
    for (const Prior& prior : priors) {
        for (int trial = 0; trial < 40; ++trial) {
            const auto mech = oracles::random_interval_mechanism(rng, prior.upper(), 6, 4);
            DirectMechanism d = direct_of(mech, prior);
            // sort pairs by posterior mean before the check
            std::vector<std::size_t> order(d.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return d.theta_bar[a] < d.theta_bar[b]; });
            DirectMechanism sorted;
            for (std::size_t i : order) {
                sorted.q.push_back(d.q[i]);
                sorted.theta_bar.push_back(d.theta_bar[i]);
            }
            CHECK(check_mpc(sorted, prior, 1e-8).feasible);
        }
    }
}

TEST_CASE("splitting a signal column changes nothing") {
    Xoshiro256 rng(202);
    const Prior prior = Prior::uniform(0, 1);
    for (int trial = 0; trial < 25; ++trial) {
        const auto mech = oracles::random_interval_mechanism(rng, 1.0, 5, 3);
        const DirectMechanism base = direct_of(mech, prior);

        const std::size_t split = rng.below(mech.signal_count());
        std::vector<std::vector<double>> rows = mech.rows;
        for (auto& row : rows) {
            row[split] *= 0.5;
            row.push_back(row[split]);
        }
        const DirectMechanism doubled =
            direct_of(IntervalMechanism(mech.breakpoints, std::move(rows)), prior);

        double base_q = 0.0, base_qm = 0.0, doubled_q = 0.0, doubled_qm = 0.0;
        for (std::size_t i = 0; i < base.size(); ++i) {
            base_q += base.q[i];
            base_qm += base.q[i] * base.theta_bar[i];
        }
        for (std::size_t i = 0; i < doubled.size(); ++i) {
            doubled_q += doubled.q[i];
            doubled_qm += doubled.q[i] * doubled.theta_bar[i];
        }
        CHECK(base_q == Approx(doubled_q).margin(1e-10));
        CHECK(base_qm == Approx(doubled_qm).margin(1e-10));
        // the split halves reproduce the original posterior
        const DirectMechanism check = doubled;
        bool found = false;
        for (std::size_t i = 0; i < check.size(); ++i)
            for (std::size_t j = i + 1; j < check.size(); ++j)
                if (std::abs(check.theta_bar[i] - check.theta_bar[j]) < 1e-9) found = true;
        if (base.size() == mech.signal_count()) CHECK(found);
    }
}
