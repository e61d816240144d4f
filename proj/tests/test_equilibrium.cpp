#include <catch2/catch_amalgamated.hpp>

#include "signalcraft/equilibrium.hpp"
#include "signalcraft/rng.hpp"

using namespace signalcraft;
using Catch::Approx;

TEST_CASE("remote mass golden values") {
    const EquilibriumMap map(Prior::uniform(0, 6), CostModel::linear(1.0));
    CHECK(map.remote_mass(5.0) == Approx(5.0 / 11.0).margin(1e-9));
    CHECK(map.remote_mass(0.0) == Approx(0.0).margin(1e-12));

    const EquilibriumMap wide(Prior::uniform(0, 10), CostModel::linear(1.0));
    CHECK(wide.remote_mass(5.0) == Approx(1.0 / 3.0).margin(1e-9));

    CHECK_THROWS_AS(map.remote_mass(-1.0), std::invalid_argument);
}

TEST_CASE("remote mass inverse") {
    const EquilibriumMap identity = EquilibriumMap::identity();
    CHECK(identity.remote_mass_inverse(0.3, 1.0).value() == Approx(0.3).margin(1e-10));
    CHECK(identity.remote_mass_inverse(0.0, 1.0).value() == 0.0);

    const EquilibriumMap map(Prior::uniform(0, 6), CostModel::linear(1.0));
    CHECK(map.remote_mass_inverse(5.0 / 11.0, 10.0).value() == Approx(5.0).margin(1e-8));
    CHECK(map.remote_mass_inverse(0.0, 10.0).value() == 0.0);
    // m(10) = 10/16 < 1, so full remote is unattainable on [0, 10]
    CHECK_FALSE(map.remote_mass_inverse(1.0, 10.0).has_value());
}

TEST_CASE("critical type") {
    CHECK(critical_type(Prior::uniform(0, 10), 1.0 / 3.0) == Approx(10.0 / 3.0).margin(1e-12));
    CHECK(critical_type(Prior::uniform(0, 6), 5.0 / 11.0) == Approx(30.0 / 11.0).margin(1e-12));
    CHECK(critical_type(Prior::uniform(0, 10), 0.0) == Approx(0.0).margin(1e-12));
}

TEST_CASE("epidemic cost model") {
    const CostModel half = CostModel::epidemic(1.0, 0.5);
    CHECK(half.c1(0.0) == Approx(0.25));
    CHECK(half.c1(1.0) == Approx(0.0).margin(1e-15));
    CHECK(half.validate().empty());

    const CostModel experiments = CostModel::epidemic(4.0, 0.5);
    for (double y : {0.0, 0.3, 0.8, 1.0}) CHECK(experiments.c1(y) == Approx(1.0 - y));

    const CostModel degenerate = CostModel::epidemic(2.0, 1.0);
    CHECK(degenerate.c1(0.5) == Approx(0.0).margin(1e-15));
    CHECK_FALSE(degenerate.validate().empty());  // warning, not an error
}

TEST_CASE("remote mass is monotone and bounded") {
    const EquilibriumMap maps[] = {
        EquilibriumMap(Prior::uniform(0, 6), CostModel::linear(1.0)),
        EquilibriumMap(Prior::truncated_exponential(0.2, 30.0), CostModel::epidemic(4.0, 0.5)),
        EquilibriumMap(Prior::truncated_normal(5, 1, 12), CostModel::linear(0.7)),
    };
    Xoshiro256 rng(11);
    for (const auto& map : maps) {
        for (int k = 0; k < 200; ++k) {
            double a = rng.uniform(0.0, 12.0), b = rng.uniform(0.0, 12.0);
            if (a > b) std::swap(a, b);
            const double ma = map.remote_mass(a), mb = map.remote_mass(b);
            CHECK(ma >= 0.0);
            CHECK(mb <= 1.0);
            CHECK(ma <= mb + 1e-9);
        }
    }
}

TEST_CASE("lipschitz bound from the value density") {
    struct Case {
        ValueDist values;
        CostModel cost;
    };
    const Case cases[] = {
        {Prior::uniform(0, 6), CostModel::linear(1.0)},
        {Prior::uniform(0, 10), CostModel::epidemic(4.0, 0.5)},
        {Prior::truncated_exponential(0.4, 25.0), CostModel::linear(0.5)},
    };
    Xoshiro256 rng(23);
    for (const auto& c : cases) {
        const EquilibriumMap map(c.values, c.cost);
        REQUIRE(map.value_density_bound().has_value());
        const double lip = map.cost_upper() * *map.value_density_bound();
        for (int k = 0; k < 500; ++k) {
            const double a = rng.uniform(0.0, 15.0);
            const double b = rng.uniform(0.0, 15.0);
            const double gap = std::abs(map.remote_mass(a) - map.remote_mass(b));
            CHECK(gap <= lip * std::abs(a - b) + 1e-8);
        }
    }
}

TEST_CASE("crossing certificate at interior solutions") {
    const EquilibriumMap map(Prior::uniform(0, 6), CostModel::linear(1.0));
    Xoshiro256 rng(31);
    for (int k = 0; k < 100; ++k) {
        const double theta = rng.uniform(0.1, 20.0);
        const double y = map.remote_mass(theta);
        if (y <= 0.0 || y >= 1.0) continue;
        const double gap = map.values().quantile(y) - map.cost().c1(y) * theta - map.cost().c2(y);
        CHECK(std::abs(gap) <= 1e-8);
    }
}

TEST_CASE("inverse round trip") {
    const EquilibriumMap maps[] = {
        EquilibriumMap(Prior::uniform(0, 6), CostModel::linear(1.0)),
        EquilibriumMap::identity(),
    };
    Xoshiro256 rng(47);
    for (const auto& map : maps) {
        for (int k = 0; k < 200; ++k) {
            const double y = rng.uniform();
            const auto theta = map.remote_mass_inverse(y, 10.0);
            if (!theta.has_value()) continue;
            CHECK(map.remote_mass(*theta) >= y - 1e-8);
        }
    }
}
