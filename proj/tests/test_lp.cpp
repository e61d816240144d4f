#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "signalcraft/lp.hpp"
#include "signalcraft/rng.hpp"

using namespace signalcraft;
using Catch::Approx;

TEST_CASE("simplex trivial programs") {
    SECTION("max x s.t. x <= 1") {
        LpProblem lp;
        lp.num_vars = 1;
        lp.objective = {1.0};
        lp.add_ub({1.0}, 1.0);
        const LpSolution sol = solve_lp(lp);
        REQUIRE(sol.status == LpStatus::Optimal);
        CHECK(sol.objective == Approx(1.0).margin(1e-12));
    }
    SECTION("max x+y s.t. x+y = 1") {
        LpProblem lp;
        lp.num_vars = 2;
        lp.objective = {1.0, 1.0};
        lp.add_eq({1.0, 1.0}, 1.0);
        const LpSolution sol = solve_lp(lp);
        REQUIRE(sol.status == LpStatus::Optimal);
        CHECK(sol.objective == Approx(1.0).margin(1e-12));
    }
    SECTION("unbounded") {
        LpProblem lp;
        lp.num_vars = 1;
        lp.objective = {1.0};
        CHECK(solve_lp(lp).status == LpStatus::Unbounded);
    }
    SECTION("infeasible") {
        LpProblem lp;
        lp.num_vars = 1;
        lp.objective = {0.0};
        lp.add_eq({1.0}, 2.0);
        lp.add_ub({1.0}, 1.0);
        CHECK(solve_lp(lp).status == LpStatus::Infeasible);
    }
}

TEST_CASE("simplex agrees with vertex enumeration on random programs") {
    Xoshiro256 rng(2024);
    int optimal_seen = 0, infeasible_seen = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        LpProblem lp;
        lp.num_vars = 2 + rng.below(5);
        for (std::size_t v = 0; v < lp.num_vars; ++v)
            lp.objective.push_back(rng.uniform(-2.0, 2.0));
        const std::size_t n_ub = 1 + rng.below(5);
        for (std::size_t i = 0; i < n_ub; ++i) {
            std::vector<double> row;
            for (std::size_t v = 0; v < lp.num_vars; ++v) row.push_back(rng.uniform(-1.0, 2.0));
            lp.add_ub(std::move(row), rng.uniform(0.2, 3.0));
        }
        {
            // bounding box keeps every instance bounded
            std::vector<double> row(lp.num_vars, 1.0);
            lp.add_ub(std::move(row), rng.uniform(1.0, 6.0));
        }
        if (rng.below(2) == 0) {
            std::vector<double> row;
            for (std::size_t v = 0; v < lp.num_vars; ++v) row.push_back(rng.uniform(-1.0, 1.5));
            lp.add_eq(std::move(row), rng.uniform(-0.5, 1.5));
        }

        const LpSolution sol = solve_lp(lp);
        const auto oracle = oracles::vertex_enum_optimum(lp);
        if (sol.status == LpStatus::Optimal) {
            ++optimal_seen;
            REQUIRE(oracle.has_value());
            CHECK(sol.objective == Approx(*oracle).margin(1e-8));
        } else if (sol.status == LpStatus::Infeasible) {
            ++infeasible_seen;
            CHECK_FALSE(oracle.has_value());
        }
    }
    // the generator must exercise both outcomes
    CHECK(optimal_seen > 500);
    CHECK(infeasible_seen > 20);
}

TEST_CASE("degenerate optimum face") {
    LpProblem lp;
    lp.num_vars = 2;
    lp.objective = {1.0, 1.0};
    lp.add_eq({1.0, 1.0}, 1.0);
    lp.add_ub({1.0, 0.0}, 1.0);
    lp.add_ub({0.0, 1.0}, 1.0);
    const LpSolution sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.objective == Approx(1.0).margin(1e-12));
    CHECK(sol.x[0] + sol.x[1] == Approx(1.0).margin(1e-12));
}
