#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "volstop/stopping.hpp"

using namespace volstop;

namespace {

bool throws_code(ErrorCode code, const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code() == code;
    }
    return false;
}

ChainModel one_state_model(double sigma = 0.2) {
    return make_chain_model(VolStates({sigma}), GeneratorMatrix(1, {0.0}));
}

ChainModel three_state_model() {
    VolStates states({0.15, 0.25, 0.40});
    GeneratorMatrix q(3, {-1.0, 1.0, 0.0,  //
                          0.8, -2.0, 1.2,  //
                          0.0, 1.5, -1.5});
    return make_chain_model(states, q);
}

// Compares one state's slice against a closed form in the money-to-moneyness
// window where the comparison is meaningful; tolerance is relative with an
// absolute floor well below option scale.
void check_against_oracle(const ValueSurface& s, std::size_t state,
                          const oracles::PutSolution& oracle, double rel_tol) {
    std::size_t checked = 0;
    for (std::size_t j = 0; j < s.x_grid.size(); ++j) {
        const double x = s.x_grid[j];
        if (x < 0.3 * oracle.strike || x > 3.0 * oracle.strike) continue;
        const double want = oracle.value(x);
        CHECK(std::abs(s.v[state][j] - want) <=
              rel_tol * std::max(want, 1e-3 * oracle.strike));
        ++checked;
    }
    CHECK(checked > 100);
}

}  // namespace

TEST_CASE("gain functions expose their declared shape") {
    GainFunction put = GainFunction::put(2.0);
    CHECK(put(1.5) == 0.5);
    CHECK(put(2.5) == 0.0);
    CHECK(put.decreasing());
    CHECK(put.nonnegative());
    CHECK(put.bounded());
    CHECK(put.bounded_below());
    CHECK(put.continuous());
    CHECK(put.positive_at(1.0));
    CHECK_FALSE(put.positive_at(2.0));

    GainFunction c = GainFunction::constant(-0.5);
    CHECK(c(123.0) == -0.5);
    CHECK_FALSE(c.nonnegative());
    CHECK(c.bounded());

    CHECK(throws_code(ErrorCode::BadParameter, [] { (void)GainFunction::put(0.0); }));
    CHECK(throws_code(ErrorCode::BadParameter, [] { (void)GainFunction::put(-1.0); }));
}

TEST_CASE("problem factories validate rate and horizon") {
    ChainModel m = one_state_model();
    GainFunction g = GainFunction::put(1.0);
    CHECK(throws_code(ErrorCode::BadParameter,
                      [&] { (void)StoppingProblem::pricing(m, g, 0.0); }));
    CHECK(throws_code(ErrorCode::BadParameter,
                      [&] { (void)StoppingProblem::plain(m, g, -0.05); }));
    CHECK(throws_code(ErrorCode::BadParameter,
                      [&] { (void)StoppingProblem::pricing(m, g, 0.05, -1.0); }));
    StoppingProblem p = StoppingProblem::pricing(m, g, 0.05);
    CHECK(p.is_chain());
    CHECK(p.integrability_automatic());
    CHECK(throws_code(ErrorCode::BadParameter, [&] { (void)p.diffusion(); }));
}

TEST_CASE("log grid spans the requested decades around the strike") {
    std::vector<double> grid = make_log_grid(2.0, 2000, 3.0);
    REQUIRE(grid.size() == 2000);
    CHECK(grid.front() == doctest::Approx(2e-3).epsilon(1e-12));
    CHECK(grid.back() == doctest::Approx(2e3).epsilon(1e-12));
    for (std::size_t j = 0; j + 1 < grid.size(); ++j) CHECK(grid[j] < grid[j + 1]);
    // Log-uniform: ratios are constant.
    const double ratio = grid[1] / grid[0];
    for (std::size_t j = 0; j + 1 < grid.size(); j += 97)
        CHECK(grid[j + 1] / grid[j] == doctest::Approx(ratio).epsilon(1e-10));
}

TEST_CASE("single-regime pricing put matches the closed form within one percent") {
    StoppingProblem problem =
        StoppingProblem::pricing(one_state_model(0.2), GainFunction::put(1.0), 0.05);
    std::vector<double> grid = make_log_grid(1.0, 2000, 3.0);
    ValueSurface surface = solve_value_iteration(problem, grid, 1e-9, 60);
    CHECK(surface.iterations > 0);
    CHECK(surface.residual <= 1e-9);

    const oracles::PutSolution oracle = oracles::pricing_put(1.0, 0.05, 0.2);
    CHECK(oracle.boundary == doctest::Approx(5.0 / 7.0).epsilon(1e-15));
    check_against_oracle(surface, 0, oracle, 0.01);

    ThresholdVector thresholds = extract_thresholds(surface, problem.gain);
    REQUIRE(thresholds.levels.size() == 1);
    CHECK(std::abs(thresholds.levels[0] - oracle.boundary) <= 0.01 * oracle.boundary);
}

TEST_CASE("deep out of the money the put value is negligible") {
    StoppingProblem problem =
        StoppingProblem::pricing(one_state_model(0.2), GainFunction::put(1.0), 0.05);
    std::vector<double> grid = make_log_grid(1.0, 2000, 3.0);
    ValueSurface surface = solve_value_iteration(problem, grid, 1e-9, 60);
    for (std::size_t j = 0; j < grid.size(); ++j)
        if (grid[j] >= 100.0) CHECK(surface.v[0][j] <= 1e-2);
}

TEST_CASE("thresholds decrease strictly across volatility states") {
    StoppingProblem problem =
        StoppingProblem::pricing(three_state_model(), GainFunction::put(1.0), 0.05);
    std::vector<double> grid = make_log_grid(1.0, 2000, 3.0);
    ValueSurface surface = solve_value_iteration(problem, grid, 1e-9, 60);
    ThresholdVector thresholds = extract_thresholds(surface, problem.gain);
    REQUIRE(thresholds.levels.size() == 3);
    CHECK(thresholds.levels[0] > thresholds.levels[1]);
    CHECK(thresholds.levels[1] > thresholds.levels[2]);

    MonotonicityReport mono = check_monotone_surface(surface);
    CHECK(mono.passes(10.0 * surface.solver_tol));
    CHECK(mono.cells_checked == 2 * grid.size());
}

TEST_CASE("decoupled regimes reproduce the single-regime solution per state") {
    VolStates states({0.15, 0.25, 0.40});
    GeneratorMatrix zero(3, std::vector<double>(9, 0.0));
    StoppingProblem problem = StoppingProblem::pricing(make_chain_model(states, zero),
                                                       GainFunction::put(1.0), 0.05);
    std::vector<double> grid = make_log_grid(1.0, 2000, 3.0);
    ValueSurface surface = solve_value_iteration(problem, grid, 1e-9, 60);
    ThresholdVector thresholds = extract_thresholds(surface, problem.gain);
    for (std::size_t i = 0; i < 3; ++i) {
        const oracles::PutSolution oracle = oracles::pricing_put(1.0, 0.05, states[i]);
        check_against_oracle(surface, i, oracle, 0.01);
        CHECK(std::abs(thresholds.levels[i] - oracle.boundary) <= 0.01 * oracle.boundary);
    }
}

TEST_CASE("ordered search visits every ordering yet lands on the free boundary") {
    StoppingProblem problem =
        StoppingProblem::pricing(three_state_model(), GainFunction::put(1.0), 0.05);
    std::vector<double> grid = make_log_grid(1.0, 2000, 3.0);
    ValueSurface surface = solve_value_iteration(problem, grid, 1e-9, 60);
    ThresholdVector unconstrained = extract_thresholds(surface, problem.gain);

    OrderedSearchResult exhaustive = ordered_threshold_search_on(
        surface, problem.gain, problem.chain().generator, SearchMode::Exhaustive);
    CHECK(exhaustive.orderings_examined == 6);
    CHECK(exhaustive.orderings_consistent >= 1);
    REQUIRE(exhaustive.thresholds.grid_indices.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(exhaustive.thresholds.grid_indices[i] == unconstrained.grid_indices[i]);

    OrderedSearchResult monotone = ordered_threshold_search_on(
        surface, problem.gain, problem.chain().generator, SearchMode::Monotone);
    CHECK(monotone.orderings_examined == 1);
    CHECK(monotone.orderings_consistent == 1);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(monotone.thresholds.grid_indices[i] == unconstrained.grid_indices[i]);
}

TEST_CASE("one regime means one ordering in either mode") {
    StoppingProblem problem =
        StoppingProblem::pricing(one_state_model(), GainFunction::put(1.0), 0.05);
    std::vector<double> grid = make_log_grid(1.0, 1000, 3.0);
    OrderedSearchResult exhaustive =
        ordered_threshold_search(problem, SearchMode::Exhaustive, grid, 1e-9, 60);
    OrderedSearchResult monotone =
        ordered_threshold_search(problem, SearchMode::Monotone, grid, 1e-9, 60);
    CHECK(exhaustive.orderings_examined == 1);
    CHECK(monotone.orderings_examined == 1);
    CHECK(exhaustive.thresholds.grid_indices == monotone.thresholds.grid_indices);
}

TEST_CASE("monotone search requires a skip-free generator") {
    VolStates states({0.15, 0.25, 0.40});
    GeneratorMatrix skip(3, {-1.0, 0.0, 1.0,  //
                             0.5, -1.0, 0.5,  //
                             1.0, 1.0, -2.0});
    StoppingProblem problem = StoppingProblem::pricing(make_chain_model(states, skip),
                                                       GainFunction::put(1.0), 0.05);
    std::vector<double> grid = make_log_grid(1.0, 1000, 3.0);
    CHECK(throws_code(ErrorCode::NotSkipFree, [&] {
        (void)ordered_threshold_search(problem, SearchMode::Monotone, grid, 1e-9, 60);
    }));
    // The exhaustive search has no structural requirement.
    OrderedSearchResult exhaustive =
        ordered_threshold_search(problem, SearchMode::Exhaustive, grid, 1e-9, 60);
    CHECK(exhaustive.orderings_examined == 6);
}

TEST_CASE("monotonicity checker flags an injected violation with its location") {
    StoppingProblem problem =
        StoppingProblem::pricing(three_state_model(), GainFunction::put(1.0), 0.05);
    std::vector<double> grid = make_log_grid(1.0, 500, 3.0);
    ValueSurface surface = solve_value_iteration(problem, grid, 1e-9, 60);
    REQUIRE(check_monotone_surface(surface).passes(1e-8));

    const std::size_t j0 = 250;
    surface.v[2][j0] = surface.v[1][j0] - 0.05;
    MonotonicityReport report = check_monotone_surface(surface);
    CHECK_FALSE(report.passes(1e-8));
    CHECK(report.max_gap == doctest::Approx(0.05).epsilon(1e-6));
    CHECK(report.state_index == 1);
    CHECK(report.x_at_max == surface.x_grid[j0]);
}

TEST_CASE("a single regime has nothing to compare") {
    StoppingProblem problem =
        StoppingProblem::pricing(one_state_model(), GainFunction::put(1.0), 0.05);
    std::vector<double> grid = make_log_grid(1.0, 500, 3.0);
    ValueSurface surface = solve_value_iteration(problem, grid, 1e-9, 60);
    MonotonicityReport report = check_monotone_surface(surface);
    CHECK(report.cells_checked == 0);
    CHECK(report.max_gap == 0.0);
    CHECK(report.passes(0.0));
}

TEST_CASE("scaling the money unit scales the surface exactly") {
    std::vector<double> grid1 = make_log_grid(1.0, 1000, 3.0);
    std::vector<double> grid2(grid1.size());
    for (std::size_t j = 0; j < grid1.size(); ++j) grid2[j] = 2.0 * grid1[j];

    StoppingProblem p1 =
        StoppingProblem::pricing(three_state_model(), GainFunction::put(1.0), 0.05);
    StoppingProblem p2 =
        StoppingProblem::pricing(three_state_model(), GainFunction::put(2.0), 0.05);
    ValueSurface s1 = solve_value_iteration(p1, grid1, 1e-9, 60);
    ValueSurface s2 = solve_value_iteration(p2, grid2, 1e-9, 60);

    // Doubling money units doubles every intermediate bit for bit: the linear
    // systems have identical matrices and exactly doubled right-hand sides.
    CHECK(s1.iterations == s2.iterations);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < grid1.size(); ++j)
            CHECK(s2.v[i][j] == 2.0 * s1.v[i][j]);
}

TEST_CASE("negative constant gain prices to zero with no contact region") {
    StoppingProblem problem =
        StoppingProblem::plain(three_state_model(), GainFunction::constant(-0.5), 0.05);
    std::vector<double> grid = make_log_grid(1.0, 500, 3.0);
    ValueSurface surface = solve_value_iteration(problem, grid, 1e-9, 60);
    for (std::size_t i = 0; i < 3; ++i)
        for (double v : surface.v[i]) {
            CHECK(v >= -1e-9);
            CHECK(v <= 1e-8);
        }
    CHECK(throws_code(ErrorCode::NoContact,
                      [&] { (void)extract_thresholds(surface, problem.gain); }));
}

TEST_CASE("positive constant gain is exercised immediately everywhere") {
    StoppingProblem problem =
        StoppingProblem::plain(three_state_model(), GainFunction::constant(0.25), 0.05);
    std::vector<double> grid = make_log_grid(1.0, 500, 3.0);
    ValueSurface surface = solve_value_iteration(problem, grid, 1e-9, 60);
    for (std::size_t i = 0; i < 3; ++i)
        for (double v : surface.v[i]) CHECK(v == 0.25);
    ThresholdVector thresholds = extract_thresholds(surface, problem.gain);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(thresholds.grid_indices[i] == grid.size() - 1);
}

TEST_CASE("grids that cannot bracket the boundary are rejected") {
    StoppingProblem problem =
        StoppingProblem::pricing(one_state_model(), GainFunction::put(1.0), 0.05);
    std::vector<double> narrow = make_log_grid(1.0, 2000, 1.0);
    CHECK(throws_code(ErrorCode::GridTooCoarse,
                      [&] { (void)solve_value_iteration(problem, narrow, 1e-9, 60); }));
    std::vector<double> sparse = make_log_grid(1.0, 4, 3.0);
    CHECK(throws_code(ErrorCode::GridTooCoarse,
                      [&] { (void)solve_value_iteration(problem, sparse, 1e-9, 60); }));
}

TEST_CASE("perpetual and finite-horizon entry points guard their domains") {
    ChainModel m = one_state_model();
    GainFunction g = GainFunction::put(1.0);
    std::vector<double> grid = make_log_grid(1.0, 500, 3.0);

    StoppingProblem finite = StoppingProblem::pricing(m, g, 0.05, 1.0);
    CHECK(throws_code(ErrorCode::BadParameter,
                      [&] { (void)solve_value_iteration(finite, grid, 1e-9, 60); }));

    StoppingProblem perpetual = StoppingProblem::pricing(m, g, 0.05);
    CHECK(throws_code(ErrorCode::BadParameter,
                      [&] { (void)finite_horizon_value(perpetual, grid, 10); }));

    StoppingProblem diffusion = StoppingProblem::pricing(
        DiffusionVolModel::hull_white(0.25, 0.125), g, 0.05);
    CHECK(throws_code(ErrorCode::BadParameter,
                      [&] { (void)solve_value_iteration(diffusion, grid, 1e-9, 60); }));
}

TEST_CASE("zero steps or zero horizon collapse to the gain itself") {
    ChainModel m = three_state_model();
    GainFunction g = GainFunction::put(1.0);
    std::vector<double> grid = make_log_grid(1.0, 500, 3.0);

    ValueSurface at_expiry =
        finite_horizon_value(StoppingProblem::pricing(m, g, 0.05, 0.0), grid, 10);
    ValueSurface no_steps =
        finite_horizon_value(StoppingProblem::pricing(m, g, 0.05, 1.0), grid, 0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < grid.size(); ++j) {
            CHECK(at_expiry.v[i][j] == g(grid[j]));
            CHECK(no_steps.v[i][j] == g(grid[j]));
        }
}

TEST_CASE("value grows with maturity and approaches the perpetual surface") {
    ChainModel m = three_state_model();
    GainFunction g = GainFunction::put(1.0);
    std::vector<double> grid = make_log_grid(1.0, 500, 3.0);

    // Same step size, longer horizon: more exercise opportunity, never less
    // value (the implicit operator's inverse is positivity preserving).
    ValueSurface short_t =
        finite_horizon_value(StoppingProblem::pricing(m, g, 0.05, 1.0), grid, 20);
    ValueSurface long_t =
        finite_horizon_value(StoppingProblem::pricing(m, g, 0.05, 2.0), grid, 40);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < grid.size(); ++j)
            CHECK(long_t.v[i][j] >= short_t.v[i][j] - 1e-12);

    // Fourteen discount half-lives out the maturity transient is gone, and a
    // step of 0.025 keeps the exercise-date gap inside the tolerance.
    StoppingProblem perpetual = StoppingProblem::pricing(m, g, 0.05);
    ValueSurface infinite = solve_value_iteration(perpetual, grid, 1e-9, 60);
    ValueSurface distant =
        finite_horizon_value(StoppingProblem::pricing(m, g, 0.05, 200.0), grid, 8000);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const double x = grid[j];
            if (x < 0.3 || x > 3.0) continue;
            const double ref = infinite.v[i][j];
            CHECK(std::abs(distant.v[i][j] - ref) <= 0.01 * std::max(ref, 1e-3));
        }
}

TEST_CASE("iteration budget is enforced") {
    StoppingProblem problem =
        StoppingProblem::pricing(three_state_model(), GainFunction::put(1.0), 0.05);
    std::vector<double> grid = make_log_grid(1.0, 500, 3.0);
    try {
        ValueSurface s = solve_value_iteration(problem, grid, 1e-14, 1);
        // A one-iteration convergence is acceptable only if the residual
        // genuinely met the tolerance.
        CHECK(s.residual <= 1e-14);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoConvergence);
    }
}
