#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "volstop/chain.hpp"
#include "volstop/timechange.hpp"

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

ChainModel three_state_model() {
    VolStates states({0.15, 0.25, 0.40});
    GeneratorMatrix q(3, {-1.0, 1.0, 0.0,  //
                          0.8, -2.0, 1.2,  //
                          0.0, 1.5, -1.5});
    return make_chain_model(states, q);
}

}  // namespace

TEST_CASE("chain clock integrates 1/y^2 exactly over hand-built segments") {
    // [0,1) at y = 2 contributes 0.25, [1,2] at y = 1 contributes 1.
    VolStates states({1.0, 2.0});
    ChainPath path;
    path.jump_times = {0.0, 1.0};
    path.state_indices = {1, 0};
    path.horizon = 2.0;
    TimeChangePath clock = gamma_from_chain(path, states);
    CHECK(clock.gamma_at(0.0) == 0.0);
    CHECK(clock.gamma_at(1.0) == 0.25);
    CHECK(clock.gamma_at(2.0) == 1.25);
    CHECK(clock.gamma_at(0.5) == 0.125);
    CHECK(clock.gamma_at(1.5) == 0.75);
    CHECK(clock.inverse(1.25) == 2.0);
    CHECK(clock.inverse(0.25) == 1.0);
    CHECK(clock.inverse(0.75) == 1.5);
    CHECK(clock.horizon() == 2.0);
    CHECK(clock.gamma_max() == 1.25);
    CHECK(clock.kind() == TimeChangeKind::ExactPiecewise);
}

TEST_CASE("single-state clock is the line t/y^2") {
    VolStates states({0.5});
    ChainPath path;
    path.jump_times = {0.0};
    path.state_indices = {0};
    path.horizon = 10.0;
    TimeChangePath clock = gamma_from_chain(path, states);
    for (double t : {0.0, 0.1, 1.0, 2.5, 10.0}) CHECK(clock.gamma_at(t) == 4.0 * t);
}

TEST_CASE("no extrapolation beyond the stored range") {
    VolStates states({1.0});
    ChainPath path;
    path.jump_times = {0.0};
    path.state_indices = {0};
    path.horizon = 1.0;
    TimeChangePath clock = gamma_from_chain(path, states);
    CHECK(throws_code(ErrorCode::HorizonExceeded, [&] { (void)clock.gamma_at(1.0 + 1e-9); }));
    CHECK(throws_code(ErrorCode::RangeExceeded, [&] { (void)clock.inverse(1.0 + 1e-9); }));
    CHECK(throws_code(ErrorCode::HorizonExceeded, [&] { (void)clock.gamma_at(-1e-9); }));
    CHECK(throws_code(ErrorCode::RangeExceeded, [&] { (void)clock.inverse(-1e-9); }));
}

TEST_CASE("round trip A(Gamma(t)) = t to a few ulps on simulated chain paths") {
    ChainModel model = three_state_model();
    for (int rep = 0; rep < 20; ++rep) {
        ChainPath path = simulate_chain(model.generator, rep % 3, 25.0,
                                        RngStream::root(11).stream(static_cast<std::uint64_t>(rep)));
        TimeChangePath clock = gamma_from_chain(path, model.states);
        RngStream probe = RngStream::root(12).stream(static_cast<std::uint64_t>(rep));
        for (int k = 0; k < 200; ++k) {
            const double t = 25.0 * probe.uniform();
            const double round_trip = clock.inverse(clock.gamma_at(t));
            CHECK(std::abs(round_trip - t) <= 64.0 * std::numeric_limits<double>::epsilon() *
                                                  (1.0 + std::abs(t)));
        }
        // Node values round trip exactly.
        for (std::size_t k = 0; k < clock.breakpoints().size(); ++k) {
            CHECK(clock.gamma_at(clock.breakpoints()[k]) == clock.gamma_nodes()[k]);
            CHECK(clock.inverse(clock.gamma_nodes()[k]) == clock.breakpoints()[k]);
        }
    }
}

TEST_CASE("level sets agree through the clock: s < Gamma(t) iff A(s) < t") {
    ChainModel model = three_state_model();
    for (int rep = 0; rep < 10; ++rep) {
        ChainPath path = simulate_chain(model.generator, 1, 25.0,
                                        RngStream::root(21).stream(static_cast<std::uint64_t>(rep)));
        TimeChangePath clock = gamma_from_chain(path, model.states);
        RngStream probe = RngStream::root(22).stream(static_cast<std::uint64_t>(rep));
        for (int k = 0; k < 500; ++k) {
            const double t = 25.0 * probe.uniform();
            const double s = clock.gamma_max() * probe.uniform();
            CHECK((s < clock.gamma_at(t)) == (clock.inverse(s) < t));
        }
    }
}

TEST_CASE("clock is strictly increasing in both directions") {
    ChainModel model = three_state_model();
    ChainPath path = simulate_chain(model.generator, 0, 25.0, RngStream::root(31).stream(0));
    TimeChangePath clock = gamma_from_chain(path, model.states);
    double prev_gamma = -1.0;
    double prev_a = -1.0;
    for (int k = 0; k <= 1000; ++k) {
        const double t = 25.0 * k / 1000.0;
        const double g = clock.gamma_at(t);
        CHECK(g > prev_gamma);
        prev_gamma = g;
        const double s = clock.gamma_max() * k / 1000.0;
        const double a = clock.inverse(s);
        CHECK(a > prev_a);
        prev_a = a;
    }
}

TEST_CASE("trapezoid clock: constant samples are integrated exactly") {
    std::vector<double> xi(101, 0.5);
    TimeChangePath clock = gamma_from_samples(xi, 0.01);
    CHECK(clock.kind() == TimeChangeKind::SampledGrid);
    CHECK(clock.gamma_at(1.0) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(clock.gamma_at(0.37) == doctest::Approx(4.0 * 0.37).epsilon(1e-13));
}

TEST_CASE("trapezoid clock converges at second order on a known integral") {
    // xi(t) = sqrt(1+t): integral of xi^-2 over [0,1] is log 2.
    auto gamma_error = [](std::size_t n) {
        const double dt = 1.0 / static_cast<double>(n);
        std::vector<double> xi(n + 1);
        for (std::size_t k = 0; k <= n; ++k)
            xi[k] = std::sqrt(1.0 + dt * static_cast<double>(k));
        TimeChangePath clock = gamma_from_samples(xi, dt);
        return std::abs(clock.gamma_at(1.0) - std::log(2.0));
    };
    const double coarse = gamma_error(200);
    const double fine = gamma_error(400);
    CHECK(coarse < 1e-5);
    // Halving the step divides the error by ~4.
    CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("trapezoid clock rejects nonpositive samples") {
    CHECK(throws_code(ErrorCode::NonpositiveSample, [] {
        std::vector<double> xi = {1.0, 0.5, 0.0, 0.5};
        (void)gamma_from_samples(xi, 0.1);
    }));
    CHECK(throws_code(ErrorCode::NonpositiveSample, [] {
        std::vector<double> xi = {1.0, -0.5};
        (void)gamma_from_samples(xi, 0.1);
    }));
}

TEST_CASE("pathwise-dominated volatility yields a dominating clock") {
    // Identical jump structure, lower levels everywhere: slope 1/y^2 larger.
    VolStates states({0.2, 0.3, 0.5});
    GeneratorMatrix q(3, {-1.0, 1.0, 0.0, 0.5, -1.0, 0.5, 0.0, 2.0, -2.0});
    ChainPath path = simulate_chain(q, 0, 20.0, RngStream::root(44).stream(0));
    TimeChangePath clock_lo = gamma_from_chain(path, states);
    ChainPath raised = path;
    for (int& s : raised.state_indices) s = std::min(s + 1, 2);
    TimeChangePath clock_hi = gamma_from_chain(raised, states);

    std::vector<double> grid = comparison_grid(clock_lo, clock_hi);
    ComparisonReport report = compare(clock_lo, clock_hi, grid);
    CHECK(report.lower_dominates());
    CHECK(report.n_checked == grid.size());
    CHECK(report.violations == 0);
}

TEST_CASE("comparison reports the worst violation when dominance fails") {
    VolStates states({1.0, 2.0});
    ChainPath slow;  // y = 2 throughout: slope 0.25
    slow.jump_times = {0.0};
    slow.state_indices = {1};
    slow.horizon = 4.0;
    ChainPath fast;  // y = 1 throughout: slope 1
    fast.jump_times = {0.0};
    fast.state_indices = {0};
    fast.horizon = 4.0;
    TimeChangePath clock_slow = gamma_from_chain(slow, states);
    TimeChangePath clock_fast = gamma_from_chain(fast, states);
    // Claim "slow dominates fast": false for every t > 0.
    std::vector<double> grid = {0.0, 1.0, 2.0, 4.0};
    ComparisonReport report = compare(clock_slow, clock_fast, grid);
    CHECK_FALSE(report.lower_dominates());
    CHECK(report.violations == 3);
    CHECK(report.max_violation == doctest::Approx(3.0));
    CHECK(report.t_worst == 4.0);
}

TEST_CASE("comparison grid is the clipped union of breakpoints") {
    VolStates states({1.0, 2.0});
    ChainPath a;
    a.jump_times = {0.0, 1.0, 3.0};
    a.state_indices = {0, 1, 0};
    a.horizon = 5.0;
    ChainPath b;
    b.jump_times = {0.0, 2.0};
    b.state_indices = {1, 0};
    b.horizon = 4.0;
    std::vector<double> grid =
        comparison_grid(gamma_from_chain(a, states), gamma_from_chain(b, states));
    // Union {0,1,2,3,4,5} clipped to the common horizon 4.
    REQUIRE(grid.size() == 5);
    CHECK(grid[0] == 0.0);
    CHECK(grid[1] == 1.0);
    CHECK(grid[2] == 2.0);
    CHECK(grid[3] == 3.0);
    CHECK(grid[4] == 4.0);
}
