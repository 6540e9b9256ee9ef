#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "volstop/models.hpp"
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

}  // namespace

TEST_CASE("substituted dimension phi is exact on power-of-two parameters") {
    // eta = 2^-2 and kappa = 2^-3 make every intermediate a power of two.
    XiSystem hw = xi_system(DiffusionVolModel::hull_white(0.25, 0.125));
    REQUIRE(hw.bessel_dimension.has_value());
    CHECK(*hw.bessel_dimension == 2.0);

    XiSystem heston = xi_system(DiffusionVolModel::heston(0.25, 0.5, 0.5));
    REQUIRE(heston.bessel_dimension.has_value());
    CHECK(*heston.bessel_dimension == 3.0);

    XiSystem generic = xi_system(DiffusionVolModel::generic(
        [](double y) { return 0.3 * y; }, [](double y) { return 0.1 * y; }));
    CHECK_FALSE(generic.bessel_dimension.has_value());
}

TEST_CASE("validity report matches the raw parameter inequality draw by draw") {
    RngStream s = RngStream::root(101).stream(0);
    for (int rep = 0; rep < 200; ++rep) {
        const double eta = 0.05 + 0.45 * s.uniform();
        const double kappa = 4.0 * eta * eta * s.uniform();
        DiffusionVolModel m = DiffusionVolModel::hull_white(eta, kappa);
        ValidityReport report = validate_model(m);
        CHECK(report.passed() == report.inequality_holds);
        CHECK(report.passed() == (kappa >= 2.0 * eta * eta));
    }
    for (int rep = 0; rep < 200; ++rep) {
        const double eta = 0.05 + 0.45 * s.uniform();
        const double kappa = 0.1 + 0.9 * s.uniform();
        const double lambda = 4.0 * eta * eta / kappa * s.uniform();
        DiffusionVolModel m = DiffusionVolModel::heston(eta, kappa, lambda);
        ValidityReport report = validate_model(m);
        CHECK(report.passed() == report.inequality_holds);
        CHECK(report.passed() == (kappa * lambda >= 2.0 * eta * eta));
    }
}

TEST_CASE("generic coefficients are unverifiable, not pass or fail") {
    DiffusionVolModel m = DiffusionVolModel::generic([](double) { return 0.2; },
                                                     [](double) { return 0.0; });
    ValidityReport report = validate_model(m);
    CHECK(report.status == ValidityReport::Status::Unverifiable);
    CHECK_FALSE(report.passed());
    CHECK(report.note.find("unverifiable") != std::string::npos);
}

TEST_CASE("model factories validate their parameters") {
    CHECK(throws_code(ErrorCode::BadParameter,
                      [] { (void)DiffusionVolModel::hull_white(-0.2, 0.1); }));
    CHECK(throws_code(ErrorCode::BadParameter,
                      [] { (void)DiffusionVolModel::hull_white(0.2, 0.0); }));
    CHECK(throws_code(ErrorCode::BadParameter,
                      [] { (void)DiffusionVolModel::heston(0.2, 0.5, -0.1); }));
    CHECK(throws_code(ErrorCode::DeltaOutOfRange,
                      [] { (void)DiffusionVolModel::hull_white(0.2, 0.1, 1.5); }));
    CHECK(throws_code(ErrorCode::BadParameter, [] {
        (void)DiffusionVolModel::generic(nullptr, [](double) { return 0.0; });
    }));
}

TEST_CASE("sampled paths interpolate linearly and refuse extrapolation") {
    SampledPath p;
    p.dt = 0.5;
    p.values = {1.0, 2.0, 4.0};
    CHECK(p.horizon() == 1.0);
    CHECK(p.at(0.0) == 1.0);
    CHECK(p.at(0.5) == 2.0);
    CHECK(p.at(1.0) == 4.0);
    CHECK(p.at(0.25) == doctest::Approx(1.5));
    CHECK(p.at(0.75) == doctest::Approx(3.0));
    CHECK(throws_code(ErrorCode::HorizonExceeded, [&] { (void)p.at(1.0 + 1e-9); }));
    CHECK(throws_code(ErrorCode::HorizonExceeded, [&] { (void)p.at(-1e-9); }));
}

TEST_CASE("positive scheme keeps the volatility coordinate strictly positive at phi = 2") {
    XiSystem sys = xi_system(DiffusionVolModel::hull_white(0.25, 0.125));
    for (int rep = 0; rep < 50; ++rep) {
        SampledPath xi = simulate_xi(sys, 0.2, 2.0, 1e-3,
                                     RngStream::root(55).stream(static_cast<std::uint64_t>(rep)));
        for (double v : xi.values) CHECK(v > 0.0);
    }
    XiSystem heston = xi_system(DiffusionVolModel::heston(0.25, 0.5, 0.5));
    for (int rep = 0; rep < 50; ++rep) {
        SampledPath xi = simulate_xi(heston, 0.3, 2.0, 1e-3,
                                     RngStream::root(56).stream(static_cast<std::uint64_t>(rep)));
        for (double v : xi.values) CHECK(v > 0.0);
    }
}

TEST_CASE("scheme refuses dimensions at or below one") {
    // kappa/eta^2 = 0.75: the implicit update loses its positive root.
    XiSystem sys = xi_system(DiffusionVolModel::hull_white(0.2, 0.03));
    CHECK(throws_code(ErrorCode::SchemeBreakdown, [&] {
        (void)simulate_xi(sys, 0.2, 1.0, 1e-3, RngStream::root(57).stream(0));
    }));
}

TEST_CASE("generic Euler stepping reports the step where positivity failed") {
    XiSystem sys = xi_system(DiffusionVolModel::generic(
        [](double) { return 1e-4; }, [](double) { return -1.0; }));
    try {
        (void)simulate_xi(sys, 0.1, 1.0, 0.01, RngStream::root(58).stream(0));
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SchemeBreakdown);
        CHECK(e.index_i() >= 0);
    }
}

TEST_CASE("shared noise keeps ordered starts ordered at every grid point") {
    XiSystem sys = xi_system(DiffusionVolModel::hull_white(0.25, 0.125));
    RngStream s = RngStream::root(59).stream(0);
    for (int rep = 0; rep < 25; ++rep) {
        std::vector<double> z(2000);
        for (double& v : z) v = s.gaussian();
        SampledPath lo = simulate_xi_with_increments(sys, 0.15, 1e-3, z);
        SampledPath hi = simulate_xi_with_increments(sys, 0.25, 1e-3, z);
        REQUIRE(lo.values.size() == hi.values.size());
        for (std::size_t k = 0; k < lo.values.size(); ++k) CHECK(lo.values[k] <= hi.values[k]);
    }
}

TEST_CASE("coupled pairs glue at contact and keep their order to the last bit") {
    RngStream s = RngStream::root(61).stream(0);
    std::vector<double> z(20000);
    for (double& v : z) v = s.gaussian();

    SUBCASE("wide starts never swap") {
        XiSystem sys = xi_system(DiffusionVolModel::hull_white(0.25, 0.125));
        auto [lo, hi] = simulate_xi_pair(sys, 0.15, 0.25, 1e-4, z);
        REQUIRE(lo.values.size() == hi.values.size());
        for (std::size_t k = 0; k < lo.values.size(); ++k) CHECK(lo.values[k] <= hi.values[k]);
    }

    // First index of the maximal all-equal suffix; values.size() if none.
    auto glued_from = [](const SampledPath& lo, const SampledPath& hi) {
        std::size_t k0 = lo.values.size();
        for (std::size_t k = lo.values.size(); k-- > 0;) {
            if (lo.values[k] != hi.values[k]) break;
            k0 = k;
        }
        return k0;
    };

    SUBCASE("an ulp-wide gap merges early and never separates") {
        XiSystem sys = xi_system(DiffusionVolModel::hull_white(0.25, 0.125));
        auto [lo, hi] = simulate_xi_pair(sys, 0.2, std::nextafter(0.2, 1.0), 1e-4, z);
        for (std::size_t k = 0; k < lo.values.size(); ++k) CHECK(lo.values[k] <= hi.values[k]);
        CHECK(glued_from(lo, hi) < lo.values.size() / 2);
    }

    SUBCASE("the substituted Heston coordinate glues the same way") {
        XiSystem sys = xi_system(DiffusionVolModel::heston(0.2, 0.5, 0.32));
        auto [lo, hi] = simulate_xi_pair(sys, 0.25, std::nextafter(0.25, 1.0), 1e-4, z);
        for (std::size_t k = 0; k < lo.values.size(); ++k) CHECK(lo.values[k] <= hi.values[k]);
        CHECK(glued_from(lo, hi) < lo.values.size() / 2);
    }

    SUBCASE("generic models are not glued: the pair matches two plain runs") {
        XiSystem sys = xi_system(DiffusionVolModel::generic(
            [](double x) { return 0.05 * x; }, [](double) { return 0.01; }));
        std::vector<double> zz(z.begin(), z.begin() + 2000);
        auto [lo, hi] = simulate_xi_pair(sys, 0.2, 0.25, 1e-4, zz);
        SampledPath a = simulate_xi_with_increments(sys, 0.2, 1e-4, zz);
        SampledPath b = simulate_xi_with_increments(sys, 0.25, 1e-4, zz);
        CHECK(lo.values == a.values);
        CHECK(hi.values == b.values);
    }

    SUBCASE("reversed starts are refused") {
        XiSystem sys = xi_system(DiffusionVolModel::hull_white(0.25, 0.125));
        CHECK(throws_code(ErrorCode::StartOrderViolated,
                          [&] { (void)simulate_xi_pair(sys, 0.25, 0.15, 1e-4, z); }));
    }
}

TEST_CASE("time-changed variance reproduces the original model's mean") {
    // Hull-White: the original variance Y^2 is a GBM with growth rate kappa,
    // so composing the clock coordinate with the inverse clock must give
    // E[Ytilde_t^2] = y0^2 exp(kappa t).
    const double eta = 0.25, kappa = 0.125, y0 = 0.2, t_check = 0.5;
    XiSystem sys = xi_system(DiffusionVolModel::hull_white(eta, kappa));
    const int n_paths = 4000;
    double sum = 0.0;
    int skipped = 0;
    for (int rep = 0; rep < n_paths; ++rep) {
        SampledPath xi = simulate_xi(sys, y0, 1.0, 2e-4,
                                     RngStream::root(60).stream(static_cast<std::uint64_t>(rep)));
        TimeChangePath clock = gamma_from_samples(xi.values, xi.dt);
        if (clock.gamma_max() < t_check) {
            ++skipped;
            continue;
        }
        const double y_t = xi.at(clock.inverse(t_check));
        sum += y_t * y_t;
    }
    CHECK(skipped == 0);
    const double mean = sum / static_cast<double>(n_paths - skipped);
    CHECK(mean == doctest::Approx(y0 * y0 * std::exp(kappa * t_check)).epsilon(0.025));
}

TEST_CASE("time-changed Heston variance mean-reverts at the original rate") {
    // E[V_t] = lambda + (V0 - lambda) exp(-kappa t) for the original variance.
    const double eta = 0.2, kappa = 0.5, lambda = 0.32, y0 = 0.25, t_check = 0.5;
    XiSystem sys = xi_system(DiffusionVolModel::heston(eta, kappa, lambda));
    const int n_paths = 4000;
    double sum = 0.0;
    int skipped = 0;
    for (int rep = 0; rep < n_paths; ++rep) {
        SampledPath xi = simulate_xi(sys, y0, 1.5, 2e-4,
                                     RngStream::root(61).stream(static_cast<std::uint64_t>(rep)));
        TimeChangePath clock = gamma_from_samples(xi.values, xi.dt);
        if (clock.gamma_max() < t_check) {
            ++skipped;
            continue;
        }
        const double y_t = xi.at(clock.inverse(t_check));
        sum += y_t * y_t;
    }
    CHECK(skipped == 0);
    const double expected = lambda + (y0 * y0 - lambda) * std::exp(-kappa * t_check);
    const double mean = sum / static_cast<double>(n_paths - skipped);
    CHECK(mean == doctest::Approx(expected).epsilon(0.03));
}

TEST_CASE("unit-volatility asset: exact log-normal steps with matched moments") {
    const double dt = 0.01;
    AssetPath g = simulate_G(2.0, AssetKind::Linear, 1000.0, dt, RngStream::root(62).stream(0));
    for (double v : g.values) CHECK(v > 0.0);
    CHECK(g.values[0] == 2.0);
    double sum = 0.0, sum_sq = 0.0;
    const std::size_t n = g.values.size() - 1;
    for (std::size_t k = 0; k < n; ++k) {
        const double r = std::log(g.values[k + 1] / g.values[k]);
        sum += r;
        sum_sq += r * r;
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sum_sq / static_cast<double>(n) - mean * mean;
    // Increments are N(-dt/2, dt) when the coordinate is a driftless
    // exponential martingale; the mean's standard error is sqrt(dt/n).
    CHECK(std::abs(mean + 0.5 * dt) < 4.0 * std::sqrt(dt / static_cast<double>(n)));
    CHECK(var == doctest::Approx(dt).epsilon(0.02));
}

TEST_CASE("zero-diffusion asset stays constant") {
    AssetPath g = simulate_G(1.5, AssetKind::Zero, 1.0, 0.1, RngStream::root(63).stream(0));
    for (double v : g.values) CHECK(v == 1.5);
}

TEST_CASE("correlated drivers: exact at the endpoints, sampled in between") {
    CHECK(throws_code(ErrorCode::DeltaOutOfRange,
                      [] { (void)correlate_drivers(1.5, 10, RngStream::root(0).stream(0)); }));

    DriverIncrements one = correlate_drivers(1.0, 500, RngStream::root(64).stream(0));
    for (std::size_t k = 0; k < 500; ++k) CHECK(one.vol[k] == one.asset[k]);
    DriverIncrements minus = correlate_drivers(-1.0, 500, RngStream::root(64).stream(1));
    for (std::size_t k = 0; k < 500; ++k) CHECK(minus.vol[k] == -minus.asset[k]);

    const double delta = 0.6;
    DriverIncrements d = correlate_drivers(delta, 200000, RngStream::root(64).stream(2));
    double sum_xy = 0.0, sum_xx = 0.0, sum_yy = 0.0;
    for (std::size_t k = 0; k < d.asset.size(); ++k) {
        sum_xy += d.asset[k] * d.vol[k];
        sum_xx += d.asset[k] * d.asset[k];
        sum_yy += d.vol[k] * d.vol[k];
    }
    CHECK(sum_xy / std::sqrt(sum_xx * sum_yy) == doctest::Approx(delta).epsilon(0.01));
}

TEST_CASE("time-changed pair is defined out to the requested horizon") {
    XiSystem sys = xi_system(DiffusionVolModel::hull_white(0.25, 0.125));
    SampledPath xi = simulate_xi(sys, 0.2, 1.0, 1e-3, RngStream::root(65).stream(0));
    TimeChangePath clock = gamma_from_samples(xi.values, xi.dt);
    const double horizon = std::min(0.5, clock.gamma_max());
    AssetPath g =
        simulate_G(1.0, AssetKind::Linear, 1.0, 1e-3, RngStream::root(65).stream(1));
    TimeChangedPair pair = time_changed_pair(g, clock, xi, horizon, 0.01);
    REQUIRE(pair.x.values.size() == pair.y.values.size());
    CHECK(pair.x.dt == 0.01);
    CHECK(pair.x.values[0] == g.values[0]);
    CHECK(pair.y.values[0] == doctest::Approx(0.2));
    for (std::size_t k = 0; k < pair.x.values.size(); ++k) {
        const double t = 0.01 * static_cast<double>(k);
        const double a = clock.inverse(t);
        CHECK(pair.x.values[k] == doctest::Approx(g.at(a)).epsilon(1e-12));
        CHECK(pair.y.values[k] == doctest::Approx(xi.at(a)).epsilon(1e-12));
    }
}
