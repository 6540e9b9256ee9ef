#include "volstop/models.hpp"

#include <cmath>
#include <cstddef>

namespace volstop {

namespace {

void check_delta(double delta) {
    if (!(delta >= -1.0 && delta <= 1.0))
        throw Error(ErrorCode::DeltaOutOfRange, "delta = " + std::to_string(delta));
}

void check_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw Error(ErrorCode::BadParameter, std::string(name) + " must be positive");
}

std::size_t step_count(double horizon, double dt) {
    if (!(dt > 0.0)) throw Error(ErrorCode::BadParameter, "dt must be positive");
    if (!(horizon > 0.0)) throw Error(ErrorCode::BadParameter, "horizon must be positive");
    return static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
}

}  // namespace

DiffusionVolModel DiffusionVolModel::hull_white(double eta, double kappa, double delta) {
    check_positive(eta, "eta");
    check_positive(kappa, "kappa");
    check_delta(delta);
    DiffusionVolModel m;
    m.kind = Kind::HullWhite;
    m.eta = eta;
    m.kappa = kappa;
    m.theta = 0.5 * (kappa - eta * eta);
    m.delta = delta;
    return m;
}

DiffusionVolModel DiffusionVolModel::heston(double eta, double kappa, double lambda,
                                            double delta) {
    check_positive(eta, "eta");
    check_positive(kappa, "kappa");
    check_positive(lambda, "lambda");
    check_delta(delta);
    DiffusionVolModel m;
    m.kind = Kind::Heston;
    m.eta = eta;
    m.kappa = kappa;
    m.lambda = lambda;
    m.theta1 = 0.5 * (kappa * lambda - eta * eta);
    m.theta2 = 0.5 * kappa;
    m.delta = delta;
    return m;
}

DiffusionVolModel DiffusionVolModel::generic(std::function<double(double)> eta_fn,
                                             std::function<double(double)> theta_fn,
                                             double delta) {
    check_delta(delta);
    if (!eta_fn || !theta_fn)
        throw Error(ErrorCode::BadParameter, "generic model needs both coefficient functions");
    DiffusionVolModel m;
    m.kind = Kind::Generic;
    m.eta_fn = std::move(eta_fn);
    m.theta_fn = std::move(theta_fn);
    m.delta = delta;
    return m;
}

double DiffusionVolModel::eta_at(double y) const {
    switch (kind) {
        case Kind::HullWhite: return eta * y;
        case Kind::Heston: return eta;
        case Kind::Generic: return eta_fn(y);
    }
    return 0.0;
}

double DiffusionVolModel::theta_at(double y) const {
    switch (kind) {
        case Kind::HullWhite: return theta * y;
        case Kind::Heston: return theta1 / y - theta2 * y;
        case Kind::Generic: return theta_fn(y);
    }
    return 0.0;
}

XiSystem xi_system(const DiffusionVolModel& model) {
    XiSystem sys{model, std::nullopt};
    if (model.kind == DiffusionVolModel::Kind::HullWhite)
        sys.bessel_dimension = 1.0 + 2.0 * model.theta / (model.eta * model.eta);
    else if (model.kind == DiffusionVolModel::Kind::Heston)
        sys.bessel_dimension = model.theta1 / (model.eta * model.eta) + 1.5;
    return sys;
}

ValidityReport validate_model(const DiffusionVolModel& model) {
    ValidityReport report;
    XiSystem sys = xi_system(model);
    report.phi = sys.bessel_dimension;
    switch (model.kind) {
        case DiffusionVolModel::Kind::HullWhite:
            report.inequality = "kappa >= 2*eta^2";
            report.inequality_holds = model.kappa >= 2.0 * model.eta * model.eta;
            report.status = *report.phi >= 2.0 ? ValidityReport::Status::Pass
                                               : ValidityReport::Status::Fail;
            report.note = report.passed()
                              ? "phi >= 2: positivity, non-explosion and clock divergence hold"
                              : "phi < 2: volatility coordinate can reach zero";
            break;
        case DiffusionVolModel::Kind::Heston:
            report.inequality = "kappa*lambda >= 2*eta^2";
            report.inequality_holds = model.kappa * model.lambda >= 2.0 * model.eta * model.eta;
            report.status = *report.phi >= 2.0 ? ValidityReport::Status::Pass
                                               : ValidityReport::Status::Fail;
            report.note = report.passed()
                              ? "phi >= 2: positivity, non-explosion and clock divergence hold"
                              : "phi < 2: volatility coordinate can reach zero";
            break;
        case DiffusionVolModel::Kind::Generic:
            report.status = ValidityReport::Status::Unverifiable;
            report.inequality = "";
            report.note =
                "unverifiable for generic coefficients; user asserts existence, uniqueness and "
                "clock divergence";
            break;
    }
    return report;
}

double SampledPath::at(double t) const {
    double h = horizon();
    if (!(t >= 0.0) || !(t <= h))
        throw Error(ErrorCode::HorizonExceeded,
                    "t = " + std::to_string(t) + " outside sampled range [0, " +
                        std::to_string(h) + "]");
    double pos = t / dt;
    std::size_t k = static_cast<std::size_t>(pos);
    if (k + 1 >= values.size()) return values.back();
    double w = pos - static_cast<double>(k);
    return values[k] + w * (values[k + 1] - values[k]);
}

namespace {

// One drift-implicit Euler step of dZ = dW + (c_over/Z) dt - d_shift dt,
// solved exactly for the positive root of Z' = b + c/Z'.
inline double implicit_bessel_step(double z, double dw, double c, double d_shift_dt) {
    double b = z + dw - d_shift_dt;
    return 0.5 * (b + std::sqrt(b * b + 4.0 * c));
}

SampledPath run_xi(const XiSystem& system, double y0, double dt, std::size_t n_steps,
                   RngStream* stream, std::span<const double> increments) {
    check_positive(y0, "y0");
    const DiffusionVolModel& m = system.model;
    SampledPath path;
    path.dt = dt;
    path.values.resize(n_steps + 1);
    path.values[0] = y0;
    double sqrt_dt = std::sqrt(dt);

    auto normal = [&](std::size_t k) {
        return stream ? stream->gaussian() : increments[k];
    };

    if (m.kind == DiffusionVolModel::Kind::HullWhite) {
        // Z = xi/eta, dZ = dW + ((phi-1)/2) Z^{-1} dt
        double phi = *system.bessel_dimension;
        double c = 0.5 * (phi - 1.0) * dt;
        if (!(c > 0.0))
            throw Error(ErrorCode::SchemeBreakdown,
                        "phi = " + std::to_string(phi) + " <= 1: implicit step loses positivity");
        double z = y0 / m.eta;
        for (std::size_t k = 0; k < n_steps; ++k) {
            z = implicit_bessel_step(z, sqrt_dt * normal(k), c, 0.0);
            path.values[k + 1] = m.eta * z;
        }
    } else if (m.kind == DiffusionVolModel::Kind::Heston) {
        // Z = xi^2/(2 eta), dZ = dW + [(phi-1)/(2Z) - theta2/eta] dt
        double phi = *system.bessel_dimension;
        double c = 0.5 * (phi - 1.0) * dt;
        if (!(c > 0.0))
            throw Error(ErrorCode::SchemeBreakdown,
                        "phi = " + std::to_string(phi) + " <= 1: implicit step loses positivity");
        double shift = (m.theta2 / m.eta) * dt;
        double z = y0 * y0 / (2.0 * m.eta);
        for (std::size_t k = 0; k < n_steps; ++k) {
            z = implicit_bessel_step(z, sqrt_dt * normal(k), c, shift);
            path.values[k + 1] = std::sqrt(2.0 * m.eta * z);
        }
    } else {
        // Plain Euler on xi itself; positivity is not guaranteed and failure
        // is reported with the offending step.
        double xi = y0;
        for (std::size_t k = 0; k < n_steps; ++k) {
            xi += system.diffusion(xi) * sqrt_dt * normal(k) + system.drift(xi) * dt;
            if (!(xi > 0.0) || !std::isfinite(xi))
                throw Error(ErrorCode::SchemeBreakdown,
                            "xi became nonpositive at step " + std::to_string(k + 1) +
                                " (t = " + std::to_string(dt * static_cast<double>(k + 1)) +
                                "); reduce dt or revise coefficients",
                            static_cast<long>(k + 1), -1);
            path.values[k + 1] = xi;
        }
    }
    return path;
}

}  // namespace

SampledPath simulate_xi(const XiSystem& system, double y0, double horizon, double dt,
                        RngStream stream) {
    std::size_t n = step_count(horizon, dt);
    return run_xi(system, y0, dt, n, &stream, {});
}

SampledPath simulate_xi_with_increments(const XiSystem& system, double y0, double dt,
                                        std::span<const double> increments) {
    if (increments.empty()) throw Error(ErrorCode::BadParameter, "no increments supplied");
    if (!(dt > 0.0)) throw Error(ErrorCode::BadParameter, "dt must be positive");
    return run_xi(system, y0, dt, increments.size(), nullptr, increments);
}

std::pair<SampledPath, SampledPath> simulate_xi_pair(const XiSystem& system, double y_lo,
                                                     double y_hi, double dt,
                                                     std::span<const double> increments) {
    if (increments.empty()) throw Error(ErrorCode::BadParameter, "no increments supplied");
    if (!(dt > 0.0)) throw Error(ErrorCode::BadParameter, "dt must be positive");
    check_positive(y_lo, "y_lo");
    check_positive(y_hi, "y_hi");
    if (y_lo > y_hi) throw Error(ErrorCode::StartOrderViolated, "y_lo must not exceed y_hi");

    const DiffusionVolModel& m = system.model;
    if (m.kind == DiffusionVolModel::Kind::Generic) {
        // Plain Euler is not order-preserving, so a crossing here is a real
        // finding and must not be papered over by gluing.
        return {simulate_xi_with_increments(system, y_lo, dt, increments),
                simulate_xi_with_increments(system, y_hi, dt, increments)};
    }

    const double phi = *system.bessel_dimension;
    const double c = 0.5 * (phi - 1.0) * dt;
    if (!(c > 0.0))
        throw Error(ErrorCode::SchemeBreakdown,
                    "phi = " + std::to_string(phi) + " <= 1: implicit step loses positivity");

    const std::size_t n_steps = increments.size();
    SampledPath lo, hi;
    lo.dt = hi.dt = dt;
    lo.values.resize(n_steps + 1);
    hi.values.resize(n_steps + 1);
    lo.values[0] = y_lo;
    hi.values[0] = y_hi;

    const double sqrt_dt = std::sqrt(dt);
    const bool hull_white = (m.kind == DiffusionVolModel::Kind::HullWhite);
    const double shift = hull_white ? 0.0 : (m.theta2 / m.eta) * dt;
    double z_lo = hull_white ? y_lo / m.eta : y_lo * y_lo / (2.0 * m.eta);
    double z_hi = hull_white ? y_hi / m.eta : y_hi * y_hi / (2.0 * m.eta);
    for (std::size_t k = 0; k < n_steps; ++k) {
        double dw = sqrt_dt * increments[k];
        z_lo = implicit_bessel_step(z_lo, dw, c, shift);
        z_hi = implicit_bessel_step(z_hi, dw, c, shift);
        // The exact map keeps z_lo <= z_hi; contact can only come from
        // rounding, and from equal state the glued pair evolves as one path.
        if (z_lo >= z_hi) z_hi = z_lo;
        lo.values[k + 1] = hull_white ? m.eta * z_lo : std::sqrt(2.0 * m.eta * z_lo);
        hi.values[k + 1] = hull_white ? m.eta * z_hi : std::sqrt(2.0 * m.eta * z_hi);
    }
    return {std::move(lo), std::move(hi)};
}

namespace {

AssetPath run_g(double x0, AssetKind kind, double dt, std::size_t n_steps, RngStream* stream,
                std::span<const double> increments) {
    check_positive(x0, "x0");
    AssetPath path;
    path.dt = dt;
    path.values.resize(n_steps + 1);
    path.values[0] = x0;
    if (kind == AssetKind::Zero) {
        for (std::size_t k = 0; k < n_steps; ++k) path.values[k + 1] = x0;
        return path;
    }
    // dG = G dW: G(t) = x0 exp(W(t) - t/2), sampled exactly on the grid.
    double sqrt_dt = std::sqrt(dt);
    double log_g = std::log(x0);
    for (std::size_t k = 0; k < n_steps; ++k) {
        double z = stream ? stream->gaussian() : increments[k];
        log_g += sqrt_dt * z - 0.5 * dt;
        path.values[k + 1] = std::exp(log_g);
    }
    return path;
}

}  // namespace

AssetPath simulate_G(double x0, AssetKind kind, double horizon, double dt, RngStream stream) {
    std::size_t n = step_count(horizon, dt);
    return run_g(x0, kind, dt, n, &stream, {});
}

AssetPath simulate_G_with_increments(double x0, AssetKind kind, double dt,
                                     std::span<const double> increments) {
    if (increments.empty()) throw Error(ErrorCode::BadParameter, "no increments supplied");
    if (!(dt > 0.0)) throw Error(ErrorCode::BadParameter, "dt must be positive");
    return run_g(x0, kind, dt, increments.size(), nullptr, increments);
}

DriverIncrements correlate_drivers(double delta, std::size_t n, RngStream stream) {
    check_delta(delta);
    DriverIncrements out;
    out.asset.resize(n);
    out.vol.resize(n);
    double c = std::sqrt(1.0 - delta * delta);
    for (std::size_t k = 0; k < n; ++k) {
        double zw = stream.gaussian();
        double zp = stream.gaussian();
        out.asset[k] = zw;
        out.vol[k] = delta * zw + c * zp;
    }
    return out;
}

namespace {

template <typename VolAt>
TimeChangedPair compose(const AssetPath& g, const TimeChangePath& clock, double horizon,
                        double dt_out, VolAt&& vol_at) {
    if (!(horizon > 0.0) || !(dt_out > 0.0))
        throw Error(ErrorCode::BadParameter, "horizon and dt_out must be positive");
    if (clock.gamma_max() < horizon)
        throw Error(ErrorCode::RangeExceeded,
                    "clock reaches Gamma = " + std::to_string(clock.gamma_max()) +
                        " < requested horizon " + std::to_string(horizon));
    std::size_t n = static_cast<std::size_t>(std::ceil(horizon / dt_out - 1e-9));
    TimeChangedPair pair;
    pair.x.dt = dt_out;
    pair.y.dt = dt_out;
    pair.x.values.resize(n + 1);
    pair.y.values.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        double t = std::min(static_cast<double>(k) * dt_out, horizon);
        double a = clock.inverse(std::min(t, clock.gamma_max()));
        if (a > g.horizon() * (1.0 + 1e-12))
            throw Error(ErrorCode::RangeExceeded,
                        "asset path ends at " + std::to_string(g.horizon()) +
                            " but A(t) needs " + std::to_string(a));
        pair.x.values[k] = g.at(std::min(a, g.horizon()));
        pair.y.values[k] = vol_at(a);
    }
    return pair;
}

}  // namespace

TimeChangedPair time_changed_pair(const AssetPath& g, const TimeChangePath& clock,
                                  const ChainPath& vol, const VolStates& states, double horizon,
                                  double dt_out) {
    return compose(g, clock, horizon, dt_out, [&](double a) {
        return states[static_cast<std::size_t>(
            vol.state_index_at(std::min(a, vol.horizon)))];
    });
}

TimeChangedPair time_changed_pair(const AssetPath& g, const TimeChangePath& clock,
                                  const SampledPath& xi, double horizon, double dt_out) {
    return compose(g, clock, horizon, dt_out,
                   [&](double a) { return xi.at(std::min(a, xi.horizon())); });
}

}  // namespace volstop
