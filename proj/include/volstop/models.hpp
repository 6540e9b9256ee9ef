#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "volstop/errors.hpp"
#include "volstop/rng.hpp"
#include "volstop/timechange.hpp"

namespace volstop {

// Volatility diffusion dY = eta(Y) dB^Y + theta(Y) dt together with the
// correlation delta between the asset driver and the volatility driver.
//
// Named parameterizations store the variance-equation inputs and the derived
// drift constants:
//   hull_white: dV = 2 eta V dB^Y + kappa V dt, Y = sqrt(V),
//               eta(y) = eta*y, theta(y) = theta*y, theta = (kappa - eta^2)/2
//   heston:     dV = 2 eta sqrt(V) dB^Y + kappa (lambda - V) dt, Y = sqrt(V),
//               eta(y) = eta, theta(y) = theta1/y - theta2*y,
//               theta1 = (kappa*lambda - eta^2)/2, theta2 = kappa/2
struct DiffusionVolModel {
    enum class Kind { HullWhite, Heston, Generic };

    Kind kind = Kind::Generic;
    double delta = 0.0;

    double eta = 0.0;
    double kappa = 0.0;
    double lambda = 0.0;
    double theta = 0.0;    // Hull-White drift constant
    double theta1 = 0.0;   // Heston mean-reversion pull
    double theta2 = 0.0;   // Heston mean-reversion rate

    std::function<double(double)> eta_fn;
    std::function<double(double)> theta_fn;

    static DiffusionVolModel hull_white(double eta, double kappa, double delta = 0.0);
    static DiffusionVolModel heston(double eta, double kappa, double lambda, double delta = 0.0);
    static DiffusionVolModel generic(std::function<double(double)> eta_fn,
                                     std::function<double(double)> theta_fn, double delta = 0.0);

    double eta_at(double y) const;
    double theta_at(double y) const;
};

// Time-changed volatility coordinate: d xi = [eta(xi)/xi] dW^xi + [theta(xi)/xi^2] dt.
// For the named models the squared-Bessel-type substitution and its dimension
// phi are available:
//   hull_white: Z = xi/eta,        dZ = dW + ((phi-1)/2) Z^{-1} dt,  phi = 1 + 2 theta/eta^2
//   heston:     Z = xi^2/(2 eta),  dZ = dW + [(phi-1)/(2Z) - theta2/eta] dt,
//               phi = theta1/eta^2 + 3/2
struct XiSystem {
    DiffusionVolModel model;
    std::optional<double> bessel_dimension;  // phi; empty for generic models

    double drift(double xi) const { return model.theta_at(xi) / (xi * xi); }
    double diffusion(double xi) const { return model.eta_at(xi) / xi; }
};

XiSystem xi_system(const DiffusionVolModel& model);

// Certification that the time-changed construction applies: phi >= 2 keeps
// the volatility coordinate strictly positive and non-explosive and implies
// divergence of the integrated variance. Generic models cannot be checked
// mechanically and come back Unverifiable with the asserted-by-user note.
struct ValidityReport {
    enum class Status { Pass, Fail, Unverifiable };
    Status status = Status::Unverifiable;
    std::optional<double> phi;
    std::string inequality;  // the raw parameter inequality, e.g. "kappa >= 2*eta^2"
    bool inequality_holds = false;
    std::string note;
    bool passed() const { return status == Status::Pass; }
};

ValidityReport validate_model(const DiffusionVolModel& model);

// Uniform-grid sample path: values[k] at t = k*dt.
struct SampledPath {
    double dt = 0.0;
    std::vector<double> values;

    double horizon() const { return dt * static_cast<double>(values.size() - 1); }
    // Linear interpolation; throws HorizonExceeded outside [0, horizon].
    double at(double t) const;
};

using AssetPath = SampledPath;

// Simulates xi from y0 over [0, horizon] with step dt. Named models step the
// substituted coordinate with a drift-implicit Euler scheme whose update
// z -> (b + sqrt(b^2 + 4c))/2, c > 0, is positive for every Gaussian input
// and increasing in the previous value, so positivity and pathwise
// comparisons survive discretization. Generic models use plain Euler and
// throw SchemeBreakdown (with the step index) if positivity fails.
SampledPath simulate_xi(const XiSystem& system, double y0, double horizon, double dt,
                        RngStream stream);

// Same scheme driven by caller-supplied standard normal increments; used for
// shared-noise comparison devices. increments[k] drives step k.
SampledPath simulate_xi_with_increments(const XiSystem& system, double y0, double dt,
                                        std::span<const double> increments);

// Ordered pair on shared increments. Under shared noise the gap contracts
// deterministically, and once it reaches a few ulps two separately rounded
// paths can swap by one bit even though the exact one-step map is increasing.
// For the named models the pair is therefore glued at first contact (equal
// state and equal noise evolve identically from then on), which keeps
// first <= second to the last bit. Generic models are not glued: their plain
// Euler map is not order-preserving, and a crossing is a finding the caller
// must see.
std::pair<SampledPath, SampledPath> simulate_xi_pair(const XiSystem& system, double y_lo,
                                                     double y_hi, double dt,
                                                     std::span<const double> increments);

enum class AssetKind {
    Linear,  // a(x) = x: exact log-normal sampling of dG = G dW
    Zero,    // a(x) = 0: constant path
};

// Unit-volatility asset coordinate dG = a(G) dW started at x0 > 0.
AssetPath simulate_G(double x0, AssetKind kind, double horizon, double dt, RngStream stream);
AssetPath simulate_G_with_increments(double x0, AssetKind kind, double dt,
                                     std::span<const double> increments);

// Correlated standard normal pairs: second = delta*first + sqrt(1-delta^2)*perp.
// Throws DeltaOutOfRange unless delta is in [-1, 1].
struct DriverIncrements {
    std::vector<double> asset;  // drives W (asset coordinate)
    std::vector<double> vol;    // drives W^xi (volatility coordinate)
};

DriverIncrements correlate_drivers(double delta, std::size_t n, RngStream stream);

// Time-changed pair on a uniform grid of step dt_out over [0, horizon]:
// Xtilde(t) = G(A(t)), Ytilde(t) = vol(A(t)). The clock must cover the
// horizon (gamma_max >= horizon) and the asset path must cover A(horizon).
struct TimeChangedPair {
    SampledPath x;  // Xtilde
    SampledPath y;  // Ytilde
};

TimeChangedPair time_changed_pair(const AssetPath& g, const TimeChangePath& clock,
                                  const ChainPath& vol, const VolStates& states, double horizon,
                                  double dt_out);
TimeChangedPair time_changed_pair(const AssetPath& g, const TimeChangePath& clock,
                                  const SampledPath& xi, double horizon, double dt_out);

}  // namespace volstop
