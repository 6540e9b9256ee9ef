#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "volstop/models.hpp"
#include "volstop/stopping.hpp"
#include "volstop/timechange.hpp"

namespace volstop {

struct McConfig {
    std::size_t n_paths = 10000;
    double dt = 1e-3;           // step of the unit-volatility clock walk
    double horizon_cap = 10.0;  // truncation point of that clock for perpetual rules
    std::uint64_t seed = 12345;
    bool antithetic = false;  // mirrored pairs; halves the unit count
    int n_threads = 1;

    // Throws BadParameter: n_paths >= 2 (and even when antithetic), dt > 0,
    // horizon_cap > 0, n_threads >= 1.
    void require_valid() const;
};

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_units = 0;  // independent averaging units (pairs when antithetic)
    double ci99_half = 0.0;   // 99% normal CI half-width around mean

    // Paths that reached horizon_cap without stopping contribute payoff 0;
    // the foregone value per such path is at most the discounted gain
    // supremum, and the realized bound is accumulated here.
    double truncated_fraction = 0.0;
    double truncation_bias_bound = 0.0;
    bool truncation_dominates() const { return truncated_fraction > 0.01; }
};

// First-entry threshold rule, one level per volatility state. A level of
// +infinity stops immediately; a level <= 0 never triggers (the compared
// coordinate is positive). The rule is evaluated at the walk's grid epochs,
// so it depends only on the path up to the decision time.
struct StoppingRule {
    enum class Kind {
        ThresholdInGTime,        // compare the unit-volatility coordinate G
        ThresholdInOriginalTime  // compare the gain argument of the problem form
    };

    Kind kind = Kind::ThresholdInOriginalTime;
    std::vector<double> levels;

    static StoppingRule immediate(std::size_t n_states);
    static StoppingRule in_g_time(std::vector<double> levels);
    static StoppingRule in_original_time(std::vector<double> levels);
    static StoppingRule from_thresholds(const ThresholdVector& thresholds,
                                        Kind kind = Kind::ThresholdInOriginalTime);
};

// Estimates the value of the given rule by simulating the volatility chain in
// the unit-volatility clock, accumulating the elapsed original time exactly
// from the jump structure, and walking G on a grid of step cfg.dt. The payoff
// at the stopping epoch rho is
//     plain:   e^{-rate * Gamma(rho)} g(G(rho))
//     pricing: e^{-rate * Gamma(rho)} g(e^{rate * Gamma(rho)} G(rho)).
// Bit-identical for fixed (seed, config) regardless of n_threads.
Estimate estimate_value_timechanged(const StoppingProblem& problem, double x0,
                                    std::size_t y0_index, const StoppingRule& rule,
                                    const McConfig& cfg);

struct PairedReport {
    std::size_t n_pairs = 0;
    std::size_t order_checks = 0;  // (time point, pair) comparisons performed

    // Exact pathwise comparisons; any nonzero count is a finding.
    std::size_t vol_order_violations = 0;
    std::size_t gamma_order_violations = 0;
    std::size_t payoff_violations = 0;
    double max_payoff_violation = 0.0;

    std::size_t truncated_pairs = 0;
    Estimate payoff_gap;  // mean of (high-start payoff - low-start payoff)

    bool ordered() const {
        return vol_order_violations == 0 && gamma_order_violations == 0 &&
               payoff_violations == 0;
    }
};

// Runs the coupled pair of volatility chains from two ordered starts against
// one shared G path per replication. The rule is evaluated on the low-start
// coordinate and the same stopping epoch is applied to both payoffs, so the
// pathwise payoff comparison is exact. Requires a skip-free chain model and a
// gain that is nonnegative wherever the rule stops (RuleStopsAtNegativeGain
// otherwise). Antithetic pairing is not supported here (BadParameter).
PairedReport verify_monotonicity_coupled(const StoppingProblem& problem, double x0,
                                         std::size_t y_lo_index, std::size_t y_hi_index,
                                         const StoppingRule& rule, const McConfig& cfg);

// Diffusion counterpart: two volatility paths from ordered starts share the
// driving noise, so the positive increasing scheme keeps them ordered at
// every grid point; the clocks are compared on the shared grid. Payoff fields
// of the report stay zero.
PairedReport verify_monotonicity_coupled(const DiffusionVolModel& model, double y_lo,
                                         double y_hi, double horizon, const McConfig& cfg);

enum class ProbeDirection {
    Down,  // levels start above y0 and decrease toward it
    Up     // levels start below y0 and increase toward it
};

struct ConvergenceReport {
    std::vector<double> levels;         // probed starting levels, closest last
    std::vector<double> rel_offsets;    // (level - y0)/y0
    std::vector<double> mean_gamma;     // mean clock value at t_probe per level
    std::vector<double> mean_abs_gap;   // mean |Gamma_level - Gamma_base| per level
    double base_mean_gamma = 0.0;       // at y0 itself
    std::size_t ordering_violations = 0;
    double max_pathwise_gap_closest = 0.0;

    bool converged(double rel_tol) const {
        return !mean_abs_gap.empty() &&
               mean_abs_gap.back() <= rel_tol * base_mean_gamma;
    }
};

// Clock continuity in the starting level: per replication all levels and the
// base share the driving noise, so the clock values are monotone across
// levels (exact, counted in ordering_violations when not) and the gap to the
// base shrinks as the levels approach y0.
ConvergenceReport probe_continuity(const DiffusionVolModel& model, double y0,
                                   std::span<const double> rel_offsets, double t_probe,
                                   const McConfig& cfg);
// Geometric ladder of n_levels relative offsets from 3e-2 down to 3e-5 on the
// chosen side of y0.
ConvergenceReport probe_continuity(const DiffusionVolModel& model, double y0,
                                   ProbeDirection direction, std::size_t n_levels,
                                   double t_probe, const McConfig& cfg);

struct RegressionBasis {
    int n_exercise_dates = 50;  // uniform dates over (0, T]; date 0 handled separately
    int degree = 2;             // polynomial degree in x/strike
};

// Regression-based exercise rule on a fixed date grid, then a fresh-path
// estimate of that rule's value: a feasible-rule lower bound for the finite
// horizon problem. The pair (asset, volatility state) at the exercise dates
// is sampled exactly by locating the dates in the unit-volatility clock.
// Requires a chain model, a put gain and a finite horizon. Throws
// RegressionSingular when a cross-section's design matrix is rank-deficient.
Estimate ls_lower_bound_finite_T(const StoppingProblem& problem, double x0,
                                 std::size_t y0_index, const RegressionBasis& basis,
                                 const McConfig& cfg);

}  // namespace volstop
