#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "volstop/chain.hpp"
#include "volstop/models.hpp"

namespace volstop {

// Payoff g with its declared shape properties. The solver and the Monte Carlo
// estimators branch on the declared flags, and spot_check() verifies them by
// sampling so a mislabeled payoff fails fast instead of silently producing a
// surface whose ordering guarantees do not apply.
class GainFunction {
public:
    enum class Kind { Put, Constant };

    static GainFunction put(double strike);
    static GainFunction constant(double level);

    double operator()(double x) const;

    Kind kind() const { return kind_; }
    double strike() const { return strike_; }
    double level() const { return level_; }
    bool decreasing() const { return decreasing_; }
    bool nonnegative() const { return nonnegative_; }
    bool bounded() const { return bounded_; }
    bool bounded_below() const { return bounded_below_; }
    bool continuous() const { return continuous_; }

    // True where stopping can possibly pay: g(x) > 0.
    bool positive_at(double x) const { return (*this)(x) > 0.0; }

    void spot_check(std::span<const double> xs) const;

private:
    GainFunction() = default;
    Kind kind_ = Kind::Put;
    double strike_ = 0.0;
    double level_ = 0.0;
    bool decreasing_ = false;
    bool nonnegative_ = false;
    bool bounded_ = false;
    bool bounded_below_ = false;
    bool continuous_ = false;
};

// Plain form discounts the gain of the driftless coordinate,
//     v(x,y) = sup E[ e^{-rate * tau} g(X_tau) ];
// the pricing form discounts the gain of the compounded coordinate,
//     v(x,y) = sup E[ e^{-rate * tau} g(e^{rate * tau} X_tau) ],
// which requires a decreasing gain for the ordering machinery to apply.
enum class ProblemForm { Plain, Pricing };

struct StoppingProblem {
    std::variant<ChainModel, DiffusionVolModel> model;
    GainFunction gain;
    double rate = 0.0;
    double horizon = std::numeric_limits<double>::infinity();
    ProblemForm form = ProblemForm::Plain;
    double delta = 0.0;  // driver correlation carried alongside diffusion models

    static StoppingProblem plain(ChainModel m, GainFunction g, double rate,
                                 double horizon = std::numeric_limits<double>::infinity());
    static StoppingProblem pricing(ChainModel m, GainFunction g, double rate,
                                   double horizon = std::numeric_limits<double>::infinity());
    static StoppingProblem plain(DiffusionVolModel m, GainFunction g, double rate,
                                 double horizon = std::numeric_limits<double>::infinity());
    static StoppingProblem pricing(DiffusionVolModel m, GainFunction g, double rate,
                                   double horizon = std::numeric_limits<double>::infinity());

    bool is_chain() const { return std::holds_alternative<ChainModel>(model); }
    const ChainModel& chain() const;
    const DiffusionVolModel& diffusion() const;
    // With a bounded gain the discounted-gain integrability requirement is
    // automatic; estimators consult this instead of asking the caller.
    bool integrability_automatic() const { return gain.bounded(); }
};

// Log-uniform grid of n points spanning strike * 10^{-decades} .. strike * 10^{decades}.
std::vector<double> make_log_grid(double strike, std::size_t n, double decades = 3.0);

struct ValueSurface {
    std::vector<double> x_grid;
    std::vector<double> state_levels;
    std::vector<std::vector<double>> v;  // v[state][grid index]
    int iterations = 0;
    double residual = 0.0;
    double step_dt = 0.0;
    double solver_tol = 0.0;
    ProblemForm form = ProblemForm::Plain;
    double rate = 0.0;
};

// Perpetual solver: per-state log-normal transition stencils on the shared
// log grid (moments of the Gaussian step matched exactly, automatic upwind
// fallback keeps every weight nonnegative), first-order chain-jump mixing,
// discount e^{-rate*dt}, Dirichlet edges (v = g low, v = 0 high for the put).
// The fixed point of v = max(g, discounted expectation) is found by policy
// iteration with exact sparse policy-evaluation solves; residual is measured
// on the fixed-point equation itself. Throws NoConvergence(max_iters,
// residual) and GridTooCoarse (stopping boundary within two cells of an
// edge).
ValueSurface solve_value_iteration(const StoppingProblem& problem, std::span<const double> x_grid,
                                   double tol, int max_iters);

struct ThresholdVector {
    std::vector<double> levels;
    std::vector<std::size_t> grid_indices;
    double contact_tol = 0.0;
};

// Largest grid x with v - g <= contact_tol per state, restricted to the
// region where stopping can pay (g > 0). Default contact_tol is
// 10 * solver_tol. Throws NoContact when a state has no contact point.
ThresholdVector extract_thresholds(const ValueSurface& surface, const GainFunction& gain,
                                   std::optional<double> contact_tol = std::nullopt);

enum class SearchMode { Exhaustive, Monotone };

struct OrderedSearchResult {
    ThresholdVector thresholds;
    std::size_t orderings_examined = 0;
    std::size_t orderings_consistent = 0;
};

// Threshold search over candidate orderings of the per-state boundaries.
// Exhaustive mode examines all m! orderings; monotone mode uses the
// volatility-ordering result to fix the single decreasing ordering (and
// requires a skip-free generator, NotSkipFree otherwise). Each candidate is
// searched by monotone bisection on the solved surface under the ordering
// constraint and kept only if the constraint never binds.
OrderedSearchResult ordered_threshold_search(const StoppingProblem& problem, SearchMode mode,
                                             std::span<const double> x_grid, double tol,
                                             int max_iters);
// Same search on an already-solved surface.
OrderedSearchResult ordered_threshold_search_on(const ValueSurface& surface,
                                                const GainFunction& gain,
                                                const GeneratorMatrix& generator,
                                                SearchMode mode);

struct MonotonicityReport {
    double max_gap = 0.0;  // largest v[state][x] - v[state+1][x] observed
    std::size_t state_index = 0;
    double x_at_max = 0.0;
    std::size_t cells_checked = 0;
    bool passes(double tol) const { return max_gap <= tol; }
};

// Measures violation of "value nondecreasing in the volatility state".
// Violations are data; the caller chooses the tolerance.
MonotonicityReport check_monotone_surface(const ValueSurface& surface);

// Finite-horizon value by backward induction over t_steps implicit steps of
// the same spatial operator, with the exercise maximum applied after each
// step. T = 0 (or t_steps = 0) collapses to v = g; values are nondecreasing
// in T at fixed step size and approach the perpetual surface for large T.
ValueSurface finite_horizon_value(const StoppingProblem& problem, std::span<const double> x_grid,
                                  int t_steps);

}  // namespace volstop
