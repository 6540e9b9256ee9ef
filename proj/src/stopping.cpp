#include "volstop/stopping.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace volstop {

GainFunction GainFunction::put(double strike) {
    if (!(strike > 0.0)) throw Error(ErrorCode::BadParameter, "put strike must be positive");
    GainFunction g;
    g.kind_ = Kind::Put;
    g.strike_ = strike;
    g.decreasing_ = true;
    g.nonnegative_ = true;
    g.bounded_ = true;
    g.bounded_below_ = true;
    g.continuous_ = true;
    return g;
}

GainFunction GainFunction::constant(double level) {
    GainFunction g;
    g.kind_ = Kind::Constant;
    g.level_ = level;
    g.decreasing_ = true;  // weakly
    g.nonnegative_ = level >= 0.0;
    g.bounded_ = true;
    g.bounded_below_ = true;
    g.continuous_ = true;
    return g;
}

double GainFunction::operator()(double x) const {
    switch (kind_) {
        case Kind::Put: return std::max(strike_ - x, 0.0);
        case Kind::Constant: return level_;
    }
    return 0.0;
}

void GainFunction::spot_check(std::span<const double> xs) const {
    double prev = std::numeric_limits<double>::quiet_NaN();
    bool first = true;
    for (double x : xs) {
        double g = (*this)(x);
        if (!std::isfinite(g))
            throw Error(ErrorCode::BadParameter, "gain not finite at x = " + std::to_string(x));
        if (nonnegative_ && g < 0.0)
            throw Error(ErrorCode::BadParameter,
                        "gain declared nonnegative but g(" + std::to_string(x) + ") < 0");
        if (decreasing_ && !first && g > prev + 1e-12 * (1.0 + std::abs(prev)))
            throw Error(ErrorCode::BadParameter,
                        "gain declared decreasing but increases at x = " + std::to_string(x));
        prev = g;
        first = false;
    }
}

namespace {

void require_rate(double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate))
        throw Error(ErrorCode::BadParameter, "discount rate must be positive and finite");
}

void require_horizon(double horizon) {
    if (std::isnan(horizon) || horizon < 0.0)
        throw Error(ErrorCode::BadParameter, "horizon must be nonnegative (or +inf)");
}

}  // namespace

StoppingProblem StoppingProblem::plain(ChainModel m, GainFunction g, double rate,
                                       double horizon) {
    require_rate(rate);
    require_horizon(horizon);
    return StoppingProblem{std::move(m), std::move(g), rate, horizon, ProblemForm::Plain, 0.0};
}

StoppingProblem StoppingProblem::pricing(ChainModel m, GainFunction g, double rate,
                                         double horizon) {
    require_rate(rate);
    require_horizon(horizon);
    if (!g.decreasing())
        throw Error(ErrorCode::BadParameter,
                    "pricing form needs a decreasing gain; the compounded argument otherwise "
                    "breaks the ordering guarantees");
    return StoppingProblem{std::move(m), std::move(g), rate, horizon, ProblemForm::Pricing, 0.0};
}

StoppingProblem StoppingProblem::plain(DiffusionVolModel m, GainFunction g, double rate,
                                       double horizon) {
    require_rate(rate);
    require_horizon(horizon);
    double delta = m.delta;
    return StoppingProblem{std::move(m), std::move(g), rate, horizon, ProblemForm::Plain, delta};
}

StoppingProblem StoppingProblem::pricing(DiffusionVolModel m, GainFunction g, double rate,
                                         double horizon) {
    require_rate(rate);
    require_horizon(horizon);
    if (!g.decreasing())
        throw Error(ErrorCode::BadParameter,
                    "pricing form needs a decreasing gain; the compounded argument otherwise "
                    "breaks the ordering guarantees");
    double delta = m.delta;
    return StoppingProblem{std::move(m), std::move(g), rate, horizon, ProblemForm::Pricing,
                           delta};
}

const ChainModel& StoppingProblem::chain() const {
    if (!is_chain())
        throw Error(ErrorCode::BadParameter, "operation requires a chain volatility model");
    return std::get<ChainModel>(model);
}

const DiffusionVolModel& StoppingProblem::diffusion() const {
    if (is_chain())
        throw Error(ErrorCode::BadParameter, "operation requires a diffusion volatility model");
    return std::get<DiffusionVolModel>(model);
}

std::vector<double> make_log_grid(double strike, std::size_t n, double decades) {
    if (!(strike > 0.0) || n < 2 || !(decades > 0.0))
        throw Error(ErrorCode::BadParameter, "bad grid request");
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) {
        double e = -decades + 2.0 * decades * static_cast<double>(j) / static_cast<double>(n - 1);
        x[j] = strike * std::pow(10.0, e);
    }
    return x;
}

namespace {

struct Lattice {
    std::size_t n = 0;  // grid points
    std::size_t m = 0;  // chain states
    double h = 0.0;     // log-space step
    double dt = 0.0;
    double discount = 1.0;
    std::vector<double> p_up, p_mid, p_dn;  // per-state stencil weights
    std::vector<double> stay;               // 1 - dt * exit rate
    std::vector<double> jump;               // dt * q[i][k], row-major m x m
    std::vector<double> g;                  // gain on the grid
    std::vector<double> bc_low, bc_high;    // Dirichlet edge values per state
};

double log_grid_step(std::span<const double> x) {
    if (x.size() < 8) throw Error(ErrorCode::GridTooCoarse, "grid has fewer than 8 points");
    double h = (std::log(x.back()) - std::log(x.front())) / static_cast<double>(x.size() - 1);
    if (!(h > 0.0)) throw Error(ErrorCode::BadParameter, "grid must be increasing");
    for (std::size_t j = 0; j + 1 < x.size(); ++j) {
        if (!(x[j + 1] > x[j]))
            throw Error(ErrorCode::BadParameter, "grid must be strictly increasing");
        double hj = std::log(x[j + 1] / x[j]);
        if (std::abs(hj - h) > 1e-8 * h)
            throw Error(ErrorCode::BadParameter, "solver requires a log-uniform grid");
    }
    return h;
}

void check_grid_span(const GainFunction& gain, std::span<const double> x) {
    if (gain.kind() != GainFunction::Kind::Put) return;
    double k = gain.strike();
    if (x.front() > 1.01e-3 * k || x.back() < 0.99e3 * k)
        throw Error(ErrorCode::GridTooCoarse,
                    "grid must span strike*1e-3 .. strike*1e3; got [" +
                        std::to_string(x.front()) + ", " + std::to_string(x.back()) + "]");
}

std::pair<double, double> edge_values(const GainFunction& gain, double x_low, double x_high) {
    switch (gain.kind()) {
        case GainFunction::Kind::Put:
            // Deep in the money the put is exercised immediately; far out it
            // is worthless.
            return {gain(x_low), 0.0};
        case GainFunction::Kind::Constant:
            // A nonpositive level is never taken (wait forever); a positive
            // one is taken immediately everywhere.
            return {std::max(gain(x_low), 0.0), std::max(gain(x_high), 0.0)};
    }
    return {0.0, 0.0};
}

Lattice build_lattice(const StoppingProblem& problem, std::span<const double> x_grid) {
    const ChainModel& cm = problem.chain();
    problem.gain.spot_check(x_grid);
    check_grid_span(problem.gain, x_grid);

    Lattice lat;
    lat.n = x_grid.size();
    lat.m = cm.states.size();
    lat.h = log_grid_step(x_grid);

    std::vector<double> sigma(lat.m), mu(lat.m), lambda(lat.m);
    double carry = (problem.form == ProblemForm::Pricing) ? problem.rate : 0.0;
    double dt = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lat.m; ++i) {
        sigma[i] = cm.states[i];
        mu[i] = carry - 0.5 * sigma[i] * sigma[i];
        lambda[i] = std::max(cm.generator.exit_rate(i), 0.0);
        dt = std::min(dt, 0.9 * lat.h * lat.h /
                              (sigma[i] * sigma[i] + lat.h * std::abs(mu[i])));
        if (lambda[i] > 0.0) dt = std::min(dt, 0.2 / lambda[i]);
    }
    lat.dt = dt;
    lat.discount = std::exp(-problem.rate * dt);

    lat.p_up.resize(lat.m);
    lat.p_mid.resize(lat.m);
    lat.p_dn.resize(lat.m);
    lat.stay.resize(lat.m);
    for (std::size_t i = 0; i < lat.m; ++i) {
        double w = sigma[i] * sigma[i] * dt / (lat.h * lat.h);
        double a = mu[i] * dt / lat.h;
        double up = 0.5 * (w + a), dn = 0.5 * (w - a);
        if (up < 0.0 || dn < 0.0) {
            // Central differencing would produce a negative weight; upwind
            // the drift instead (costs O(h) extra diffusion, keeps the
            // scheme monotone).
            up = 0.5 * w + std::max(a, 0.0);
            dn = 0.5 * w + std::max(-a, 0.0);
        }
        double mid = 1.0 - up - dn;
        if (mid < -1e-12)
            throw Error(ErrorCode::BadParameter, "stencil weights inconsistent (internal)");
        lat.p_up[i] = up;
        lat.p_dn[i] = dn;
        lat.p_mid[i] = std::max(mid, 0.0);
        lat.stay[i] = 1.0 - dt * lambda[i];
    }
    lat.jump.assign(lat.m * lat.m, 0.0);
    for (std::size_t i = 0; i < lat.m; ++i)
        for (std::size_t k = 0; k < lat.m; ++k)
            if (k != i) lat.jump[i * lat.m + k] = dt * cm.generator(i, k);

    lat.g.resize(lat.n);
    for (std::size_t j = 0; j < lat.n; ++j) lat.g[j] = problem.gain(x_grid[j]);
    auto [lo, hi] = edge_values(problem.gain, x_grid.front(), x_grid.back());
    lat.bc_low.assign(lat.m, lo);
    lat.bc_high.assign(lat.m, hi);
    return lat;
}

// One application of the discounted one-step expectation at interior node
// (i, j); v is the flat m x n value array with edge entries holding the
// Dirichlet values.
inline double apply_step(const Lattice& lat, const std::vector<double>& v, std::size_t i,
                         std::size_t j) {
    const double* vi = v.data() + i * lat.n;
    double diff = lat.p_dn[i] * vi[j - 1] + lat.p_mid[i] * vi[j] + lat.p_up[i] * vi[j + 1];
    double mix = lat.stay[i] * diff;
    for (std::size_t k = 0; k < lat.m; ++k) {
        double w = lat.jump[i * lat.m + k];
        if (w != 0.0) mix += w * v[k * lat.n + j];
    }
    return lat.discount * mix;
}

// Exact policy evaluation: solve the linear system with v = g on stop nodes,
// v = discounted expectation on continue nodes, Dirichlet edges.
std::vector<double> evaluate_policy(const Lattice& lat, const std::vector<char>& stop) {
    using Trip = Eigen::Triplet<double>;
    const std::size_t n = lat.n, m = lat.m;
    const std::size_t total = m * n;
    std::vector<Trip> trips;
    trips.reserve(total * (4 + m));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));

    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const auto row = static_cast<Eigen::Index>(i * n + j);
            if (j == 0) {
                trips.emplace_back(row, row, 1.0);
                rhs[row] = lat.bc_low[i];
                continue;
            }
            if (j == n - 1) {
                trips.emplace_back(row, row, 1.0);
                rhs[row] = lat.bc_high[i];
                continue;
            }
            if (stop[i * n + j]) {
                trips.emplace_back(row, row, 1.0);
                rhs[row] = lat.g[j];
                continue;
            }
            double s = lat.discount * lat.stay[i];
            trips.emplace_back(row, row, 1.0 - s * lat.p_mid[i]);
            trips.emplace_back(row, row - 1, -s * lat.p_dn[i]);
            trips.emplace_back(row, row + 1, -s * lat.p_up[i]);
            for (std::size_t k = 0; k < m; ++k) {
                double w = lat.jump[i * m + k];
                if (w != 0.0)
                    trips.emplace_back(row, static_cast<Eigen::Index>(k * n + j),
                                       -lat.discount * w);
            }
        }
    }

    Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(total),
                                  static_cast<Eigen::Index>(total));
    a.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
        throw Error(ErrorCode::NoConvergence, "policy evaluation solve failed");
    Eigen::VectorXd sol = lu.solve(rhs);
    if (lu.info() != Eigen::Success)
        throw Error(ErrorCode::NoConvergence, "policy evaluation backsolve failed");
    return std::vector<double>(sol.data(), sol.data() + sol.size());
}

struct PolicySweep {
    std::vector<char> policy;
    double residual = 0.0;
};

PolicySweep improve_policy(const Lattice& lat, const std::vector<double>& v) {
    PolicySweep sweep;
    sweep.policy.assign(lat.m * lat.n, 0);
    for (std::size_t i = 0; i < lat.m; ++i) {
        for (std::size_t j = 1; j + 1 < lat.n; ++j) {
            double cont = apply_step(lat, v, i, j);
            double best = std::max(lat.g[j], cont);
            sweep.policy[i * lat.n + j] = (lat.g[j] >= cont) ? 1 : 0;
            sweep.residual = std::max(sweep.residual, std::abs(v[i * lat.n + j] - best));
        }
    }
    return sweep;
}

void check_put_structure(const Lattice& lat, const std::vector<char>& stop,
                         std::span<const double> x_grid, const GainFunction& gain) {
    if (gain.kind() != GainFunction::Kind::Put) return;
    for (std::size_t i = 0; i < lat.m; ++i) {
        // Largest stop node inside the paying region; the stop set must be a
        // prefix of the grid up to it (down-connected in x).
        std::ptrdiff_t boundary = -1;
        for (std::size_t j = 1; j + 1 < lat.n; ++j) {
            if (!gain.positive_at(x_grid[j])) break;
            if (stop[i * lat.n + j]) boundary = static_cast<std::ptrdiff_t>(j);
        }
        for (std::ptrdiff_t j = 1; j <= boundary; ++j) {
            if (!stop[i * lat.n + static_cast<std::size_t>(j)])
                throw Error(ErrorCode::NoConvergence,
                            "stopping set is not down-connected in x (state " +
                                std::to_string(i + 1) + ")");
        }
        if (boundary < 2 || boundary + 3 > static_cast<std::ptrdiff_t>(lat.n))
            throw Error(ErrorCode::GridTooCoarse,
                        "stopping boundary of state " + std::to_string(i + 1) +
                            " sits within two cells of the grid edge");
    }
}

struct HowardResult {
    std::vector<double> v;
    std::vector<char> policy;
    double residual = std::numeric_limits<double>::infinity();
};

// Greedy policy improvement with exact evaluation, run until the policy is
// stable or the residual meets tol. `iterations` accumulates across calls so
// one budget can be shared over several grids.
HowardResult run_howard(const Lattice& lat, std::vector<char> policy, double tol, int max_iters,
                        int& iterations) {
    HowardResult out;
    while (iterations < max_iters) {
        out.v = evaluate_policy(lat, policy);
        ++iterations;
        PolicySweep sweep = improve_policy(lat, out.v);
        out.residual = sweep.residual;
        bool stable = std::equal(policy.begin(), policy.end(), sweep.policy.begin());
        policy = std::move(sweep.policy);
        if (stable || out.residual <= tol) break;
    }
    out.policy = std::move(policy);
    return out;
}

// Grids this small are solved directly; larger ones are seeded from a coarse
// solve first.
constexpr std::size_t kDirectSolveNodes = 192;

std::vector<double> coarsen_grid(std::span<const double> x, std::size_t n_coarse) {
    const double l0 = std::log(x.front());
    const double l1 = std::log(x.back());
    std::vector<double> out(n_coarse);
    for (std::size_t j = 0; j < n_coarse; ++j)
        out[j] = std::exp(l0 + (l1 - l0) * static_cast<double>(j) /
                                   static_cast<double>(n_coarse - 1));
    out.front() = x.front();
    out.back() = x.back();
    return out;
}

// Transfer a stop/continue policy between log-uniform grids sharing their
// endpoints. A target node is marked stop only when both flanking source
// nodes stop: an undershot stop set is repaired in a single sweep (the next
// exact solve exposes v < g on every missing cell at once), while an overshot
// one sheds just one cell per sweep.
std::vector<char> transfer_policy(const std::vector<char>& src, std::size_t m, std::size_t n_src,
                                  std::size_t n_tgt) {
    std::vector<char> out(m * n_tgt, 0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 1; j + 1 < n_tgt; ++j) {
            double pos = static_cast<double>(j) * static_cast<double>(n_src - 1) /
                         static_cast<double>(n_tgt - 1);
            auto lo = static_cast<std::size_t>(pos);
            std::size_t hi = std::min(lo + 1, n_src - 1);
            out[i * n_tgt + j] = (src[i * n_src + lo] && src[i * n_src + hi]) ? 1 : 0;
        }
    }
    return out;
}

// The free boundary moves one cell per policy sweep once the iterate is
// locally stable, so Howard's method started far from the answer needs O(n)
// sweeps. Seeding each grid with the policy solved on a 4x coarser one keeps
// the boundary within a couple of cells of its final position and the sweep
// count flat in n.
HowardResult solve_seeded(const StoppingProblem& problem, std::span<const double> x_grid,
                          const Lattice& lat, double tol, int max_iters, int& iterations) {
    std::vector<char> policy(lat.m * lat.n, 0);
    if (lat.n > kDirectSolveNodes) {
        std::size_t n_coarse = std::max<std::size_t>(96, lat.n / 4);
        std::vector<double> x_coarse = coarsen_grid(x_grid, n_coarse);
        Lattice lat_coarse = build_lattice(problem, x_coarse);
        HowardResult coarse =
            solve_seeded(problem, x_coarse, lat_coarse, tol, max_iters, iterations);
        policy = transfer_policy(coarse.policy, lat.m, n_coarse, lat.n);
    }
    return run_howard(lat, std::move(policy), tol, max_iters, iterations);
}

}  // namespace

ValueSurface solve_value_iteration(const StoppingProblem& problem, std::span<const double> x_grid,
                                   double tol, int max_iters) {
    if (!(tol > 0.0)) throw Error(ErrorCode::BadParameter, "tol must be positive");
    if (max_iters < 1) throw Error(ErrorCode::BadParameter, "max_iters must be >= 1");
    if (std::isfinite(problem.horizon))
        throw Error(ErrorCode::BadParameter,
                    "perpetual solver called with a finite horizon; use finite_horizon_value");
    Lattice lat = build_lattice(problem, x_grid);

    int iterations = 0;
    HowardResult res = solve_seeded(problem, x_grid, lat, tol, max_iters, iterations);
    std::vector<double> v = std::move(res.v);
    std::vector<char> policy = std::move(res.policy);
    double residual = res.residual;
    if (residual > tol)
        throw Error(ErrorCode::NoConvergence,
                    "residual " + std::to_string(residual) + " > tol after " +
                        std::to_string(iterations) + " policy iterations (max_iters = " +
                        std::to_string(max_iters) + ")");

    check_put_structure(lat, policy, x_grid, problem.gain);

    // v >= g holds up to the reported residual; guard against gross failure.
    for (std::size_t i = 0; i < lat.m; ++i)
        for (std::size_t j = 1; j + 1 < lat.n; ++j)
            if (v[i * lat.n + j] < lat.g[j] - 10.0 * std::max(tol, residual))
                throw Error(ErrorCode::NoConvergence, "value dipped below the gain (internal)");

    ValueSurface surface;
    surface.x_grid.assign(x_grid.begin(), x_grid.end());
    surface.state_levels = problem.chain().states.levels();
    surface.v.resize(lat.m);
    for (std::size_t i = 0; i < lat.m; ++i)
        surface.v[i].assign(v.begin() + static_cast<std::ptrdiff_t>(i * lat.n),
                            v.begin() + static_cast<std::ptrdiff_t>((i + 1) * lat.n));
    surface.iterations = iterations;
    surface.residual = residual;
    surface.step_dt = lat.dt;
    surface.solver_tol = tol;
    surface.form = problem.form;
    surface.rate = problem.rate;
    return surface;
}

ThresholdVector extract_thresholds(const ValueSurface& surface, const GainFunction& gain,
                                   std::optional<double> contact_tol) {
    double ctol = contact_tol.value_or(10.0 * surface.solver_tol);
    ThresholdVector out;
    out.contact_tol = ctol;
    const std::size_t n = surface.x_grid.size();
    for (std::size_t i = 0; i < surface.v.size(); ++i) {
        bool found = false;
        for (std::size_t j = n; j-- > 0;) {
            double x = surface.x_grid[j];
            if (!gain.positive_at(x)) continue;
            if (surface.v[i][j] - gain(x) <= ctol) {
                out.levels.push_back(x);
                out.grid_indices.push_back(j);
                found = true;
                break;
            }
        }
        if (!found)
            throw Error(ErrorCode::NoContact,
                        "state " + std::to_string(i + 1) +
                            " has no grid point with v - g <= " + std::to_string(ctol));
    }
    return out;
}

namespace {

std::vector<std::vector<std::size_t>> candidate_orderings(std::size_t m, SearchMode mode) {
    std::vector<std::size_t> base(m);
    std::iota(base.begin(), base.end(), std::size_t{0});
    if (mode == SearchMode::Monotone) return {base};
    std::vector<std::vector<std::size_t>> all;
    std::sort(base.begin(), base.end());
    do {
        all.push_back(base);
    } while (std::next_permutation(base.begin(), base.end()));
    return all;
}

}  // namespace

OrderedSearchResult ordered_threshold_search_on(const ValueSurface& surface,
                                                const GainFunction& gain,
                                                const GeneratorMatrix& generator,
                                                SearchMode mode) {
    if (mode == SearchMode::Monotone && !is_tridiagonal(generator))
        throw Error(ErrorCode::NotSkipFree,
                    "monotone ordering is only guaranteed for skip-free chains");

    const std::size_t m = surface.v.size();
    const std::size_t n = surface.x_grid.size();
    const double ctol = 10.0 * surface.solver_tol;

    auto contact = [&](std::size_t i, std::size_t j) {
        double x = surface.x_grid[j];
        return gain.positive_at(x) && surface.v[i][j] - gain(x) <= ctol;
    };

    // Largest grid index where stopping can pay at all.
    std::ptrdiff_t pay_max = -1;
    for (std::size_t j = n; j-- > 0;)
        if (gain.positive_at(surface.x_grid[j])) {
            pay_max = static_cast<std::ptrdiff_t>(j);
            break;
        }
    if (pay_max < 0) throw Error(ErrorCode::NoContact, "gain is nowhere positive on the grid");

    ThresholdVector unconstrained = extract_thresholds(surface, gain, ctol);

    OrderedSearchResult result;
    bool recorded = false;
    for (const auto& ordering : candidate_orderings(m, mode)) {
        ++result.orderings_examined;
        std::size_t ub = static_cast<std::size_t>(pay_max);
        bool ok = true;
        std::vector<std::size_t> idx(m, 0);
        for (std::size_t s : ordering) {
            if (!contact(s, 0)) {
                ok = false;
                break;
            }
            // Monotone bisection for the last contact index in [0, ub]; the
            // stop region is down-connected, so the predicate is a prefix.
            std::size_t lo = 0, hi = ub;
            if (!contact(s, hi)) {
                while (lo < hi) {
                    std::size_t mid = lo + (hi - lo + 1) / 2;
                    if (contact(s, mid))
                        lo = mid;
                    else
                        hi = mid - 1;
                }
            } else {
                lo = hi;
            }
            // The candidate ordering is consistent only if the constrained
            // search reproduces the free boundary, i.e. the cap never binds.
            if (lo != unconstrained.grid_indices[s]) {
                ok = false;
                break;
            }
            idx[s] = lo;
            ub = lo;
        }
        if (ok) {
            ++result.orderings_consistent;
            if (!recorded) {
                result.thresholds.contact_tol = ctol;
                result.thresholds.grid_indices = idx;
                result.thresholds.levels.resize(m);
                for (std::size_t s = 0; s < m; ++s)
                    result.thresholds.levels[s] = surface.x_grid[idx[s]];
                recorded = true;
            }
        }
    }
    if (!recorded)
        throw Error(ErrorCode::NoContact, "no threshold ordering is consistent with the surface");
    return result;
}

OrderedSearchResult ordered_threshold_search(const StoppingProblem& problem, SearchMode mode,
                                             std::span<const double> x_grid, double tol,
                                             int max_iters) {
    ValueSurface surface = solve_value_iteration(problem, x_grid, tol, max_iters);
    return ordered_threshold_search_on(surface, problem.gain, problem.chain().generator, mode);
}

MonotonicityReport check_monotone_surface(const ValueSurface& surface) {
    MonotonicityReport report;
    const std::size_t m = surface.v.size();
    const std::size_t n = surface.x_grid.size();
    for (std::size_t i = 0; i + 1 < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double gap = surface.v[i][j] - surface.v[i + 1][j];
            ++report.cells_checked;
            if (gap > report.max_gap) {
                report.max_gap = gap;
                report.state_index = i;
                report.x_at_max = surface.x_grid[j];
            }
        }
    }
    return report;
}

ValueSurface finite_horizon_value(const StoppingProblem& problem, std::span<const double> x_grid,
                                  int t_steps) {
    if (!(std::isfinite(problem.horizon)))
        throw Error(ErrorCode::BadParameter, "finite_horizon_value requires a finite horizon");
    if (t_steps < 0) throw Error(ErrorCode::BadParameter, "t_steps must be >= 0");

    const ChainModel& cm = problem.chain();
    problem.gain.spot_check(x_grid);
    check_grid_span(problem.gain, x_grid);
    const std::size_t n = x_grid.size();
    const std::size_t m = cm.states.size();
    const double h = log_grid_step(x_grid);

    ValueSurface surface;
    surface.x_grid.assign(x_grid.begin(), x_grid.end());
    surface.state_levels = cm.states.levels();
    surface.form = problem.form;
    surface.rate = problem.rate;
    surface.solver_tol = 0.0;

    std::vector<double> g(n);
    for (std::size_t j = 0; j < n; ++j) g[j] = problem.gain(x_grid[j]);
    auto [bc_low, bc_high] = edge_values(problem.gain, x_grid.front(), x_grid.back());

    // Forced exercise at the horizon.
    std::vector<double> v(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) v[i * n + j] = g[j];

    if (problem.horizon == 0.0 || t_steps == 0) {
        surface.v.resize(m);
        for (std::size_t i = 0; i < m; ++i)
            surface.v[i].assign(v.begin() + static_cast<std::ptrdiff_t>(i * n),
                                v.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
        surface.iterations = 0;
        surface.step_dt = 0.0;
        return surface;
    }

    const double dt = problem.horizon / static_cast<double>(t_steps);
    const double carry = (problem.form == ProblemForm::Pricing) ? problem.rate : 0.0;

    // Implicit step matrix I - dt * (generator - rate); upwind the drift when
    // central weights would break the M-matrix property.
    using Trip = Eigen::Triplet<double>;
    std::vector<Trip> trips;
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(m * n));
    for (std::size_t i = 0; i < m; ++i) {
        double sigma = cm.states[i];
        double mu = carry - 0.5 * sigma * sigma;
        double w = 0.5 * sigma * sigma / (h * h);
        double up = w + 0.5 * mu / h;
        double dn = w - 0.5 * mu / h;
        if (up < 0.0 || dn < 0.0) {
            up = w + std::max(mu, 0.0) / h;
            dn = w + std::max(-mu, 0.0) / h;
        }
        double lambda = std::max(cm.generator.exit_rate(i), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const auto row = static_cast<Eigen::Index>(i * n + j);
            if (j == 0 || j == n - 1) {
                trips.emplace_back(row, row, 1.0);
                continue;
            }
            trips.emplace_back(row, row, 1.0 + dt * (problem.rate + lambda + up + dn));
            trips.emplace_back(row, row - 1, -dt * dn);
            trips.emplace_back(row, row + 1, -dt * up);
            for (std::size_t k = 0; k < m; ++k)
                if (k != i && cm.generator(i, k) != 0.0)
                    trips.emplace_back(row, static_cast<Eigen::Index>(k * n + j),
                                       -dt * cm.generator(i, k));
        }
    }
    Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(m * n),
                                  static_cast<Eigen::Index>(m * n));
    a.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
        throw Error(ErrorCode::NoConvergence, "implicit step factorization failed");

    for (int step = 0; step < t_steps; ++step) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double val = v[i * n + j];
                if (j == 0) val = bc_low;
                if (j == n - 1) val = bc_high;
                rhs[static_cast<Eigen::Index>(i * n + j)] = val;
            }
        }
        Eigen::VectorXd sol = lu.solve(rhs);
        if (lu.info() != Eigen::Success)
            throw Error(ErrorCode::NoConvergence, "implicit step backsolve failed");
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double cont = sol[static_cast<Eigen::Index>(i * n + j)];
                v[i * n + j] = std::max(g[j], cont);
            }
            v[i * n] = std::max(g[0], bc_low);
            v[i * n + n - 1] = std::max(g[n - 1], bc_high);
        }
    }

    surface.v.resize(m);
    for (std::size_t i = 0; i < m; ++i)
        surface.v[i].assign(v.begin() + static_cast<std::ptrdiff_t>(i * n),
                            v.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    surface.iterations = t_steps;
    surface.step_dt = dt;
    return surface;
}

}  // namespace volstop
