#include "volstop/montecarlo.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>

namespace volstop {

void McConfig::require_valid() const {
    if (n_paths < 2) throw Error(ErrorCode::BadParameter, "n_paths must be >= 2");
    if (antithetic && n_paths % 2 != 0)
        throw Error(ErrorCode::BadParameter, "antithetic pairing needs an even n_paths");
    if (!(dt > 0.0)) throw Error(ErrorCode::BadParameter, "dt must be positive");
    if (!(horizon_cap > 0.0))
        throw Error(ErrorCode::BadParameter, "horizon_cap must be positive");
    if (n_threads < 1) throw Error(ErrorCode::BadParameter, "n_threads must be >= 1");
}

StoppingRule StoppingRule::immediate(std::size_t n_states) {
    StoppingRule r;
    r.levels.assign(n_states, std::numeric_limits<double>::infinity());
    return r;
}

StoppingRule StoppingRule::in_g_time(std::vector<double> levels) {
    StoppingRule r;
    r.kind = Kind::ThresholdInGTime;
    r.levels = std::move(levels);
    return r;
}

StoppingRule StoppingRule::in_original_time(std::vector<double> levels) {
    StoppingRule r;
    r.kind = Kind::ThresholdInOriginalTime;
    r.levels = std::move(levels);
    return r;
}

StoppingRule StoppingRule::from_thresholds(const ThresholdVector& thresholds, Kind kind) {
    StoppingRule r;
    r.kind = kind;
    r.levels = thresholds.levels;
    return r;
}

namespace {

// Runs body(rep) for rep in [0, n) on contiguous blocks per thread. Every
// replication writes only its own slots, so the result is independent of the
// thread count; the first exception (by thread index) is rethrown.
void run_replications(std::size_t n, int n_threads,
                      const std::function<void(std::size_t)>& body) {
    const auto want = static_cast<std::size_t>(n_threads);
    if (want <= 1 || n < 2 * want) {
        for (std::size_t r = 0; r < n; ++r) body(r);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(want);
    for (std::size_t t = 0; t < want; ++t) {
        std::size_t lo = n * t / want;
        std::size_t hi = n * (t + 1) / want;
        pool.emplace_back([&, lo, hi, t] {
            try {
                for (std::size_t r = lo; r < hi; ++r) body(r);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// Mean / standard error over the unit values in index order; deterministic
// for a fixed vector regardless of how it was filled.
Estimate reduce_units(const std::vector<double>& units) {
    Estimate e;
    e.n_units = units.size();
    double sum = 0.0;
    for (double v : units) sum += v;
    e.mean = sum / static_cast<double>(units.size());
    double ss = 0.0;
    for (double v : units) {
        double d = v - e.mean;
        ss += d * d;
    }
    if (units.size() > 1) {
        double var = ss / static_cast<double>(units.size() - 1);
        e.std_error = std::sqrt(var / static_cast<double>(units.size()));
    }
    e.ci99_half = 2.5758293035489004 * e.std_error;
    return e;
}

// Generator of the chain run in the unit-volatility clock: rows scaled by
// y_i^{-2} with the diagonal recomputed so row sums stay at roundoff level.
// Unlike the coupling path this accepts any validated generator.
GeneratorMatrix clock_scaled_generator(const VolStates& states, const GeneratorMatrix& q) {
    std::size_t n = q.size();
    if (states.size() != n)
        throw Error(ErrorCode::BadGenerator, "generator size does not match the state count");
    std::vector<double> scaled(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double w = 1.0 / (states[i] * states[i]);
        double off = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            scaled[i * n + j] = w * q(i, j);
            off += scaled[i * n + j];
        }
        scaled[i * n + i] = -off;
    }
    return GeneratorMatrix(n, std::move(scaled));
}

std::vector<double> inverse_square_levels(const VolStates& states) {
    std::vector<double> inv(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) inv[i] = 1.0 / (states[i] * states[i]);
    return inv;
}

// Thresholds in log space; +inf stays +inf (stop at once), levels <= 0 map to
// -inf (never reached by a positive coordinate).
std::vector<double> log_levels_of(const StoppingRule& rule, std::size_t n_states) {
    if (rule.levels.size() != n_states)
        throw Error(ErrorCode::BadParameter,
                    "rule has " + std::to_string(rule.levels.size()) + " levels for " +
                        std::to_string(n_states) + " states");
    std::vector<double> out(rule.levels.size());
    for (std::size_t i = 0; i < rule.levels.size(); ++i) {
        double b = rule.levels[i];
        if (std::isnan(b)) throw Error(ErrorCode::BadParameter, "rule level is NaN");
        if (b == std::numeric_limits<double>::infinity())
            out[i] = b;
        else if (b <= 0.0)
            out[i] = -std::numeric_limits<double>::infinity();
        else
            out[i] = std::log(b);
    }
    return out;
}

double gain_supremum(const GainFunction& gain) {
    switch (gain.kind()) {
        case GainFunction::Kind::Put: return gain.strike();
        case GainFunction::Kind::Constant: return std::max(gain.level(), 0.0);
    }
    return 0.0;
}

void require_start(double x0, std::size_t y0_index, std::size_t n_states) {
    if (!(x0 > 0.0)) throw Error(ErrorCode::BadParameter, "x0 must be positive");
    if (y0_index >= n_states)
        throw Error(ErrorCode::BadParameter, "y0 index out of range");
}

struct WalkOutcome {
    double payoff = 0.0;
    bool truncated = false;
    double bias_bound = 0.0;
};

struct WalkSetup {
    const ChainModel* cm = nullptr;
    GeneratorMatrix scaled{1, {0.0}};
    std::vector<double> inv_y2;
    std::vector<double> log_levels;
    double log_x0 = 0.0;
    double x0 = 0.0;
    double rate = 0.0;
    bool pricing = false;
    bool coord_compounded = false;  // rule compares the compounded coordinate
    double g_sup = 0.0;
    double cap = 0.0;
    double dt = 0.0;
    std::size_t n_steps = 0;
    std::size_t y0 = 0;
    const GainFunction* gain = nullptr;
};

WalkSetup make_walk_setup(const StoppingProblem& problem, double x0, std::size_t y0_index,
                          const StoppingRule& rule, const McConfig& cfg) {
    const ChainModel& cm = problem.chain();
    require_start(x0, y0_index, cm.states.size());
    if (std::isfinite(problem.horizon))
        throw Error(ErrorCode::BadParameter,
                    "threshold-rule estimation is for perpetual problems; use "
                    "ls_lower_bound_finite_T for a finite horizon");
    WalkSetup s;
    s.cm = &cm;
    s.scaled = clock_scaled_generator(cm.states, cm.generator);
    s.inv_y2 = inverse_square_levels(cm.states);
    s.log_levels = log_levels_of(rule, cm.states.size());
    s.x0 = x0;
    s.log_x0 = std::log(x0);
    s.rate = problem.rate;
    s.pricing = problem.form == ProblemForm::Pricing;
    s.coord_compounded =
        s.pricing && rule.kind == StoppingRule::Kind::ThresholdInOriginalTime;
    s.g_sup = gain_supremum(problem.gain);
    s.cap = cfg.horizon_cap;
    s.dt = cfg.dt;
    s.n_steps = static_cast<std::size_t>(std::ceil(cfg.horizon_cap / cfg.dt - 1e-12));
    if (s.n_steps == 0) s.n_steps = 1;
    s.y0 = y0_index;
    s.gain = &problem.gain;
    return s;
}

WalkOutcome walk_one_path(const WalkSetup& s, RngStream chain_stream, RngStream asset_stream) {
    WalkOutcome out;
    // Stopping is checked at epoch 0 before any evolution; an immediate rule
    // therefore yields exactly the undiscounted gain at the start.
    if (s.log_x0 <= s.log_levels[s.y0]) {
        out.payoff = (*s.gain)(s.x0);
        return out;
    }
    ChainPath z = simulate_chain(s.scaled, static_cast<int>(s.y0), s.cap, chain_stream);
    const std::vector<double>& jt = z.jump_times;
    const std::vector<int>& si = z.state_indices;

    double log_g = s.log_x0;
    double gamma = 0.0;
    double t_gamma = 0.0;  // clock position up to which gamma is accumulated
    double t_prev = 0.0;
    std::size_t seg = 0;
    const double sqrt_dt = std::sqrt(s.dt);

    for (std::size_t k = 1; k <= s.n_steps; ++k) {
        const bool last = k == s.n_steps;
        const double t = last ? s.cap : static_cast<double>(k) * s.dt;
        const double step = t - t_prev;
        while (seg + 1 < jt.size() && jt[seg + 1] <= t) {
            gamma += (jt[seg + 1] - t_gamma) * s.inv_y2[static_cast<std::size_t>(si[seg])];
            t_gamma = jt[seg + 1];
            ++seg;
        }
        gamma += (t - t_gamma) * s.inv_y2[static_cast<std::size_t>(si[seg])];
        t_gamma = t;

        log_g += (last ? std::sqrt(step) : sqrt_dt) * asset_stream.gaussian() - 0.5 * step;
        const auto state = static_cast<std::size_t>(si[seg]);
        const double log_coord = s.coord_compounded ? log_g + s.rate * gamma : log_g;
        if (log_coord <= s.log_levels[state]) {
            double discount = std::exp(-s.rate * gamma);
            double arg = s.pricing ? std::exp(log_g + s.rate * gamma) : std::exp(log_g);
            out.payoff = discount * (*s.gain)(arg);
            return out;
        }
        t_prev = t;
    }
    out.truncated = true;
    out.bias_bound = std::exp(-s.rate * gamma) * s.g_sup;
    return out;
}

}  // namespace

Estimate estimate_value_timechanged(const StoppingProblem& problem, double x0,
                                    std::size_t y0_index, const StoppingRule& rule,
                                    const McConfig& cfg) {
    cfg.require_valid();
    WalkSetup setup = make_walk_setup(problem, x0, y0_index, rule, cfg);
    RngStream root = RngStream::root(cfg.seed);

    const std::size_t n_units = cfg.antithetic ? cfg.n_paths / 2 : cfg.n_paths;
    std::vector<double> units(n_units);
    std::vector<std::uint8_t> trunc_count(n_units, 0);
    std::vector<double> bias(n_units, 0.0);

    run_replications(n_units, cfg.n_threads, [&](std::size_t u) {
        RngStream rep = root.stream(u);
        WalkOutcome a = walk_one_path(setup, rep.stream(0), rep.stream(1));
        if (cfg.antithetic) {
            WalkOutcome b =
                walk_one_path(setup, rep.stream(0).antithetic(), rep.stream(1).antithetic());
            units[u] = 0.5 * (a.payoff + b.payoff);
            trunc_count[u] = static_cast<std::uint8_t>(a.truncated) +
                             static_cast<std::uint8_t>(b.truncated);
            bias[u] = a.bias_bound + b.bias_bound;
        } else {
            units[u] = a.payoff;
            trunc_count[u] = a.truncated ? 1 : 0;
            bias[u] = a.bias_bound;
        }
    });

    Estimate est = reduce_units(units);
    std::size_t truncated = 0;
    double bias_sum = 0.0;
    for (std::size_t u = 0; u < n_units; ++u) {
        truncated += trunc_count[u];
        bias_sum += bias[u];
    }
    est.truncated_fraction =
        static_cast<double>(truncated) / static_cast<double>(cfg.n_paths);
    est.truncation_bias_bound = bias_sum / static_cast<double>(cfg.n_paths);
    return est;
}

namespace {

struct SharedSegments {
    std::vector<double> t;         // breakpoints, first 0, last = horizon
    std::vector<int> state_lo;     // per segment
    std::vector<int> state_hi;
    std::vector<double> gamma_lo;  // per node
    std::vector<double> gamma_hi;
    std::vector<double> slope_lo;  // per segment
    std::vector<double> slope_hi;
};

// Both coordinates of a coupled pair laid out on the union of their jump
// epochs. On a shared segmentation the clock increments of the two
// coordinates are products and sums of pairwise-ordered terms, so the node
// ordering survives floating point exactly.
SharedSegments shared_segments(const CoupledChainPaths& cp, double horizon,
                               const std::vector<double>& inv_y2) {
    SharedSegments s;
    const auto& a = cp.lower.jump_times;
    const auto& b = cp.upper.jump_times;
    s.t.reserve(a.size() + b.size() + 1);
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(s.t));
    s.t.erase(std::unique(s.t.begin(), s.t.end()), s.t.end());
    if (s.t.back() < horizon) s.t.push_back(horizon);

    const std::size_t n_segs = s.t.size() - 1;
    s.state_lo.resize(n_segs);
    s.state_hi.resize(n_segs);
    s.slope_lo.resize(n_segs);
    s.slope_hi.resize(n_segs);
    s.gamma_lo.assign(n_segs + 1, 0.0);
    s.gamma_hi.assign(n_segs + 1, 0.0);
    for (std::size_t j = 0; j < n_segs; ++j) {
        int lo = cp.lower.state_index_at(s.t[j]);
        int hi = cp.upper.state_index_at(s.t[j]);
        s.state_lo[j] = lo;
        s.state_hi[j] = hi;
        s.slope_lo[j] = inv_y2[static_cast<std::size_t>(lo)];
        s.slope_hi[j] = inv_y2[static_cast<std::size_t>(hi)];
        double dur = s.t[j + 1] - s.t[j];
        s.gamma_lo[j + 1] = s.gamma_lo[j] + dur * s.slope_lo[j];
        s.gamma_hi[j + 1] = s.gamma_hi[j] + dur * s.slope_hi[j];
    }
    return s;
}

struct PairSlot {
    double gap = 0.0;
    std::size_t order_checks = 0;
    std::size_t vol_violations = 0;
    std::size_t gamma_violations = 0;
    std::size_t payoff_violations = 0;
    double max_payoff_violation = 0.0;
    bool truncated = false;
    bool negative_gain = false;
};

}  // namespace

PairedReport verify_monotonicity_coupled(const StoppingProblem& problem, double x0,
                                         std::size_t y_lo_index, std::size_t y_hi_index,
                                         const StoppingRule& rule, const McConfig& cfg) {
    cfg.require_valid();
    if (cfg.antithetic)
        throw Error(ErrorCode::BadParameter,
                    "coupled verification does not support antithetic pairing");
    const ChainModel& cm = problem.chain();
    if (!is_tridiagonal(cm.generator))
        throw Error(ErrorCode::NotSkipFree,
                    "coupled verification requires a skip-free (tridiagonal) generator");
    SkipFreeChainModel sf = validate_skip_free(cm.states, cm.generator);
    require_start(x0, y_lo_index, cm.states.size());
    require_start(x0, y_hi_index, cm.states.size());
    if (std::isfinite(problem.horizon))
        throw Error(ErrorCode::BadParameter, "coupled verification runs perpetual rules");

    const std::vector<double> inv_y2 = inverse_square_levels(cm.states);
    const std::vector<double> log_levels = log_levels_of(rule, cm.states.size());
    const bool pricing = problem.form == ProblemForm::Pricing;
    const bool coord_compounded =
        pricing && rule.kind == StoppingRule::Kind::ThresholdInOriginalTime;
    const double rate = problem.rate;
    const GainFunction& gain = problem.gain;
    const double log_x0 = std::log(x0);
    const double cap = cfg.horizon_cap;
    std::size_t n_steps = static_cast<std::size_t>(std::ceil(cap / cfg.dt - 1e-12));
    if (n_steps == 0) n_steps = 1;

    RngStream root = RngStream::root(cfg.seed);
    std::vector<PairSlot> slots(cfg.n_paths);

    run_replications(cfg.n_paths, cfg.n_threads, [&](std::size_t r) {
        PairSlot& slot = slots[r];
        RngStream rep = root.stream(r);
        CoupledChainPaths cp = simulate_coupled(sf, static_cast<int>(y_lo_index),
                                                static_cast<int>(y_hi_index), cap,
                                                rep.stream(0));
        SharedSegments seg = shared_segments(cp, cap, inv_y2);

        for (std::size_t j = 0; j < seg.state_lo.size(); ++j) {
            ++slot.order_checks;
            if (seg.state_lo[j] > seg.state_hi[j]) ++slot.vol_violations;
        }
        for (std::size_t j = 0; j < seg.gamma_lo.size(); ++j) {
            ++slot.order_checks;
            if (seg.gamma_lo[j] < seg.gamma_hi[j]) ++slot.gamma_violations;
        }

        RngStream asset = rep.stream(1);
        double log_g = log_x0;
        double t_prev = 0.0;
        std::size_t cur = 0;
        const double sqrt_dt = std::sqrt(cfg.dt);
        bool stopped = false;

        auto payoffs_at = [&](double lg, double g_lo, double g_hi, double& p_lo,
                              double& p_hi) {
            double arg_lo = pricing ? std::exp(lg + rate * g_lo) : std::exp(lg);
            double arg_hi = pricing ? std::exp(lg + rate * g_hi) : std::exp(lg);
            double gain_lo = gain(arg_lo);
            double gain_hi = gain(arg_hi);
            if (gain_lo < 0.0 || gain_hi < 0.0) {
                slot.negative_gain = true;
                return;
            }
            p_lo = std::exp(-rate * g_lo) * gain_lo;
            p_hi = std::exp(-rate * g_hi) * gain_hi;
        };

        // Epoch 0: both clocks read zero, both payoffs equal the spot gain.
        if (log_x0 <= log_levels[y_lo_index]) {
            double p0 = gain(x0);
            if (p0 < 0.0)
                slot.negative_gain = true;
            else
                slot.gap = 0.0;
            stopped = true;
        }

        for (std::size_t k = 1; !stopped && k <= n_steps; ++k) {
            const bool final_step = k == n_steps;
            const double t = final_step ? cap : static_cast<double>(k) * cfg.dt;
            const double step = t - t_prev;
            log_g += (final_step ? std::sqrt(step) : sqrt_dt) * asset.gaussian() - 0.5 * step;
            while (cur + 1 < seg.state_lo.size() && seg.t[cur + 1] <= t) ++cur;
            const double dt_in = t - seg.t[cur];
            const double g_lo = seg.gamma_lo[cur] + dt_in * seg.slope_lo[cur];
            const double g_hi = seg.gamma_hi[cur] + dt_in * seg.slope_hi[cur];
            const auto state = static_cast<std::size_t>(seg.state_lo[cur]);
            const double log_coord = coord_compounded ? log_g + rate * g_lo : log_g;
            if (log_coord <= log_levels[state]) {
                double p_lo = 0.0, p_hi = 0.0;
                payoffs_at(log_g, g_lo, g_hi, p_lo, p_hi);
                if (!slot.negative_gain) {
                    if (p_lo > p_hi) {
                        ++slot.payoff_violations;
                        slot.max_payoff_violation = p_lo - p_hi;
                    }
                    slot.gap = p_hi - p_lo;
                }
                stopped = true;
            }
            t_prev = t;
        }
        if (!stopped) {
            slot.truncated = true;
            slot.gap = 0.0;
        }
    });

    PairedReport report;
    report.n_pairs = cfg.n_paths;
    std::vector<double> gaps(cfg.n_paths);
    for (std::size_t r = 0; r < cfg.n_paths; ++r) {
        const PairSlot& slot = slots[r];
        if (slot.negative_gain)
            throw Error(ErrorCode::RuleStopsAtNegativeGain,
                        "rule stopped replication " + std::to_string(r) +
                            " where the gain is negative");
        report.order_checks += slot.order_checks;
        report.vol_order_violations += slot.vol_violations;
        report.gamma_order_violations += slot.gamma_violations;
        report.payoff_violations += slot.payoff_violations;
        report.max_payoff_violation =
            std::max(report.max_payoff_violation, slot.max_payoff_violation);
        if (slot.truncated) ++report.truncated_pairs;
        gaps[r] = slot.gap;
    }
    report.payoff_gap = reduce_units(gaps);
    report.payoff_gap.truncated_fraction =
        static_cast<double>(report.truncated_pairs) / static_cast<double>(cfg.n_paths);
    return report;
}

PairedReport verify_monotonicity_coupled(const DiffusionVolModel& model, double y_lo,
                                         double y_hi, double horizon, const McConfig& cfg) {
    cfg.require_valid();
    if (!(y_lo > 0.0) || !(y_hi > 0.0))
        throw Error(ErrorCode::BadParameter, "starting levels must be positive");
    if (y_lo > y_hi)
        throw Error(ErrorCode::StartOrderViolated, "y_lo must not exceed y_hi");
    if (!(horizon > 0.0)) throw Error(ErrorCode::BadParameter, "horizon must be positive");

    XiSystem sys = xi_system(model);
    std::size_t n_steps = static_cast<std::size_t>(std::ceil(horizon / cfg.dt - 1e-9));
    if (n_steps == 0) n_steps = 1;

    RngStream root = RngStream::root(cfg.seed);
    std::vector<PairSlot> slots(cfg.n_paths);

    run_replications(cfg.n_paths, cfg.n_threads, [&](std::size_t r) {
        PairSlot& slot = slots[r];
        RngStream stream = root.stream(r).stream(0);
        std::vector<double> z(n_steps);
        for (double& v : z) v = stream.gaussian();
        auto [lo, hi] = simulate_xi_pair(sys, y_lo, y_hi, cfg.dt, z);
        for (std::size_t k = 0; k < lo.values.size(); ++k) {
            ++slot.order_checks;
            if (lo.values[k] > hi.values[k]) ++slot.vol_violations;
        }
        TimeChangePath glo = gamma_from_samples(lo.values, cfg.dt);
        TimeChangePath ghi = gamma_from_samples(hi.values, cfg.dt);
        const auto& nlo = glo.gamma_nodes();
        const auto& nhi = ghi.gamma_nodes();
        for (std::size_t k = 0; k < nlo.size(); ++k) {
            ++slot.order_checks;
            if (nlo[k] < nhi[k]) ++slot.gamma_violations;
        }
    });

    PairedReport report;
    report.n_pairs = cfg.n_paths;
    for (const PairSlot& slot : slots) {
        report.order_checks += slot.order_checks;
        report.vol_order_violations += slot.vol_violations;
        report.gamma_order_violations += slot.gamma_violations;
    }
    report.payoff_gap.n_units = 0;
    return report;
}

ConvergenceReport probe_continuity(const DiffusionVolModel& model, double y0,
                                   std::span<const double> rel_offsets, double t_probe,
                                   const McConfig& cfg) {
    cfg.require_valid();
    if (!(y0 > 0.0)) throw Error(ErrorCode::BadParameter, "y0 must be positive");
    if (!(t_probe > 0.0)) throw Error(ErrorCode::BadParameter, "t_probe must be positive");
    if (rel_offsets.empty()) throw Error(ErrorCode::BadParameter, "no probe levels given");
    bool any_pos = false, any_neg = false;
    for (std::size_t k = 0; k < rel_offsets.size(); ++k) {
        double off = rel_offsets[k];
        if (!std::isfinite(off) || off <= -1.0)
            throw Error(ErrorCode::BadParameter, "offsets must be finite and > -1");
        if (off > 0.0) any_pos = true;
        if (off < 0.0) any_neg = true;
        if (k > 0 && std::abs(off) > std::abs(rel_offsets[k - 1]))
            throw Error(ErrorCode::BadParameter,
                        "offsets must approach 0 (nonincreasing magnitude)");
    }
    if (any_pos && any_neg)
        throw Error(ErrorCode::BadParameter, "offsets must lie on one side of y0");

    XiSystem sys = xi_system(model);
    const std::size_t n_levels = rel_offsets.size();
    std::vector<double> levels(n_levels);
    for (std::size_t k = 0; k < n_levels; ++k) levels[k] = y0 * (1.0 + rel_offsets[k]);

    std::size_t n_steps = static_cast<std::size_t>(std::ceil(t_probe / cfg.dt - 1e-9));
    if (n_steps == 0 || static_cast<double>(n_steps) * cfg.dt < t_probe) ++n_steps;

    struct ProbeSlot {
        std::vector<double> gamma;  // per level
        double base = 0.0;
        std::size_t violations = 0;
    };
    RngStream root = RngStream::root(cfg.seed);
    std::vector<ProbeSlot> slots(cfg.n_paths);

    run_replications(cfg.n_paths, cfg.n_threads, [&](std::size_t r) {
        ProbeSlot& slot = slots[r];
        RngStream stream = root.stream(r).stream(0);
        std::vector<double> z(n_steps);
        for (double& v : z) v = stream.gaussian();
        slot.gamma.resize(n_levels);
        SampledPath base_path = simulate_xi_with_increments(sys, y0, cfg.dt, z);
        slot.base = gamma_from_samples(base_path.values, cfg.dt).gamma_at(t_probe);
        for (std::size_t k = 0; k < n_levels; ++k) {
            SampledPath p = simulate_xi_with_increments(sys, levels[k], cfg.dt, z);
            slot.gamma[k] = gamma_from_samples(p.values, cfg.dt).gamma_at(t_probe);
        }
        // Levels above y0 give faster volatility, hence a slower clock; the
        // ladder of clock readings must be monotone toward the base.
        for (std::size_t k = 0; k + 1 < n_levels; ++k) {
            bool ok = levels[k] >= levels[k + 1] ? slot.gamma[k] <= slot.gamma[k + 1]
                                                 : slot.gamma[k] >= slot.gamma[k + 1];
            if (!ok) ++slot.violations;
        }
        if (n_levels > 0) {
            bool ok = levels[n_levels - 1] >= y0 ? slot.gamma[n_levels - 1] <= slot.base
                                                 : slot.gamma[n_levels - 1] >= slot.base;
            if (!ok) ++slot.violations;
        }
    });

    ConvergenceReport report;
    report.levels = levels;
    report.rel_offsets.assign(rel_offsets.begin(), rel_offsets.end());
    report.mean_gamma.assign(n_levels, 0.0);
    report.mean_abs_gap.assign(n_levels, 0.0);
    for (const ProbeSlot& slot : slots) {
        report.base_mean_gamma += slot.base;
        report.ordering_violations += slot.violations;
        for (std::size_t k = 0; k < n_levels; ++k) {
            report.mean_gamma[k] += slot.gamma[k];
            report.mean_abs_gap[k] += std::abs(slot.gamma[k] - slot.base);
        }
        report.max_pathwise_gap_closest =
            std::max(report.max_pathwise_gap_closest,
                     std::abs(slot.gamma[n_levels - 1] - slot.base));
    }
    const auto n = static_cast<double>(cfg.n_paths);
    report.base_mean_gamma /= n;
    for (std::size_t k = 0; k < n_levels; ++k) {
        report.mean_gamma[k] /= n;
        report.mean_abs_gap[k] /= n;
    }
    return report;
}

ConvergenceReport probe_continuity(const DiffusionVolModel& model, double y0,
                                   ProbeDirection direction, std::size_t n_levels,
                                   double t_probe, const McConfig& cfg) {
    if (n_levels == 0) throw Error(ErrorCode::BadParameter, "n_levels must be >= 1");
    const double sign = direction == ProbeDirection::Down ? 1.0 : -1.0;
    std::vector<double> offsets(n_levels);
    for (std::size_t k = 0; k < n_levels; ++k) {
        double expo = n_levels == 1
                          ? -3.0
                          : -3.0 * static_cast<double>(k) / static_cast<double>(n_levels - 1);
        offsets[k] = sign * 3e-2 * std::pow(10.0, expo);
    }
    return probe_continuity(model, y0, offsets, t_probe, cfg);
}

namespace {

struct DateRow {
    double arg = 0.0;  // gain argument at the date
    int state = 0;
};

struct LsSetup {
    const ChainModel* cm = nullptr;
    GeneratorMatrix scaled{1, {0.0}};
    double clock_horizon = 0.0;
    double horizon = 0.0;
    std::size_t n_dates = 0;
    std::vector<double> dates;
    std::vector<double> compound;  // e^{rate * t_k}, applied in the pricing form
    bool pricing = false;
    double x0 = 0.0;
    std::size_t y0 = 0;
};

// Exact draw of the (gain argument, volatility state) row at every exercise
// date: the chain is simulated in the unit-volatility clock until the elapsed
// original time covers the horizon, the dates are located by inverting the
// clock, and the Gaussian coordinate is advanced by the exact increments
// between those locations.
std::vector<DateRow> simulate_date_rows(const LsSetup& s, RngStream rep) {
    ChainPath path =
        simulate_chain(s.scaled, static_cast<int>(s.y0), s.clock_horizon, rep.stream(0));
    TimeChangePath clock = gamma_from_chain(path, s.cm->states);
    if (clock.gamma_max() < s.horizon)
        throw Error(ErrorCode::HorizonExceeded,
                    "clock did not reach the horizon (internal)");
    RngStream asset = rep.stream(1);
    std::vector<DateRow> rows(s.n_dates + 1);
    rows[0].arg = s.x0;
    rows[0].state = static_cast<int>(s.y0);
    double log_g = std::log(s.x0);
    double s_prev = 0.0;
    for (std::size_t k = 1; k <= s.n_dates; ++k) {
        double s_k = clock.inverse(s.dates[k]);
        double ds = std::max(s_k - s_prev, 0.0);
        log_g += std::sqrt(ds) * asset.gaussian() - 0.5 * ds;
        double x = std::exp(log_g);
        rows[k].arg = s.pricing ? s.compound[k] * x : x;
        rows[k].state = path.state_index_at(s_k);
        s_prev = s_k;
    }
    return rows;
}

double poly_eval(const Eigen::VectorXd& coef, double z) {
    double acc = 0.0;
    for (Eigen::Index p = coef.size(); p-- > 0;) acc = acc * z + coef[p];
    return acc;
}

}  // namespace

Estimate ls_lower_bound_finite_T(const StoppingProblem& problem, double x0,
                                 std::size_t y0_index, const RegressionBasis& basis,
                                 const McConfig& cfg) {
    cfg.require_valid();
    if (cfg.antithetic)
        throw Error(ErrorCode::BadParameter,
                    "the regression lower bound does not support antithetic pairing");
    const ChainModel& cm = problem.chain();
    require_start(x0, y0_index, cm.states.size());
    if (!std::isfinite(problem.horizon))
        throw Error(ErrorCode::BadParameter, "the regression lower bound needs a finite horizon");
    if (problem.gain.kind() != GainFunction::Kind::Put)
        throw Error(ErrorCode::BadParameter, "the regression lower bound supports the put gain");
    if (basis.n_exercise_dates < 1)
        throw Error(ErrorCode::BadParameter, "need at least one exercise date");
    if (basis.degree < 0) throw Error(ErrorCode::BadParameter, "degree must be >= 0");

    const GainFunction& gain = problem.gain;
    const double rate = problem.rate;
    const double horizon = problem.horizon;

    if (horizon == 0.0) {
        Estimate e;
        e.mean = gain(x0);
        e.n_units = cfg.n_paths;
        return e;
    }

    LsSetup setup;
    setup.cm = &cm;
    setup.scaled = clock_scaled_generator(cm.states, cm.generator);
    const double y_max = cm.states[cm.states.size() - 1];
    setup.clock_horizon = horizon * y_max * y_max * (1.0 + 1e-9) + 1e-300;
    setup.horizon = horizon;
    setup.n_dates = static_cast<std::size_t>(basis.n_exercise_dates);
    setup.dates.resize(setup.n_dates + 1);
    setup.compound.resize(setup.n_dates + 1);
    for (std::size_t k = 0; k <= setup.n_dates; ++k) {
        setup.dates[k] = horizon * static_cast<double>(k) / static_cast<double>(setup.n_dates);
        setup.compound[k] = std::exp(rate * setup.dates[k]);
    }
    setup.pricing = problem.form == ProblemForm::Pricing;
    setup.x0 = x0;
    setup.y0 = y0_index;

    const std::size_t m = cm.states.size();
    const std::size_t n1 = cfg.n_paths;
    const auto n_coef = static_cast<std::size_t>(basis.degree + 1);
    const double strike = gain.strike();

    RngStream root = RngStream::root(cfg.seed);
    RngStream fit_root = root.stream(0);
    RngStream eval_root = root.stream(1);

    std::vector<std::vector<DateRow>> panel(n1);
    run_replications(n1, cfg.n_threads, [&](std::size_t r) {
        panel[r] = simulate_date_rows(setup, fit_root.stream(r));
    });

    // Discount from date k+j back to date k depends only on the lag j.
    std::vector<double> lag_discount(setup.n_dates + 1);
    for (std::size_t j = 0; j <= setup.n_dates; ++j)
        lag_discount[j] = std::exp(-rate * horizon * static_cast<double>(j) /
                                   static_cast<double>(setup.n_dates));

    std::vector<double> cash(n1);
    std::vector<std::size_t> cash_date(n1);
    for (std::size_t r = 0; r < n1; ++r) {
        cash[r] = gain(panel[r][setup.n_dates].arg);
        cash_date[r] = setup.n_dates;
    }

    // coefficients[(k-1)*m + i]: exercise comparison at date k in state i.
    std::vector<std::optional<Eigen::VectorXd>> coefficients((setup.n_dates) * m);
    std::vector<std::size_t> rows_at;
    for (std::size_t k = setup.n_dates; k-- > 1;) {
        for (std::size_t i = 0; i < m; ++i) {
            rows_at.clear();
            for (std::size_t r = 0; r < n1; ++r) {
                const DateRow& row = panel[r][k];
                if (static_cast<std::size_t>(row.state) == i && gain.positive_at(row.arg))
                    rows_at.push_back(r);
            }
            if (rows_at.size() < 3 * n_coef) continue;
            Eigen::MatrixXd a(static_cast<Eigen::Index>(rows_at.size()),
                              static_cast<Eigen::Index>(n_coef));
            Eigen::VectorXd b(static_cast<Eigen::Index>(rows_at.size()));
            for (std::size_t rr = 0; rr < rows_at.size(); ++rr) {
                std::size_t r = rows_at[rr];
                double z = panel[r][k].arg / strike;
                double pw = 1.0;
                for (std::size_t p = 0; p < n_coef; ++p) {
                    a(static_cast<Eigen::Index>(rr), static_cast<Eigen::Index>(p)) = pw;
                    pw *= z;
                }
                b[static_cast<Eigen::Index>(rr)] = cash[r] * lag_discount[cash_date[r] - k];
            }
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
            if (qr.rank() < static_cast<Eigen::Index>(n_coef))
                throw Error(ErrorCode::RegressionSingular,
                            "design matrix rank-deficient at date " + std::to_string(k) +
                                ", state " + std::to_string(i + 1));
            coefficients[(k - 1) * m + i] = qr.solve(b);
        }
        for (std::size_t r = 0; r < n1; ++r) {
            const DateRow& row = panel[r][k];
            const auto& coef = coefficients[(k - 1) * m + static_cast<std::size_t>(row.state)];
            if (!coef || !gain.positive_at(row.arg)) continue;
            double g_now = gain(row.arg);
            if (g_now >= poly_eval(*coef, row.arg / strike)) {
                cash[r] = g_now;
                cash_date[r] = k;
            }
        }
    }

    double cont0 = 0.0;
    for (std::size_t r = 0; r < n1; ++r) cont0 += cash[r] * lag_discount[cash_date[r]];
    cont0 /= static_cast<double>(n1);
    const bool exercise_at_0 = gain(x0) >= cont0;
    panel.clear();
    panel.shrink_to_fit();

    std::vector<double> units(cfg.n_paths);
    run_replications(cfg.n_paths, cfg.n_threads, [&](std::size_t r) {
        if (exercise_at_0) {
            units[r] = gain(x0);
            return;
        }
        std::vector<DateRow> rows = simulate_date_rows(setup, eval_root.stream(r));
        for (std::size_t k = 1; k < setup.n_dates; ++k) {
            const DateRow& row = rows[k];
            const auto& coef = coefficients[(k - 1) * m + static_cast<std::size_t>(row.state)];
            if (!coef || !gain.positive_at(row.arg)) continue;
            double g_now = gain(row.arg);
            if (g_now >= poly_eval(*coef, row.arg / strike)) {
                units[r] = lag_discount[k] * g_now;
                return;
            }
        }
        units[r] = lag_discount[setup.n_dates] * gain(rows[setup.n_dates].arg);
    });

    return reduce_units(units);
}

}  // namespace volstop
