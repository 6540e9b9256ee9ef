#pragma once

#include <cstddef>
#include <vector>

#include "volstop/errors.hpp"
#include "volstop/rng.hpp"

namespace volstop {

// Sorted positive volatility levels y_1 < ... < y_m. Construction validates;
// an instance is therefore always usable as a state space.
class VolStates {
public:
    explicit VolStates(std::vector<double> levels);

    std::size_t size() const { return levels_.size(); }
    double operator[](std::size_t i) const { return levels_[i]; }
    const std::vector<double>& levels() const { return levels_; }

private:
    std::vector<double> levels_;
};

// Conservative rate matrix, row-major. Off-diagonal entries are nonnegative
// and every row sums to zero within 1e-12 absolute; construction validates.
class GeneratorMatrix {
public:
    GeneratorMatrix(std::size_t n, std::vector<double> row_major);

    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return rates_[i * n_ + j]; }
    const std::vector<double>& data() const { return rates_; }

    // Total exit rate of state i (= -q[i][i] up to the validated row-sum slack).
    double exit_rate(std::size_t i) const { return -rates_[i * n_ + i]; }

private:
    std::size_t n_;
    std::vector<double> rates_;
};

bool is_tridiagonal(const GeneratorMatrix& q);

// Volatility chain without structural restrictions beyond generator validity.
// Solvers accept this; coupling constructions require the skip-free variant.
struct ChainModel {
    VolStates states;
    GeneratorMatrix generator;
};

ChainModel make_chain_model(VolStates states, GeneratorMatrix generator);

// A chain model that has passed skip-free (tridiagonal) validation. Coupling
// constructions require this; plain simulation does not.
struct SkipFreeChainModel {
    VolStates states;
    GeneratorMatrix generator;

    ChainModel as_chain_model() const { return ChainModel{states, generator}; }
};

// Throws EmptyStates / BadGenerator / NotTridiagonal(i,j).
SkipFreeChainModel validate_skip_free(const VolStates& states, const GeneratorMatrix& q);

// Entrywise y_i^{-2} * q[i][j]: the generator of the volatility chain run in
// the clock of the driving Brownian motion. Rows still sum to zero and
// tridiagonal structure is preserved.
GeneratorMatrix time_scaled_generator(const SkipFreeChainModel& model);

// Generator of the coupled pair on the m^2 product states (i,k), flattened as
// i*m + k. Off-diagonal pairs move one coordinate at a time with the
// time-scaled single-chain rates (independence coupling); diagonal pairs move
// both coordinates together, so once the chains meet they are glued. Started
// from i <= k the pair can meet but never cross: a skip-free move changes a
// coordinate by one level, and reaching equality switches the row set.
GeneratorMatrix coupling_generator(const SkipFreeChainModel& model);

inline std::size_t pair_index(std::size_t i, std::size_t k, std::size_t m) { return i * m + k; }
inline std::size_t pair_lower(std::size_t p, std::size_t m) { return p / m; }
inline std::size_t pair_upper(std::size_t p, std::size_t m) { return p % m; }

// Right-continuous piecewise-constant path. jump_times starts at 0 and is
// strictly increasing; state_indices has one entry per segment and no two
// consecutive entries are equal (no phantom jumps). Segment k covers
// [jump_times[k], jump_times[k+1]), the last segment runs to horizon, which
// may be +infinity for an absorbed tail.
struct ChainPath {
    std::vector<double> jump_times;
    std::vector<int> state_indices;
    double horizon = 0.0;

    int state_index_at(double t) const;
    std::size_t segment_at(double t) const;
};

// Exact CTMC simulation that can be extended on demand. The next jump epoch
// is always drawn one step beyond the current frontier, so extend_to(a)
// followed by extend_to(b) consumes the stream exactly as extend_to(b) alone.
class ChainPathBuilder {
public:
    ChainPathBuilder(const GeneratorMatrix& generator, int start_index, RngStream stream);

    void extend_to(double t);
    ChainPath snapshot(double horizon) const;
    int state_at_frontier() const { return current_state_; }

private:
    void draw_next_jump();

    const GeneratorMatrix generator_;
    RngStream stream_;
    std::vector<double> jump_times_;
    std::vector<int> state_indices_;
    int current_state_;
    double next_jump_time_;
    int next_state_;
};

// Exact simulation over [0, horizon]. Deterministic given the stream: same
// (seed, id) reproduces the path bit for bit. Works for any validated
// generator, tridiagonal or not.
ChainPath simulate_chain(const GeneratorMatrix& generator, int start_index, double horizon,
                         RngStream stream);

struct CoupledChainPaths {
    ChainPath lower;
    ChainPath upper;
    double meet_time = 0.0;  // +infinity if the paths never met before horizon
};

// Simulates the coupled pair from (start_lower, start_upper) under the
// coupling generator and splits it into marginal paths. Requires
// start_lower <= start_upper (StartOrderViolated otherwise); equal starts are
// glued from time zero, meet_time = 0.
CoupledChainPaths simulate_coupled(const SkipFreeChainModel& model, int start_lower,
                                   int start_upper, double horizon, RngStream stream);

}  // namespace volstop
