#include "volstop/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace volstop {

namespace {
constexpr double kRowSumSlack = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

VolStates::VolStates(std::vector<double> levels) : levels_(std::move(levels)) {
    if (levels_.empty()) throw Error(ErrorCode::EmptyStates, "state list is empty");
    for (std::size_t i = 0; i < levels_.size(); ++i) {
        if (!(levels_[i] > 0.0))
            throw Error(ErrorCode::BadParameter,
                        "state level " + std::to_string(i + 1) + " is not positive");
        if (i > 0 && !(levels_[i] > levels_[i - 1]))
            throw Error(ErrorCode::BadParameter,
                        "state levels must be strictly increasing (position " +
                            std::to_string(i + 1) + ")");
    }
}

GeneratorMatrix::GeneratorMatrix(std::size_t n, std::vector<double> row_major)
    : n_(n), rates_(std::move(row_major)) {
    if (n_ == 0) throw Error(ErrorCode::EmptyStates, "generator has no states");
    if (rates_.size() != n_ * n_)
        throw Error(ErrorCode::BadGenerator,
                    "expected " + std::to_string(n_ * n_) + " entries, got " +
                        std::to_string(rates_.size()));
    for (std::size_t i = 0; i < n_; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            double r = rates_[i * n_ + j];
            if (!std::isfinite(r))
                throw Error(ErrorCode::BadGenerator, "non-finite rate", static_cast<long>(i),
                            static_cast<long>(j));
            if (i != j && r < 0.0)
                throw Error(ErrorCode::BadGenerator, "negative off-diagonal rate",
                            static_cast<long>(i), static_cast<long>(j));
            row_sum += r;
        }
        if (std::abs(row_sum) > kRowSumSlack)
            throw Error(ErrorCode::BadGenerator,
                        "row " + std::to_string(i + 1) + " sums to " + std::to_string(row_sum));
    }
}

bool is_tridiagonal(const GeneratorMatrix& q) {
    std::size_t n = q.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if ((i > j ? i - j : j - i) > 1 && q(i, j) != 0.0) return false;
    return true;
}

ChainModel make_chain_model(VolStates states, GeneratorMatrix generator) {
    if (generator.size() != states.size())
        throw Error(ErrorCode::BadGenerator,
                    "generator is " + std::to_string(generator.size()) + "x" +
                        std::to_string(generator.size()) + " but there are " +
                        std::to_string(states.size()) + " states");
    return ChainModel{std::move(states), std::move(generator)};
}

SkipFreeChainModel validate_skip_free(const VolStates& states, const GeneratorMatrix& q) {
    if (q.size() != states.size())
        throw Error(ErrorCode::BadGenerator,
                    "generator is " + std::to_string(q.size()) + "x" + std::to_string(q.size()) +
                        " but there are " + std::to_string(states.size()) + " states");
    std::size_t n = q.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if ((i > j ? i - j : j - i) > 1 && q(i, j) != 0.0)
                throw Error(ErrorCode::NotTridiagonal,
                            "rate q[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) +
                                "] = " + std::to_string(q(i, j)) +
                                " skips a level; skip-free chains move one level at a time",
                            static_cast<long>(i), static_cast<long>(j));
        }
    }
    return SkipFreeChainModel{states, q};
}

GeneratorMatrix time_scaled_generator(const SkipFreeChainModel& model) {
    std::size_t n = model.generator.size();
    std::vector<double> scaled(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        double w = 1.0 / (model.states[i] * model.states[i]);
        double off = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            scaled[i * n + j] = w * model.generator(i, j);
            off += scaled[i * n + j];
        }
        // Diagonal recomputed from the scaled off-diagonals: scaling an
        // already-rounded diagonal would amplify the row-sum slack by w.
        scaled[i * n + i] = -off;
    }
    return GeneratorMatrix(n, std::move(scaled));
}

GeneratorMatrix coupling_generator(const SkipFreeChainModel& model) {
    if (!is_tridiagonal(model.generator))
        throw Error(ErrorCode::NotSkipFree, "coupling requires a skip-free generator");
    GeneratorMatrix scaled = time_scaled_generator(model);
    std::size_t m = scaled.size();
    std::size_t n = m * m;
    std::vector<double> rates(n * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < m; ++k) {
            std::size_t row = pair_index(i, k, m);
            if (i == k) {
                // Glued rows: both coordinates jump together with the
                // time-scaled single-chain rates. Restricted to the
                // diagonal this reproduces that chain exactly.
                for (std::size_t j = 0; j < m; ++j)
                    rates[row * n + pair_index(j, j, m)] = scaled(i, j);
            } else {
                // Independence coupling: one coordinate moves at a time.
                double total = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    if (j == i) continue;
                    rates[row * n + pair_index(j, k, m)] = scaled(i, j);
                    total += scaled(i, j);
                }
                for (std::size_t l = 0; l < m; ++l) {
                    if (l == k) continue;
                    rates[row * n + pair_index(i, l, m)] = scaled(k, l);
                    total += scaled(k, l);
                }
                rates[row * n + row] = -total;
            }
        }
    }
    return GeneratorMatrix(n, std::move(rates));
}

int ChainPath::state_index_at(double t) const { return state_indices[segment_at(t)]; }

std::size_t ChainPath::segment_at(double t) const {
    if (t < 0.0 || t > horizon)
        throw Error(ErrorCode::HorizonExceeded,
                    "t = " + std::to_string(t) + " outside [0, " + std::to_string(horizon) + "]");
    // upper_bound yields the first jump strictly after t; the segment in force
    // at t starts one before it.
    auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    return static_cast<std::size_t>(it - jump_times.begin()) - 1;
}

ChainPathBuilder::ChainPathBuilder(const GeneratorMatrix& generator, int start_index,
                                   RngStream stream)
    : generator_(generator), stream_(stream), current_state_(start_index) {
    if (start_index < 0 || static_cast<std::size_t>(start_index) >= generator.size())
        throw Error(ErrorCode::BadParameter,
                    "start index " + std::to_string(start_index) + " out of range");
    jump_times_.push_back(0.0);
    state_indices_.push_back(start_index);
    next_jump_time_ = 0.0;
    draw_next_jump();
}

void ChainPathBuilder::draw_next_jump() {
    std::size_t i = static_cast<std::size_t>(current_state_);
    double rate = generator_.exit_rate(i);
    if (rate <= kRowSumSlack) {
        // Absorbing: constant tail, no randomness consumed.
        next_jump_time_ = kInf;
        next_state_ = current_state_;
        return;
    }
    next_jump_time_ += stream_.exponential(rate);
    // Destination by inversion over the off-diagonal rates. One uniform is
    // consumed per jump regardless of how many targets the row has.
    double u = stream_.uniform() * rate;
    double acc = 0.0;
    std::size_t n = generator_.size();
    std::size_t dest = i;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        acc += generator_(i, j);
        if (u <= acc) {
            dest = j;
            break;
        }
    }
    if (dest == i) {
        // Rounding pushed u past the accumulated mass; take the last target.
        for (std::size_t j = n; j-- > 0;) {
            if (j != i && generator_(i, j) > 0.0) {
                dest = j;
                break;
            }
        }
    }
    next_state_ = static_cast<int>(dest);
}

void ChainPathBuilder::extend_to(double t) {
    while (next_jump_time_ <= t) {
        jump_times_.push_back(next_jump_time_);
        state_indices_.push_back(next_state_);
        current_state_ = next_state_;
        draw_next_jump();
    }
}

ChainPath ChainPathBuilder::snapshot(double horizon) const {
    ChainPath path;
    // Keep every jump up to the horizon; the builder may have drawn further.
    std::size_t keep = jump_times_.size();
    while (keep > 1 && jump_times_[keep - 1] > horizon) --keep;
    path.jump_times.assign(jump_times_.begin(), jump_times_.begin() + keep);
    path.state_indices.assign(state_indices_.begin(), state_indices_.begin() + keep);
    path.horizon = horizon;
    return path;
}

ChainPath simulate_chain(const GeneratorMatrix& generator, int start_index, double horizon,
                         RngStream stream) {
    if (!(horizon >= 0.0) || !std::isfinite(horizon))
        throw Error(ErrorCode::BadParameter, "horizon must be finite and nonnegative");
    ChainPathBuilder builder(generator, start_index, stream);
    builder.extend_to(horizon);
    return builder.snapshot(horizon);
}

CoupledChainPaths simulate_coupled(const SkipFreeChainModel& model, int start_lower,
                                   int start_upper, double horizon, RngStream stream) {
    if (start_lower > start_upper)
        throw Error(ErrorCode::StartOrderViolated,
                    "start_lower = " + std::to_string(start_lower) + " exceeds start_upper = " +
                        std::to_string(start_upper));
    std::size_t m = model.states.size();
    if (start_lower < 0 || static_cast<std::size_t>(start_upper) >= m)
        throw Error(ErrorCode::BadParameter, "start index out of range");

    GeneratorMatrix coupled = coupling_generator(model);
    ChainPath product = simulate_chain(
        coupled, static_cast<int>(pair_index(static_cast<std::size_t>(start_lower),
                                             static_cast<std::size_t>(start_upper), m)),
        horizon, stream);

    CoupledChainPaths out;
    out.meet_time = (start_lower == start_upper) ? 0.0 : kInf;
    out.lower.horizon = horizon;
    out.upper.horizon = horizon;
    int prev_lo = -1, prev_hi = -1;
    for (std::size_t s = 0; s < product.jump_times.size(); ++s) {
        std::size_t p = static_cast<std::size_t>(product.state_indices[s]);
        int lo = static_cast<int>(pair_lower(p, m));
        int hi = static_cast<int>(pair_upper(p, m));
        double t = product.jump_times[s];
        if (lo == hi && !(out.meet_time <= t)) out.meet_time = t;
        // Record marginal jumps only when that coordinate actually moved.
        if (lo != prev_lo) {
            out.lower.jump_times.push_back(t);
            out.lower.state_indices.push_back(lo);
            prev_lo = lo;
        }
        if (hi != prev_hi) {
            out.upper.jump_times.push_back(t);
            out.upper.state_indices.push_back(hi);
            prev_hi = hi;
        }
    }
    return out;
}

}  // namespace volstop
