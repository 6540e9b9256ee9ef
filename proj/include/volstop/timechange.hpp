#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "volstop/chain.hpp"
#include "volstop/errors.hpp"

namespace volstop {

enum class TimeChangeKind { ExactPiecewise, SampledGrid };

// Strictly increasing piecewise-linear clock Gamma with inverse A.
//
// Nodes (t_k, gamma_k) plus a positive slope per segment. For chain paths the
// slopes are exactly y^{-2} and the representation is exact; for sampled
// diffusion paths the nodes come from trapezoidal integration of xi^{-2} and
// segments interpolate linearly. Evaluation at a node returns the stored node
// value; inside a segment both gamma_at and inverse are single multiply-adds,
// so the round trip A(Gamma(t)) = t holds to a few ulps (property (P1)), and
// monotonicity gives the level-set equivalence s < Gamma(t) iff A(s) < t
// (property (P2)). No extrapolation: beyond the last node gamma_at throws
// HorizonExceeded and inverse throws RangeExceeded.
class TimeChangePath {
public:
    TimeChangePath(TimeChangeKind kind, std::vector<double> t, std::vector<double> gamma,
                   std::vector<double> slope);

    double gamma_at(double t) const;
    double inverse(double s) const;

    double horizon() const { return t_.back(); }
    double gamma_max() const { return gamma_.back(); }
    TimeChangeKind kind() const { return kind_; }

    const std::vector<double>& breakpoints() const { return t_; }
    const std::vector<double>& gamma_nodes() const { return gamma_; }
    const std::vector<double>& slopes() const { return slope_; }

private:
    std::size_t segment_of_t(double t) const;
    std::size_t segment_of_gamma(double s) const;

    TimeChangeKind kind_;
    std::vector<double> t_;
    std::vector<double> gamma_;
    std::vector<double> slope_;
};

// Gamma_t = integral of Z_s^{-2} from the exact jump structure of a chain
// path: one segment per holding interval, slope y_i^{-2}. Requires a finite
// path horizon.
TimeChangePath gamma_from_chain(const ChainPath& path, const VolStates& states);

// Trapezoidal Gamma from xi sampled on a uniform grid of step dt
// (xi[k] = xi(k*dt)). Throws NonpositiveSample if any sample is <= 0.
// Second-order accurate: halving dt reduces the error by ~4x.
TimeChangePath gamma_from_samples(std::span<const double> xi, double dt);

struct ComparisonReport {
    std::size_t n_checked = 0;
    std::size_t violations = 0;   // grid points where Gamma_lower < Gamma_upper
    double max_violation = 0.0;   // largest Gamma_upper - Gamma_lower observed
    double t_worst = 0.0;
    bool lower_dominates() const { return violations == 0; }
};

// Checks Gamma_lower(t) >= Gamma_upper(t) on the given grid, where "lower"
// belongs to the pathwise-smaller volatility. Comparisons are exact floating
// point; violations are data to report, no tolerance is applied.
ComparisonReport compare(const TimeChangePath& lower, const TimeChangePath& upper,
                         std::span<const double> grid);

// Union of both paths' breakpoints clipped to the common horizon; for
// piecewise-linear clocks, dominance on this grid is dominance everywhere.
std::vector<double> comparison_grid(const TimeChangePath& a, const TimeChangePath& b);

}  // namespace volstop
