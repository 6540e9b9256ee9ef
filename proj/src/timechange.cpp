#include "volstop/timechange.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace volstop {

TimeChangePath::TimeChangePath(TimeChangeKind kind, std::vector<double> t,
                               std::vector<double> gamma, std::vector<double> slope)
    : kind_(kind), t_(std::move(t)), gamma_(std::move(gamma)), slope_(std::move(slope)) {
    if (t_.size() < 2 || gamma_.size() != t_.size() || slope_.size() + 1 != t_.size())
        throw Error(ErrorCode::BadParameter, "inconsistent time-change table");
    for (std::size_t k = 0; k + 1 < t_.size(); ++k) {
        if (!(t_[k + 1] > t_[k]))
            throw Error(ErrorCode::BadParameter, "breakpoints not strictly increasing");
        if (!(slope_[k] > 0.0))
            throw Error(ErrorCode::BadParameter, "nonpositive clock slope");
    }
}

std::size_t TimeChangePath::segment_of_t(double t) const {
    if (!(t >= t_.front()) || !(t <= t_.back()))
        throw Error(ErrorCode::HorizonExceeded,
                    "t = " + std::to_string(t) + " outside [" + std::to_string(t_.front()) +
                        ", " + std::to_string(t_.back()) + "]");
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    std::size_t k = static_cast<std::size_t>(it - t_.begin());
    return (k == t_.size()) ? k - 2 : k - 1;
}

std::size_t TimeChangePath::segment_of_gamma(double s) const {
    if (!(s >= gamma_.front()) || !(s <= gamma_.back()))
        throw Error(ErrorCode::RangeExceeded,
                    "s = " + std::to_string(s) + " outside [" + std::to_string(gamma_.front()) +
                        ", " + std::to_string(gamma_.back()) + "]");
    auto it = std::upper_bound(gamma_.begin(), gamma_.end(), s);
    std::size_t k = static_cast<std::size_t>(it - gamma_.begin());
    return (k == gamma_.size()) ? k - 2 : k - 1;
}

double TimeChangePath::gamma_at(double t) const {
    std::size_t k = segment_of_t(t);
    if (t == t_[k]) return gamma_[k];  // node values are exact by construction
    if (t == t_[k + 1]) return gamma_[k + 1];  // right endpoint of the final segment
    return gamma_[k] + (t - t_[k]) * slope_[k];
}

double TimeChangePath::inverse(double s) const {
    std::size_t k = segment_of_gamma(s);
    if (s == gamma_[k]) return t_[k];
    if (s == gamma_[k + 1]) return t_[k + 1];
    return t_[k] + (s - gamma_[k]) / slope_[k];
}

TimeChangePath gamma_from_chain(const ChainPath& path, const VolStates& states) {
    if (!std::isfinite(path.horizon))
        throw Error(ErrorCode::HorizonExceeded, "chain path has no finite horizon");
    if (path.jump_times.empty() || path.jump_times.front() != 0.0)
        throw Error(ErrorCode::BadParameter, "chain path must start at t = 0");

    std::vector<double> t, gamma, slope;
    t.reserve(path.jump_times.size() + 1);
    slope.reserve(path.jump_times.size());
    for (std::size_t k = 0; k < path.jump_times.size(); ++k) {
        double tk = path.jump_times[k];
        if (tk >= path.horizon) break;
        int idx = path.state_indices[k];
        if (idx < 0 || static_cast<std::size_t>(idx) >= states.size())
            throw Error(ErrorCode::BadParameter, "state index outside the state list");
        double y = states[static_cast<std::size_t>(idx)];
        t.push_back(tk);
        slope.push_back(1.0 / (y * y));
    }
    t.push_back(path.horizon);
    gamma.resize(t.size());
    gamma[0] = 0.0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k)
        gamma[k + 1] = gamma[k] + (t[k + 1] - t[k]) * slope[k];
    return TimeChangePath(TimeChangeKind::ExactPiecewise, std::move(t), std::move(gamma),
                          std::move(slope));
}

TimeChangePath gamma_from_samples(std::span<const double> xi, double dt) {
    if (xi.size() < 2) throw Error(ErrorCode::BadParameter, "need at least two samples");
    if (!(dt > 0.0)) throw Error(ErrorCode::BadParameter, "dt must be positive");
    std::size_t n = xi.size();
    std::vector<double> t(n), gamma(n), slope(n - 1);
    double prev = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (!(xi[k] > 0.0))
            throw Error(ErrorCode::NonpositiveSample,
                        "xi[" + std::to_string(k) + "] = " + std::to_string(xi[k]),
                        static_cast<long>(k), -1);
        t[k] = static_cast<double>(k) * dt;
        double f = 1.0 / (xi[k] * xi[k]);
        if (k > 0) {
            // Trapezoid: a segment's slope is the average integrand at its
            // ends, and the node increment is dt * slope, so interpolated
            // evaluation agrees with the cumulative rule.
            slope[k - 1] = 0.5 * (prev + f);
            gamma[k] = gamma[k - 1] + dt * slope[k - 1];
        } else {
            gamma[0] = 0.0;
        }
        prev = f;
    }
    return TimeChangePath(TimeChangeKind::SampledGrid, std::move(t), std::move(gamma),
                          std::move(slope));
}

ComparisonReport compare(const TimeChangePath& lower, const TimeChangePath& upper,
                         std::span<const double> grid) {
    ComparisonReport report;
    for (double t : grid) {
        double g_lo = lower.gamma_at(t);
        double g_up = upper.gamma_at(t);
        ++report.n_checked;
        if (g_lo < g_up) {
            ++report.violations;
            double gap = g_up - g_lo;
            if (gap > report.max_violation) {
                report.max_violation = gap;
                report.t_worst = t;
            }
        }
    }
    return report;
}

std::vector<double> comparison_grid(const TimeChangePath& a, const TimeChangePath& b) {
    double h = std::min(a.horizon(), b.horizon());
    std::vector<double> grid;
    grid.reserve(a.breakpoints().size() + b.breakpoints().size());
    for (double t : a.breakpoints())
        if (t <= h) grid.push_back(t);
    for (double t : b.breakpoints())
        if (t <= h) grid.push_back(t);
    grid.push_back(h);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

}  // namespace volstop
