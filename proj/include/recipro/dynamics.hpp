#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "recipro/errors.hpp"
#include "recipro/linalg.hpp"
#include "recipro/reciprocity.hpp"
#include "recipro/schedule.hpp"

namespace recipro {

/// Sampled scalar-consensus trajectory. Samples land at least on every piece
/// breakpoint, so the values between samples follow a single closed-form flow.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;

    int agents() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }
    double t_begin() const { return times.front(); }
    double t_end() const { return times.back(); }
};

/// Row-stochastic map phi with x(t_to) = phi * x(t_from). Entries in
/// [-1e-10, 0) are clamped to zero at construction; anything below that floor
/// or a row sum off by more than 1e-8 is treated as a numerical fault.
struct TransitionMatrix {
    double t_from = 0.0;
    double t_to = 0.0;
    Mat phi;

    static constexpr double kNegativeFloor = -1e-10;
    static constexpr double kRowSumTol = 1e-8;

    static TransitionMatrix checked(double t_from, double t_to, Mat phi) {
        const int n = phi.rows();
        for (int i = 0; i < n; ++i) {
            double row = 0.0;
            for (int j = 0; j < n; ++j) {
                double& e = phi(i, j);
                if (e < 0.0) {
                    if (e < kNegativeFloor)
                        throw NumericalFaultError("transition matrix entry below -1e-10");
                    e = 0.0;
                }
                row += e;
            }
            if (std::abs(row - 1.0) > kRowSumTol)
                throw NumericalFaultError("transition matrix row sum off by more than 1e-8");
        }
        return TransitionMatrix{t_from, t_to, std::move(phi)};
    }
};

struct PropagateOptions {
    double tol = 1e-12; ///< relative accuracy of each per-piece exponential
    double max_sample_spacing = std::numeric_limits<double>::infinity();
};

namespace detail {

inline Mat laplacian(const Mat& rates) {
    const int n = rates.rows();
    Mat l(n, n);
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            row += rates(i, j);
            l(i, j) = -rates(i, j);
        }
        l(i, i) = row;
    }
    return l;
}

/// exp(-L * h) for the piece rates: the exact flow over a constant span.
inline Mat piece_flow(const Mat& rates, double h, double tol) {
    Mat neg_lh = laplacian(rates);
    neg_lh *= -h;
    return expm(neg_lh, tol);
}

} // namespace detail

/// Advances the integral consensus dynamics from x0 at t0 to t1, piece by
/// piece via the exact linear flow. Samples are emitted at t0, every piece
/// breakpoint, t1, and densely enough to honor max_sample_spacing.
inline Trajectory propagate(const WeightSchedule& schedule, const Vec& x0, double t0, double t1,
                            const PropagateOptions& options = {}) {
    const int n = schedule.agent_count();
    if (static_cast<int>(x0.size()) != n) throw OutOfRangeError("propagate: x0 has wrong size");
    if (!(options.tol > 0.0)) throw OutOfRangeError("propagate: tol must be > 0");
    if (!(t0 <= t1) || t0 < 0.0 || t1 > schedule.horizon())
        throw OutOfRangeError("propagate: [t0, t1] outside covered range");
    for (double v : x0)
        if (!std::isfinite(v)) throw NonFiniteError("propagate: x0 not finite");

    Trajectory traj;
    traj.times.push_back(t0);
    traj.states.push_back(x0);
    if (t0 == t1) return traj;

    Vec x = x0;
    for (const auto& piece : schedule.pieces()) {
        if (piece.t_end <= t0) continue;
        if (piece.t_begin >= t1) break;
        const double seg_begin = std::max(piece.t_begin, t0);
        const double seg_end = std::min(piece.t_end, t1);
        const double len = seg_end - seg_begin;
        if (!(len > 0.0)) continue;

        int substeps = 1;
        if (options.max_sample_spacing < len)
            substeps = static_cast<int>(std::ceil(len / options.max_sample_spacing));
        const double h = len / substeps;
        const Mat flow = detail::piece_flow(piece.rates, h, options.tol);
        for (int s = 1; s <= substeps; ++s) {
            x = flow * x;
            const double t = (s == substeps) ? seg_end : seg_begin + h * s;
            for (double v : x)
                if (!std::isfinite(v))
                    throw NonFiniteError("propagate: state lost finiteness (malformed schedule?)");
            traj.times.push_back(t);
            traj.states.push_back(x);
        }
    }
    return traj;
}

/// Fundamental matrix of the dynamics over [t_from, t_to]: the ordered
/// product of the per-piece exponentials. Column j equals the propagation of
/// the j-th unit vector.
inline TransitionMatrix transition_matrix(const WeightSchedule& schedule, double t_from,
                                          double t_to, double tol = 1e-12) {
    const int n = schedule.agent_count();
    if (!(t_from <= t_to) || t_from < 0.0 || t_to > schedule.horizon())
        throw OutOfRangeError("transition_matrix: [t_from, t_to] outside covered range");
    Mat phi = Mat::identity(n);
    for (const auto& piece : schedule.pieces()) {
        if (piece.t_end <= t_from) continue;
        if (piece.t_begin >= t_to) break;
        const double len = std::min(piece.t_end, t_to) - std::max(piece.t_begin, t_from);
        if (!(len > 0.0)) continue;
        phi = detail::piece_flow(piece.rates, len, tol) * phi;
    }
    return TransitionMatrix::checked(t_from, t_to, std::move(phi));
}

/// Verdict of the two-sided sampled-cut bound on one partition interval:
/// G * cutA <= cutPhi <= n * cutA with G = exp(-2nM)/n, where M is the
/// certified interval mass bound of the partition.
struct PhiBoundsReport {
    bool lower_ok = false;
    bool upper_ok = false;
    double cut_phi = 0.0;
    double cut_a = 0.0;
    double g_const = 0.0;
    double lower_bound = 0.0; ///< G * cutA
    double upper_bound = 0.0; ///< n * cutA

    bool both_ok() const { return lower_ok && upper_ok; }
};

inline PhiBoundsReport check_phi_bounds(const WeightSchedule& schedule,
                                        const IntervalPartition& partition,
                                        const std::vector<int>& subset, int p,
                                        double tol = 1e-9) {
    if (!partition.M)
        throw PartitionNotCertifiedError("check_phi_bounds: partition mass bound M not certified");
    if (p < 0 || p >= partition.interval_count())
        throw OutOfRangeError("check_phi_bounds: interval index out of range");
    const int n = schedule.agent_count();
    if (subset.empty() || static_cast<int>(subset.size()) >= n)
        throw OutOfRangeError("check_phi_bounds: subset must be non-empty and proper");
    std::vector<bool> in_s(static_cast<std::size_t>(n), false);
    for (int i : subset) {
        if (i < 0 || i >= n || in_s[static_cast<std::size_t>(i)])
            throw OutOfRangeError("check_phi_bounds: bad subset");
        in_s[static_cast<std::size_t>(i)] = true;
    }

    const double ta = partition.times[static_cast<std::size_t>(p)];
    const double tb = partition.times[static_cast<std::size_t>(p) + 1];
    const Mat phi = transition_matrix(schedule, ta, tb).phi;
    const Mat w = schedule.integral_matrix(ta, tb);

    PhiBoundsReport report;
    for (int i = 0; i < n; ++i) {
        if (!in_s[static_cast<std::size_t>(i)]) continue;
        for (int j = 0; j < n; ++j) {
            if (in_s[static_cast<std::size_t>(j)]) continue;
            report.cut_phi += phi(i, j);
            report.cut_a += w(i, j);
        }
    }
    report.g_const = std::exp(-2.0 * n * *partition.M) / n;
    report.lower_bound = report.g_const * report.cut_a;
    report.upper_bound = n * report.cut_a;
    report.lower_ok = report.lower_bound <= report.cut_phi + tol;
    report.upper_ok = report.cut_phi <= report.upper_bound + tol;
    return report;
}

/// Average drift over [t0, t1] plus whether the schedule is symmetric there
/// (symmetry forces exact conservation of the mean).
struct AverageReport {
    bool is_symmetric = true;
    double drift = 0.0;
};

inline AverageReport conserved_average(const WeightSchedule& schedule, const Vec& x0, double t0,
                                       double t1) {
    AverageReport report;
    const int n = schedule.agent_count();
    for (const auto& piece : schedule.pieces()) {
        if (piece.t_end <= t0 || piece.t_begin >= t1) continue;
        for (int i = 0; i < n && report.is_symmetric; ++i)
            for (int j = i + 1; j < n; ++j)
                if (piece.rates(i, j) != piece.rates(j, i)) {
                    report.is_symmetric = false;
                    break;
                }
        if (!report.is_symmetric) break;
    }
    const Trajectory traj = propagate(schedule, x0, t0, t1);
    double mean0 = 0.0, mean1 = 0.0;
    for (int i = 0; i < n; ++i) {
        mean0 += traj.states.front()[static_cast<std::size_t>(i)];
        mean1 += traj.states.back()[static_cast<std::size_t>(i)];
    }
    report.drift = std::abs(mean1 - mean0) / n;
    return report;
}

} // namespace recipro
