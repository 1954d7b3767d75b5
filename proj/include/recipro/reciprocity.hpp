#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>
#include <utility>
#include <vector>

#include "recipro/errors.hpp"
#include "recipro/schedule.hpp"

namespace recipro {

/// Contiguous sampling times t_0 = 0 < t_1 < ... together with whatever
/// constants have been certified on them so far.
struct IntervalPartition {
    std::vector<double> times;
    std::optional<double> K;  ///< certified cut-balance ratio
    std::optional<double> M;  ///< certified per-interval mass bound
    std::optional<double> M1; ///< window-builder constants, set by build_partition
    std::optional<double> M2;
    std::vector<bool> condition_a_certified; ///< per interval

    static IntervalPartition from_times(std::vector<double> ts) {
        IntervalPartition p;
        p.times = std::move(ts);
        p.validate();
        p.condition_a_certified.assign(p.times.size() - 1, false);
        return p;
    }

    static IntervalPartition uniform(double horizon, double dt) {
        std::vector<double> ts;
        for (double t = 0.0; t < horizon; t += dt) ts.push_back(t);
        ts.push_back(horizon);
        return from_times(std::move(ts));
    }

    int interval_count() const { return static_cast<int>(times.size()) - 1; }

    void validate() const {
        if (times.size() < 2) throw InvalidScheduleError("partition needs at least two times");
        if (times.front() != 0.0) throw InvalidScheduleError("partition must start at t = 0");
        for (std::size_t k = 1; k < times.size(); ++k)
            if (!(times[k] > times[k - 1]))
                throw InvalidScheduleError("partition times must be strictly increasing");
    }
};

struct CutBalanceResult {
    bool feasible = true;
    double K = 1.0;                ///< smallest valid ratio >= 1 (when feasible)
    std::vector<int> worst_subset; ///< subset realizing the ratio / infeasibility
    int worst_interval = -1;
};

struct MassBoundResult {
    double M = 0.0;
    int worst_i = -1; ///< directed weight a_ij realizing the bound
    int worst_j = -1;
    int worst_interval = -1;
};

/// Assumption-3 verdict for one unordered pair over the scanned horizon.
struct PairActivityReport {
    int i = 0;
    int j = 0;
    double epsilon = 0.0;
    double T = 0.0;
    std::vector<double> violations; ///< representative times, one per violating span
    std::vector<std::pair<double, double>> violation_spans;

    bool clean() const { return violations.empty(); }
};

struct PartitionBuildStats {
    std::vector<int> case2_fires; ///< per accepted interval
    std::vector<int> case3_fires;
};

// ---------------------------------------------------------------------------
// Activity window machinery.
//
// For piecewise-constant rates every window integral is piecewise linear in
// the window start, so searches over windows are exact once evaluated on the
// grid of slope changes plus the crossing points of the two directed
// integrals.
// ---------------------------------------------------------------------------

namespace detail {

using Spans = std::vector<std::pair<double, double>>; // sorted, disjoint

/// Degenerate spans (a == b) are kept: a single qualifying window start still
/// covers a full window once expanded by +T.
inline void append_span(Spans& spans, double a, double b) {
    if (b < a) return;
    if (!spans.empty() && a <= spans.back().second + 1e-15 * std::max(1.0, std::abs(a)))
        spans.back().second = std::max(spans.back().second, b);
    else
        spans.emplace_back(a, b);
}

/// set difference a \ b for sorted disjoint spans
inline Spans subtract_spans(const Spans& a, const Spans& b) {
    Spans out;
    std::size_t bi = 0;
    for (auto [lo, hi] : a) {
        double cursor = lo;
        while (bi < b.size() && b[bi].second < cursor) ++bi;
        std::size_t k = bi;
        while (k < b.size() && b[k].first < hi) {
            if (b[k].first > cursor) append_span(out, cursor, b[k].first);
            cursor = std::max(cursor, b[k].second);
            ++k;
        }
        if (cursor < hi) append_span(out, cursor, hi);
    }
    return out;
}

/// Cumulative integral of one directed weight, clipped to [0, horizon].
struct EdgePrefix {
    std::vector<double> ts;  // piece boundaries, ts.front() = 0
    std::vector<double> cum; // cumulative integral at ts
    std::vector<double> rate;

    double at(double u) const {
        if (u <= ts.front()) return 0.0;
        if (u >= ts.back()) return cum.back();
        const auto it = std::upper_bound(ts.begin(), ts.end(), u);
        const std::size_t k = static_cast<std::size_t>(it - ts.begin()) - 1;
        return cum[k] + rate[k] * (u - ts[k]);
    }
};

inline EdgePrefix make_prefix(const WeightSchedule& schedule, int i, int j) {
    EdgePrefix p;
    const auto& pieces = schedule.pieces();
    p.ts.reserve(pieces.size() + 1);
    p.cum.reserve(pieces.size() + 1);
    p.rate.reserve(pieces.size());
    double acc = 0.0;
    for (const auto& piece : pieces) {
        p.ts.push_back(piece.t_begin);
        p.cum.push_back(acc);
        p.rate.push_back(piece.rates(i, j));
        acc += piece.rates(i, j) * (piece.t_end - piece.t_begin);
    }
    p.ts.push_back(pieces.back().t_end);
    p.cum.push_back(acc);
    return p;
}

/// Window starts u in [u_lo, u_hi] for which both directed integrals over
/// [u, u+T] reach eps. Exact for piecewise-constant schedules: both window
/// integrals are piecewise linear with slope changes on the candidate grid,
/// and the min of the two is handled by splitting at their crossings.
inline Spans qualifying_window_starts(const WeightSchedule& schedule, const EdgePrefix& fwd,
                                      const EdgePrefix& rev, double T, double eps, double u_lo,
                                      double u_hi) {
    std::vector<double> grid;
    grid.push_back(u_lo);
    grid.push_back(u_hi);
    for (double b : schedule.breakpoints()) {
        if (b > u_lo && b < u_hi) grid.push_back(b);
        const double shifted = b - T;
        if (shifted > u_lo && shifted < u_hi) grid.push_back(shifted);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    auto w_fwd = [&](double u) { return fwd.at(u + T) - fwd.at(u); };
    auto w_rev = [&](double u) { return rev.at(u + T) - rev.at(u); };

    Spans q;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double u0 = grid[k], u1 = grid[k + 1];
        const double f0 = w_fwd(u0), f1 = w_fwd(u1);
        const double r0 = w_rev(u0), r1 = w_rev(u1);

        // split where the two linear integrals cross
        std::vector<double> nodes{u0, u1};
        const double d0 = f0 - r0, d1 = f1 - r1;
        if ((d0 > 0.0 && d1 < 0.0) || (d0 < 0.0 && d1 > 0.0)) {
            const double cross = u0 + (u1 - u0) * (d0 / (d0 - d1));
            if (cross > u0 && cross < u1) nodes.insert(nodes.begin() + 1, cross);
        }
        for (std::size_t s = 0; s + 1 < nodes.size(); ++s) {
            const double a = nodes[s], b = nodes[s + 1];
            const double ga = std::min(w_fwd(a), w_rev(a));
            const double gb = std::min(w_fwd(b), w_rev(b));
            // g is linear on [a, b]; solve g >= eps
            if (ga >= eps && gb >= eps) {
                append_span(q, a, b);
            } else if (ga >= eps || gb >= eps) {
                const double root = a + (b - a) * ((eps - ga) / (gb - ga));
                if (ga >= eps)
                    append_span(q, a, std::min(std::max(root, a), b));
                else
                    append_span(q, std::min(std::max(root, a), b), b);
            }
        }
    }
    return q;
}

/// Support of the unordered pair on [0, hi]: spans where either direction is
/// positive.
inline Spans pair_support(const WeightSchedule& schedule, int i, int j, double hi) {
    Spans s;
    for (const auto& piece : schedule.pieces()) {
        if (piece.t_begin >= hi) break;
        if (piece.rates(i, j) > 0.0 || piece.rates(j, i) > 0.0)
            append_span(s, piece.t_begin, std::min(piece.t_end, hi));
    }
    return s;
}

} // namespace detail

// ---------------------------------------------------------------------------

/// True iff both directed integrals of the pair over [u, v] reach eps.
/// Mass outside the covered range counts as zero.
inline bool is_active(const WeightSchedule& schedule, int i, int j, double u, double v,
                      double eps) {
    if (!(u <= v)) throw OutOfRangeError("is_active: u must be <= v");
    return schedule.integral_weight_clipped(i, j, u, v) >= eps &&
           schedule.integral_weight_clipped(j, i, u, v) >= eps;
}

/// Pairwise-reciprocity check over [0, scan_horizon]: for every time at which
/// a pair interacts there must be a window of length <= T containing it on
/// which the pair is active. Windows are clipped to the materialized range,
/// so the certificate is with respect to the scanned horizon only.
inline std::vector<PairActivityReport> check_pairwise(const WeightSchedule& schedule, double eps,
                                                      double T, double scan_horizon) {
    if (!(eps > 0.0) || !(T > 0.0)) throw OutOfRangeError("check_pairwise: eps and T must be > 0");
    scan_horizon = std::min(scan_horizon, schedule.horizon());
    const int n = schedule.agent_count();
    std::vector<PairActivityReport> reports;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            PairActivityReport rep;
            rep.i = i;
            rep.j = j;
            rep.epsilon = eps;
            rep.T = T;
            const auto support = detail::pair_support(schedule, i, j, scan_horizon);
            if (!support.empty()) {
                const auto fwd = detail::make_prefix(schedule, i, j);
                const auto rev = detail::make_prefix(schedule, j, i);
                const auto q = detail::qualifying_window_starts(schedule, fwd, rev, T, eps, -T,
                                                                scan_horizon);
                detail::Spans ok;
                for (auto [a, b] : q) detail::append_span(ok, a, b + T);
                const auto bad = detail::subtract_spans(support, ok);
                for (auto [a, b] : bad) {
                    rep.violation_spans.emplace_back(a, b);
                    rep.violations.push_back(0.5 * (a + b));
                }
            }
            reports.push_back(std::move(rep));
        }
    }
    return reports;
}

/// Smallest K >= 1 with cut(S -> S^c) <= K * cut(S^c -> S) for every proper
/// subset and every partition interval; 0/0 cuts count as balanced. n is
/// capped at 16 by the exhaustive enumeration.
inline CutBalanceResult cut_balance_ratio(const WeightSchedule& schedule,
                                          const IntervalPartition& partition, int jobs = 1) {
    const int n = schedule.agent_count();
    if (n > 16) throw TooManyAgentsError("cut_balance_ratio: exhaustive enumeration capped at n = 16");
    partition.validate();
    if (partition.times.back() > schedule.horizon())
        throw OutOfRangeError("cut_balance_ratio: partition exceeds schedule horizon");

    const unsigned long mask_end = (1ul << n) - 1ul;
    CutBalanceResult result;
    auto subset_of = [n](unsigned long mask) {
        std::vector<int> s;
        for (int i = 0; i < n; ++i)
            if (mask & (1ul << i)) s.push_back(i);
        return s;
    };

    for (int p = 0; p < partition.interval_count(); ++p) {
        const Mat w = schedule.integral_matrix(partition.times[static_cast<std::size_t>(p)],
                                               partition.times[static_cast<std::size_t>(p) + 1]);

        auto scan = [&](unsigned long lo, unsigned long hi) {
            CutBalanceResult local;
            local.K = 0.0;
            for (unsigned long mask = lo; mask < hi; ++mask) {
                double forward = 0.0, reverse = 0.0;
                for (int i = 0; i < n; ++i) {
                    if (!(mask & (1ul << i))) continue;
                    for (int j = 0; j < n; ++j) {
                        if (mask & (1ul << j)) continue;
                        forward += w(i, j);
                        reverse += w(j, i);
                    }
                }
                if (forward > 0.0 && reverse == 0.0) {
                    local.feasible = false;
                    local.worst_subset = subset_of(mask);
                    return local;
                }
                const double ratio = forward > 0.0 ? forward / reverse : 1.0;
                if (ratio > local.K) {
                    local.K = ratio;
                    local.worst_subset = subset_of(mask);
                }
            }
            return local;
        };

        CutBalanceResult interval_best;
        interval_best.K = 0.0;
        if (jobs > 1 && mask_end > 1024) {
            std::vector<std::future<CutBalanceResult>> futures;
            const unsigned long chunk = (mask_end - 1) / static_cast<unsigned long>(jobs) + 1;
            for (unsigned long lo = 1; lo < mask_end; lo += chunk)
                futures.push_back(std::async(std::launch::async, scan, lo,
                                             std::min(lo + chunk, mask_end)));
            for (auto& f : futures) {
                const CutBalanceResult part = f.get();
                if (!part.feasible) {
                    interval_best = part;
                    break;
                }
                if (part.K > interval_best.K) interval_best = part;
            }
        } else {
            interval_best = scan(1, mask_end);
        }

        if (!interval_best.feasible) {
            interval_best.worst_interval = p;
            return interval_best;
        }
        if (interval_best.K > result.K || result.worst_interval < 0) {
            result.K = interval_best.K;
            result.worst_subset = interval_best.worst_subset;
            result.worst_interval = p;
        }
    }
    result.K = std::max(result.K, 1.0);
    return result;
}

/// Largest directed integral over any single partition interval.
inline MassBoundResult interval_mass_bound(const WeightSchedule& schedule,
                                           const IntervalPartition& partition) {
    partition.validate();
    if (partition.times.back() > schedule.horizon())
        throw OutOfRangeError("interval_mass_bound: partition exceeds schedule horizon");
    const int n = schedule.agent_count();
    MassBoundResult result;
    for (int p = 0; p < partition.interval_count(); ++p) {
        const Mat w = schedule.integral_matrix(partition.times[static_cast<std::size_t>(p)],
                                               partition.times[static_cast<std::size_t>(p) + 1]);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                if (w(i, j) > result.M) {
                    result.M = w(i, j);
                    result.worst_i = i;
                    result.worst_j = j;
                    result.worst_interval = p;
                }
            }
        }
    }
    return result;
}

/// Condition A on [u, v]: every pair either never interacts there (both
/// directions, exact on the piece table) or is active there.
inline bool verify_condition_A(const WeightSchedule& schedule, double u, double v, double eps) {
    if (!(u < v)) throw OutOfRangeError("verify_condition_A: u must be < v");
    const int n = schedule.agent_count();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (schedule.zero_on(i, j, u, v) && schedule.zero_on(j, i, u, v)) continue;
            if (!is_active(schedule, i, j, u, v, eps)) return false;
        }
    return true;
}

namespace detail {

inline bool condition_B(const WeightSchedule& schedule, double u, double eps, double T, double m1) {
    const int n = schedule.agent_count();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (schedule.zero_on(i, j, u, u + T) && schedule.zero_on(j, i, u, u + T)) continue;
            if (!is_active(schedule, i, j, u, u + m1, eps)) return false;
        }
    return true;
}

} // namespace detail

/// Constructs sampling times over [0, horizon] by the inductive window
/// algorithm: starting each step from t_k + M1, a candidate is accepted when
/// Condition A holds on [t_k, candidate] and Condition B holds at the
/// candidate; otherwise the candidate advances by T. The failure case
/// (candidate reaching t_k + M1 + M2 - T) is provably unreachable when the
/// pairwise check passes, so hitting it raises InternalCase0Error.
///
/// M2 = n(n-1)T + 1.5T (any strict margin over n(n-1)T + T works) and
/// M1 = M2 + T. The schedule must be materialized M1 + M2 past the target
/// horizon so every window evaluation is fully informed.
inline IntervalPartition build_partition(const WeightSchedule& schedule, double eps, double T,
                                         double horizon, PartitionBuildStats* stats = nullptr) {
    if (!(eps > 0.0) || !(T > 0.0)) throw OutOfRangeError("build_partition: eps and T must be > 0");
    const int n = schedule.agent_count();
    const double m2 = n * (n - 1) * T + 1.5 * T;
    const double m1 = m2 + T;
    const double lookahead = horizon + m1 + m2;
    if (schedule.horizon() < lookahead)
        throw OutOfRangeError("build_partition: schedule must cover horizon + M1 + M2 (materialize further)");

    const auto reports = check_pairwise(schedule, eps, T, lookahead);
    for (const auto& rep : reports)
        if (!rep.clean())
            throw AssumptionViolatedError("build_partition: pairwise reciprocity fails for pair (" +
                                          std::to_string(rep.i + 1) + "," + std::to_string(rep.j + 1) +
                                          ") near t = " + std::to_string(rep.violations.front()));

    IntervalPartition partition;
    partition.times.push_back(0.0);
    partition.M1 = m1;
    partition.M2 = m2;

    while (partition.times.back() + m1 <= horizon) {
        const double tk = partition.times.back();
        double t_bar = tk + m1;
        int case2 = 0, case3 = 0;
        for (;;) {
            if (t_bar >= tk + m1 + m2 - T)
                throw InternalCase0Error("build_partition: selection reached its failure case");
            const bool a_ok = verify_condition_A(schedule, tk, t_bar, eps);
            const bool b_ok = detail::condition_B(schedule, t_bar, eps, T, m1);
            if (a_ok && b_ok) break;
            t_bar += T;
            if (!a_ok)
                ++case2;
            else
                ++case3;
        }
        partition.times.push_back(t_bar);
        partition.condition_a_certified.push_back(true);
        if (stats) {
            stats->case2_fires.push_back(case2);
            stats->case3_fires.push_back(case3);
        }
    }
    if (partition.times.size() < 2) {
        // horizon shorter than one window step: close the partition at the horizon
        partition.times.push_back(horizon);
        partition.condition_a_certified.push_back(verify_condition_A(schedule, 0.0, horizon, eps));
    }
    return partition;
}

/// Proposes (eps, T) for a schedule by scanning it: T doubles from the finest
/// piece until every interacting pair closes its reciprocity gap, then eps is
/// pushed to just below the largest value that still passes everywhere.
struct EpsilonT {
    double epsilon = 1.0;
    double T = 1.0;
};

inline EpsilonT suggest_epsilon_T(const WeightSchedule& schedule, double scan_horizon) {
    scan_horizon = std::min(scan_horizon, schedule.horizon());
    const int n = schedule.agent_count();

    bool any_support = false;
    double shortest_piece = scan_horizon;
    double largest_mass = 0.0;
    for (const auto& piece : schedule.pieces()) {
        if (piece.t_begin >= scan_horizon) break;
        shortest_piece = std::min(shortest_piece, piece.t_end - piece.t_begin);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (piece.rates(i, j) > 0.0) {
                    any_support = true;
                    largest_mass = std::max(
                        largest_mass, piece.rates(i, j) * (piece.t_end - piece.t_begin));
                }
    }
    if (!any_support) return {1.0, 1.0};

    auto passes = [&](double eps, double T) {
        for (const auto& rep : check_pairwise(schedule, eps, T, scan_horizon))
            if (!rep.clean()) return false;
        return true;
    };

    const double eps_probe = largest_mass * 1e-12;
    double T = shortest_piece;
    while (T < 4.0 * scan_horizon && !passes(eps_probe, T)) T *= 2.0;

    double lo = eps_probe, hi = largest_mass * static_cast<double>(schedule.pieces().size());
    for (int it = 0; it < 70; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (passes(mid, T))
            lo = mid;
        else
            hi = mid;
    }
    double eps = lo * 0.999;
    while (!passes(eps, T) && eps > 1e-300) eps *= 0.5;
    return {eps, T};
}

} // namespace recipro
