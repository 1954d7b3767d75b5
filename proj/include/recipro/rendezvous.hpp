#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "recipro/errors.hpp"
#include "recipro/linalg.hpp"

namespace recipro {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(Vec2 o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    bool operator==(const Vec2&) const = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

/// Velocity saturation: full command below the speed limit, clamped to
/// magnitude mu along the same direction above it.
inline Vec2 saturate(Vec2 v, double mu) {
    const double sp = norm(v);
    return sp >= mu ? v * (mu / sp) : v;
}

namespace detail {

/// Deterministic uniform draws; the generator and the 53-bit mapping are both
/// fully specified, so identical seeds give identical scenarios everywhere.
class Uniform {
  public:
    explicit Uniform(std::uint64_t seed) : gen_(seed) {}

    double next(double lo, double hi) {
        const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }

  private:
    std::mt19937_64 gen_;
};

} // namespace detail

/// Planar intermittent-sensing rendezvous setup: n robots with speed cap mu,
/// a short-range sensing blind radius d0, an engagement radius d1 and
/// asynchronous activation times with gaps in [delta_min, delta_max].
struct RobotScenario {
    int n = 0;
    double mu = 0.0;
    double d0 = 0.0;
    double d1 = 0.0;
    double delta_min = 0.0;
    double delta_max = 0.0;
    std::vector<std::vector<double>> activations; ///< per robot, increasing
    std::vector<Vec2> x0;
    std::uint64_t seed = 0; ///< seed the activations/positions were drawn from
    bool feasibility_checked = true;

    static RobotScenario make(int n, double mu, double d0, double d1, double delta_min,
                              double delta_max, std::vector<Vec2> x0,
                              std::vector<std::vector<double>> activations,
                              std::uint64_t seed = 0) {
        RobotScenario s;
        s.n = n;
        s.mu = mu;
        s.d0 = d0;
        s.d1 = d1;
        s.delta_min = delta_min;
        s.delta_max = delta_max;
        s.x0 = std::move(x0);
        s.activations = std::move(activations);
        s.seed = seed;
        s.validate();
        return s;
    }

    /// Test rig: accepts scenarios violating the feasibility inequality.
    static RobotScenario make_unchecked(int n, double mu, double d0, double d1, double delta_min,
                                        double delta_max, std::vector<Vec2> x0,
                                        std::vector<std::vector<double>> activations,
                                        std::uint64_t seed = 0) {
        RobotScenario s;
        s.n = n;
        s.mu = mu;
        s.d0 = d0;
        s.d1 = d1;
        s.delta_min = delta_min;
        s.delta_max = delta_max;
        s.x0 = std::move(x0);
        s.activations = std::move(activations);
        s.seed = seed;
        s.feasibility_checked = false;
        return s;
    }

    /// Draws x0 uniformly in [0, box]^2 and activation sequences with first
    /// wake-up in [0, delta_max] and gaps uniform in [delta_min, delta_max],
    /// covering [0, horizon].
    static RobotScenario random(int n, double mu, double d0, double d1, double delta_min,
                                double delta_max, double box, double horizon, std::uint64_t seed) {
        detail::Uniform rng(seed);
        std::vector<Vec2> x0(static_cast<std::size_t>(n));
        for (auto& p : x0) {
            p.x = rng.next(0.0, box);
            p.y = rng.next(0.0, box);
        }
        std::vector<std::vector<double>> acts(static_cast<std::size_t>(n));
        for (auto& seq : acts) {
            double t = rng.next(0.0, delta_max);
            seq.push_back(t);
            while (t < horizon) {
                t += rng.next(delta_min, delta_max);
                seq.push_back(t);
            }
        }
        return make(n, mu, d0, d1, delta_min, delta_max, std::move(x0), std::move(acts), seed);
    }

    void validate() const {
        if (n < 2) throw InfeasibleScenarioError("scenario needs at least 2 robots");
        if (!(mu > 0.0)) throw InfeasibleScenarioError("mu must be > 0");
        if (!(d0 > 0.0) || !(d1 > d0)) throw InfeasibleScenarioError("need d1 > d0 > 0");
        if (!(delta_min > 0.0) || !(delta_max > delta_min))
            throw InfeasibleScenarioError("need delta_max > delta_min > 0");
        if (feasibility_checked && 4.0 * delta_max * mu > d1 - d0)
            throw InfeasibleScenarioError("infeasible: 4 * delta_max * mu exceeds d1 - d0");
        if (static_cast<int>(x0.size()) != n) throw InfeasibleScenarioError("x0 has wrong size");
        if (static_cast<int>(activations.size()) != n)
            throw InfeasibleScenarioError("activation table has wrong size");
        for (const auto& seq : activations) {
            if (seq.empty()) throw InfeasibleScenarioError("each robot needs activations");
            if (seq.front() > delta_max)
                throw InfeasibleScenarioError("first activation must be <= delta_max");
            for (std::size_t k = 1; k < seq.size(); ++k) {
                const double gap = seq[k] - seq[k - 1];
                if (gap < delta_min - 1e-12 || gap > delta_max + 1e-12)
                    throw InfeasibleScenarioError("activation gaps must lie in [delta_min, delta_max]");
            }
        }
    }
};

struct InteractionEvent {
    enum class Cause { engage, reciprocate, release };
    double t = 0.0;
    int i = 0;
    int j = 0;
    bool b = false;
    Cause cause = Cause::engage;
};

inline const char* to_string(InteractionEvent::Cause c) {
    switch (c) {
    case InteractionEvent::Cause::engage: return "engage";
    case InteractionEvent::Cause::reciprocate: return "reciprocate";
    case InteractionEvent::Cause::release: return "release";
    }
    return "?";
}

/// Stepwise planar trajectory with the interaction state b recorded at every
/// step start (flattened n*n, row i = influenced robot).
struct PlanarTrajectory {
    std::vector<double> times;
    std::vector<std::vector<Vec2>> positions;
    std::vector<std::vector<std::uint8_t>> b_history;
    std::vector<InteractionEvent> interaction_log;

    int agents() const { return positions.empty() ? 0 : static_cast<int>(positions.front().size()); }

    double diameter(std::size_t sample) const {
        const auto& pts = positions[sample];
        double d = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, norm(pts[i] - pts[j]));
        return d;
    }
};

struct SimulateOptions {
    bool suppress_interactions = false; ///< test rig: pins every b_ij to 0
};

/// Fixed-step simulation of the saturated consensus control with the
/// engage/reciprocate interaction rules.
///
/// At every step start each robot with a live monitoring window
/// [t_a, t_a + delta_min] sets b_ij = 1 toward any partner it saw at distance
/// >= d1 when the window opened (engage), or toward any partner whose own
/// recent window (opened within delta_max before t_a) took such a snapshot,
/// provided the current distance is >= d0 (reciprocate; the distance clause
/// is re-evaluated every step). Snapshots resolve at the first step start at
/// or after the activation instant; qualifying snapshots are remembered for a
/// 2*delta_max lookback, which covers every reachable reciprocation query.
inline PlanarTrajectory simulate(const RobotScenario& scenario, double horizon, double step,
                                 const SimulateOptions& options = {}) {
    if (!(horizon > 0.0)) throw OutOfRangeError("simulate: horizon must be > 0");
    if (!(step > 0.0) || step > scenario.delta_min / 20.0 + 1e-15)
        throw StepTooLargeError("simulate: step must be <= delta_min / 20");
    scenario.validate();
    const int n = scenario.n;
    if (!options.suppress_interactions) {
        for (const auto& seq : scenario.activations)
            if (seq.back() + scenario.delta_max < horizon)
                throw InfeasibleScenarioError("simulate: activations do not cover the horizon");
    }

    PlanarTrajectory traj;
    const std::size_t steps = static_cast<std::size_t>(std::ceil(horizon / step - 1e-9));
    traj.times.reserve(steps + 1);
    traj.positions.reserve(steps + 1);
    traj.b_history.reserve(steps + 1);

    std::vector<Vec2> x = scenario.x0;
    std::vector<std::size_t> next_act(static_cast<std::size_t>(n), 0);
    std::vector<double> window_start(static_cast<std::size_t>(n),
                                     -std::numeric_limits<double>::infinity());
    std::vector<std::vector<double>> window_snap(static_cast<std::size_t>(n),
                                                 std::vector<double>(static_cast<std::size_t>(n), 0.0));
    // qualifying engagement snapshots: times of i's windows that opened at
    // distance >= d1 from j
    std::vector<std::deque<double>> memory(static_cast<std::size_t>(n) * n);
    std::vector<std::uint8_t> b_prev(static_cast<std::size_t>(n) * n, 0);

    const double lookback = 2.0 * scenario.delta_max;

    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = (k == steps) ? horizon : k * step;

        // resolve activations that occurred since the previous step start
        for (int i = 0; i < n; ++i) {
            const auto& seq = scenario.activations[static_cast<std::size_t>(i)];
            auto& cursor = next_act[static_cast<std::size_t>(i)];
            while (cursor < seq.size() && seq[cursor] <= t) {
                window_start[static_cast<std::size_t>(i)] = seq[cursor];
                for (int j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const double d = norm(x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]);
                    window_snap[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = d;
                    if (d >= scenario.d1)
                        memory[static_cast<std::size_t>(i) * n + j].push_back(seq[cursor]);
                }
                ++cursor;
            }
            for (int j = 0; j < n; ++j) {
                auto& q = memory[static_cast<std::size_t>(i) * n + j];
                while (!q.empty() && q.front() < t - lookback) q.pop_front();
            }
        }

        // interaction state at this step start
        std::vector<std::uint8_t> b(static_cast<std::size_t>(n) * n, 0);
        std::vector<InteractionEvent::Cause> cause(static_cast<std::size_t>(n) * n,
                                                   InteractionEvent::Cause::engage);
        if (!options.suppress_interactions) {
            for (int i = 0; i < n; ++i) {
                const double ws = window_start[static_cast<std::size_t>(i)];
                const bool monitoring = t >= ws && t <= ws + scenario.delta_min;
                if (!monitoring) continue;
                for (int j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const auto idx = static_cast<std::size_t>(i) * n + j;
                    if (window_snap[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] >=
                        scenario.d1) {
                        b[idx] = 1;
                        cause[idx] = InteractionEvent::Cause::engage;
                        continue;
                    }
                    const double dist = norm(x[static_cast<std::size_t>(i)] -
                                             x[static_cast<std::size_t>(j)]);
                    if (dist < scenario.d0) continue;
                    for (double tq : memory[static_cast<std::size_t>(j) * n + i]) {
                        if (tq >= ws - scenario.delta_max && tq <= ws) {
                            b[idx] = 1;
                            cause[idx] = InteractionEvent::Cause::reciprocate;
                            break;
                        }
                    }
                }
            }
        }

        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const auto idx = static_cast<std::size_t>(i) * n + j;
                if (b[idx] != b_prev[idx])
                    traj.interaction_log.push_back(
                        {t, i, j, b[idx] != 0,
                         b[idx] != 0 ? cause[idx] : InteractionEvent::Cause::release});
            }
        b_prev = b;

        traj.times.push_back(t);
        traj.positions.push_back(x);
        traj.b_history.push_back(b);

        if (k == steps) break;
        const double h = std::min(step, horizon - t);
        std::vector<Vec2> x_next = x;
        for (int i = 0; i < n; ++i) {
            Vec2 drive{0.0, 0.0};
            for (int j = 0; j < n; ++j) {
                if (b[static_cast<std::size_t>(i) * n + j])
                    drive += x[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(i)];
            }
            x_next[static_cast<std::size_t>(i)] += saturate(drive, scenario.mu) * h;
        }
        x = std::move(x_next);
    }
    return traj;
}

/// Scalar interaction weights that rewrite the saturated control as a plain
/// consensus system at one sample time: a_ij = mu * b_ij / |drive_i| when the
/// drive saturates, and a_ij = b_ij otherwise.
inline Mat effective_weights(const PlanarTrajectory& trajectory, const RobotScenario& scenario,
                             double t) {
    const auto it = std::lower_bound(trajectory.times.begin(), trajectory.times.end(),
                                     t - 1e-9);
    if (it == trajectory.times.end() || std::abs(*it - t) > 1e-9)
        throw OutOfRangeError("effective_weights: t is not a sample time");
    const std::size_t k = static_cast<std::size_t>(it - trajectory.times.begin());
    const int n = trajectory.agents();
    const auto& x = trajectory.positions[k];
    const auto& b = trajectory.b_history[k];

    Mat a(n, n);
    for (int i = 0; i < n; ++i) {
        Vec2 drive{0.0, 0.0};
        for (int j = 0; j < n; ++j)
            if (b[static_cast<std::size_t>(i) * n + j])
                drive += x[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(i)];
        const double sp = norm(drive);
        const double scale = sp >= scenario.mu ? scenario.mu / sp : 1.0;
        for (int j = 0; j < n; ++j)
            if (b[static_cast<std::size_t>(i) * n + j]) a(i, j) = scale;
    }
    return a;
}

struct ReciprocityViolation {
    int i = 0;
    int j = 0;
    double t = 0.0;
};

/// Numerical check of the pairwise-reciprocity constants the saturated
/// control is supposed to realize: eps = min(delta_min*mu/(n*diam0),
/// delta_min) and T = 2*delta_max. Window integrals run on the step grid via
/// the trapezoid rule with 5% slack.
struct ReciprocityInstantiationReport {
    double epsilon = 0.0;
    double T = 0.0;
    double initial_diameter = 0.0;
    std::size_t support_samples_checked = 0;
    std::vector<ReciprocityViolation> violations;

    bool clean() const { return violations.empty(); }
};

inline ReciprocityInstantiationReport
check_reciprocity_instantiation(const PlanarTrajectory& trajectory, const RobotScenario& scenario,
                                double slack = 0.05) {
    ReciprocityInstantiationReport report;
    const int n = trajectory.agents();
    const std::size_t samples = trajectory.times.size();
    if (samples < 2) return report;

    report.initial_diameter = trajectory.diameter(0);
    report.T = 2.0 * scenario.delta_max;
    report.epsilon =
        report.initial_diameter > 0.0
            ? std::min(scenario.delta_min * scenario.mu / (n * report.initial_diameter),
                       scenario.delta_min)
            : scenario.delta_min;

    // per-sample drive norms give a_ij = b_ij * min(mu/|drive_i|, 1)
    std::vector<std::vector<double>> scale(samples, std::vector<double>(static_cast<std::size_t>(n), 1.0));
    for (std::size_t k = 0; k < samples; ++k) {
        const auto& x = trajectory.positions[k];
        const auto& b = trajectory.b_history[k];
        for (int i = 0; i < n; ++i) {
            Vec2 drive{0.0, 0.0};
            for (int j = 0; j < n; ++j)
                if (b[static_cast<std::size_t>(i) * n + j])
                    drive += x[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(i)];
            const double sp = norm(drive);
            scale[k][static_cast<std::size_t>(i)] = sp >= scenario.mu ? scenario.mu / sp : 1.0;
        }
    }
    auto a_at = [&](std::size_t k, int i, int j) {
        return trajectory.b_history[k][static_cast<std::size_t>(i) * n + j]
                   ? scale[k][static_cast<std::size_t>(i)]
                   : 0.0;
    };

    // window ends: largest sample with time <= time[k] + T
    std::vector<std::size_t> wend(samples);
    {
        std::size_t e = 0;
        for (std::size_t k = 0; k < samples; ++k) {
            if (e < k) e = k;
            while (e + 1 < samples &&
                   trajectory.times[e + 1] <= trajectory.times[k] + report.T + 1e-12)
                ++e;
            wend[k] = e;
        }
    }
    const double t_scan_end = trajectory.times.back() - report.T;
    const double threshold = report.epsilon * (1.0 - slack);

    std::vector<double> cum_f(samples), cum_r(samples), w(samples);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            bool any = false;
            for (std::size_t k = 0; k < samples && !any; ++k)
                any = a_at(k, i, j) > 0.0 || a_at(k, j, i) > 0.0;
            if (!any) continue;

            cum_f[0] = cum_r[0] = 0.0;
            for (std::size_t k = 0; k + 1 < samples; ++k) {
                const double h = trajectory.times[k + 1] - trajectory.times[k];
                cum_f[k + 1] = cum_f[k] + 0.5 * h * (a_at(k, i, j) + a_at(k + 1, i, j));
                cum_r[k + 1] = cum_r[k] + 0.5 * h * (a_at(k, j, i) + a_at(k + 1, j, i));
            }
            for (std::size_t k = 0; k < samples; ++k)
                w[k] = std::min(cum_f[wend[k]] - cum_f[k], cum_r[wend[k]] - cum_r[k]);

            // sliding max of w over window starts in [t - T, t]
            std::deque<std::size_t> dq;
            std::size_t lo = 0;
            for (std::size_t k = 0; k < samples; ++k) {
                while (!dq.empty() && w[dq.back()] <= w[k]) dq.pop_back();
                dq.push_back(k);
                while (trajectory.times[lo] < trajectory.times[k] - report.T - 1e-12) {
                    if (dq.front() == lo) dq.pop_front();
                    ++lo;
                }
                if (trajectory.times[k] > t_scan_end + 1e-12) continue;
                const bool support = a_at(k, i, j) > 0.0 || a_at(k, j, i) > 0.0;
                if (!support) continue;
                ++report.support_samples_checked;
                if (w[dq.front()] < threshold) {
                    if (report.violations.size() < 10000)
                        report.violations.push_back({i, j, trajectory.times[k]});
                }
            }
        }
    }
    return report;
}

/// Tail verdict of a rendezvous run: whether every robot settled (Cauchy tail)
/// and whether the final spread dropped to the engagement radius.
struct RendezvousReport {
    bool limit_exists = false;
    double final_diameter = 0.0;
    double max_tail_movement = 0.0;
    bool pass = false;
};

inline RendezvousReport check_rendezvous(const PlanarTrajectory& trajectory,
                                         const RobotScenario& scenario,
                                         double tail_fraction = 0.1, double tol_cauchy = 1e-3) {
    const std::size_t samples = trajectory.times.size();
    if (samples < 2) throw TrajectoryTooShortError("check_rendezvous: empty trajectory");
    const double span = trajectory.times.back() - trajectory.times.front();
    if (span < 100.0 * scenario.delta_max)
        throw TrajectoryTooShortError("check_rendezvous: horizon below 100 * delta_max");

    const double tail_from = trajectory.times.back() - tail_fraction * span;
    std::size_t tail_begin = samples - 1;
    for (std::size_t k = 0; k < samples; ++k)
        if (trajectory.times[k] >= tail_from) {
            tail_begin = k;
            break;
        }
    if (samples - tail_begin < 10)
        throw TrajectoryTooShortError("check_rendezvous: tail window below 10 samples");

    RendezvousReport report;
    const int n = trajectory.agents();
    const auto& last = trajectory.positions.back();
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        for (std::size_t k = tail_begin; k < samples; ++k)
            worst = std::max(worst,
                             norm(trajectory.positions[k][static_cast<std::size_t>(i)] -
                                  last[static_cast<std::size_t>(i)]));
    }
    report.max_tail_movement = worst;
    report.limit_exists = worst <= tol_cauchy;
    report.final_diameter = trajectory.diameter(samples - 1);
    const double step = trajectory.times[1] - trajectory.times[0];
    report.pass = report.final_diameter <= scenario.d1 + 2.0 * scenario.mu * step;
    return report;
}

} // namespace recipro
