#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "recipro/dynamics.hpp"
#include "recipro/errors.hpp"
#include "recipro/schedule.hpp"

namespace recipro {

/// Strongly connected components of a directed graph given as (from, to)
/// pairs. Deterministic output: members sorted ascending, components ordered
/// by smallest member.
inline std::vector<std::vector<int>> scc(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (auto [from, to] : edges) adj[static_cast<std::size_t>(from)].push_back(to);

    // Tarjan, iterative
    std::vector<int> index(static_cast<std::size_t>(n), -1);
    std::vector<int> lowlink(static_cast<std::size_t>(n), 0);
    std::vector<bool> on_stack(static_cast<std::size_t>(n), false);
    std::vector<int> stack;
    std::vector<std::vector<int>> components;
    int next_index = 0;

    struct Frame {
        int v;
        std::size_t child;
    };
    for (int root = 0; root < n; ++root) {
        if (index[static_cast<std::size_t>(root)] != -1) continue;
        std::vector<Frame> call_stack{{root, 0}};
        index[static_cast<std::size_t>(root)] = lowlink[static_cast<std::size_t>(root)] = next_index++;
        stack.push_back(root);
        on_stack[static_cast<std::size_t>(root)] = true;
        while (!call_stack.empty()) {
            Frame& frame = call_stack.back();
            const auto v = static_cast<std::size_t>(frame.v);
            if (frame.child < adj[v].size()) {
                const int w = adj[v][frame.child++];
                const auto wu = static_cast<std::size_t>(w);
                if (index[wu] == -1) {
                    index[wu] = lowlink[wu] = next_index++;
                    stack.push_back(w);
                    on_stack[wu] = true;
                    call_stack.push_back({w, 0});
                } else if (on_stack[wu]) {
                    lowlink[v] = std::min(lowlink[v], index[wu]);
                }
            } else {
                if (lowlink[v] == index[v]) {
                    std::vector<int> component;
                    int w;
                    do {
                        w = stack.back();
                        stack.pop_back();
                        on_stack[static_cast<std::size_t>(w)] = false;
                        component.push_back(w);
                    } while (w != frame.v);
                    std::sort(component.begin(), component.end());
                    components.push_back(std::move(component));
                }
                const int finished = frame.v;
                call_stack.pop_back();
                if (!call_stack.empty()) {
                    const auto parent = static_cast<std::size_t>(call_stack.back().v);
                    lowlink[parent] = std::min(lowlink[parent],
                                               lowlink[static_cast<std::size_t>(finished)]);
                }
            }
        }
    }
    std::sort(components.begin(), components.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return components;
}

/// Classification record for one directed weight a_ij.
struct EdgeEvidence {
    int i = 0; ///< attracted agent
    int j = 0; ///< attracting agent
    std::vector<double> cumulative; ///< integral of a_ij up to each horizon
    double increment = 0.0;         ///< mass gathered over the last half-horizon
    bool persistent = false;
    bool from_hint = false;
};

/// Directed graph of persistent interactions. An edge (j, i) means the weight
/// a_ij keeps accumulating; its strongly connected components are the
/// predicted consensus clusters.
struct PersistenceGraph {
    int n = 0;
    std::vector<std::pair<int, int>> edges; ///< (from j, to i)
    std::vector<std::vector<int>> components;
    std::vector<EdgeEvidence> evidence;

    bool has_edge(int from, int to) const {
        return std::find(edges.begin(), edges.end(), std::make_pair(from, to)) != edges.end();
    }
};

struct ClassifyOptions {
    double theta = 0.05; ///< mass required over the last half-horizon
    bool use_hints = true;
};

/// Default doubling horizons {H/8, H/4, H/2, H} for a materialized schedule.
inline std::vector<double> doubling_horizons(const WeightSchedule& schedule) {
    const double h = schedule.horizon();
    return {h / 8.0, h / 4.0, h / 2.0, h};
}

/// Labels each directed weight persistent or transient. Divergence of the
/// cumulative integral is undecidable from finite data, so the heuristic
/// tests whether the last doubling of the horizon still gathered at least
/// theta of mass; schedule hints, when present, override it.
inline PersistenceGraph classify_persistence(const WeightSchedule& schedule,
                                             const std::vector<double>& horizons,
                                             const ClassifyOptions& options = {}) {
    if (horizons.empty()) throw OutOfRangeError("classify_persistence: need at least one horizon");
    for (std::size_t k = 1; k < horizons.size(); ++k)
        if (!(horizons[k] > horizons[k - 1]))
            throw OutOfRangeError("classify_persistence: horizons must increase");
    if (horizons.back() > schedule.horizon())
        throw OutOfRangeError("classify_persistence: horizon beyond materialized range");

    const int n = schedule.agent_count();
    const double last = horizons.back();
    PersistenceGraph graph;
    graph.n = n;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            EdgeEvidence ev;
            ev.i = i;
            ev.j = j;
            for (double h : horizons)
                ev.cumulative.push_back(schedule.integral_weight(i, j, 0.0, h));
            ev.increment = schedule.integral_weight(i, j, last / 2.0, last);
            ev.persistent = ev.increment >= options.theta;
            if (options.use_hints && schedule.hint(i, j) != EdgeHint::unknown) {
                ev.persistent = schedule.hint(i, j) == EdgeHint::persistent;
                ev.from_hint = true;
            }
            if (ev.persistent) graph.edges.emplace_back(j, i);
            graph.evidence.push_back(std::move(ev));
        }
    }
    graph.components = scc(n, graph.edges);
    return graph;
}

/// Variant of the persistence graph built from the sampled transition
/// matrices: edge (j, i) is present when the phi_ij(p) accumulated over the
/// intervals of the last half-horizon reach theta.
inline PersistenceGraph classify_persistence_sampled(const WeightSchedule& schedule,
                                                     const IntervalPartition& partition,
                                                     double theta = 0.05) {
    const int n = schedule.agent_count();
    const double last = partition.times.back();
    Mat mass(n, n);
    for (int p = 0; p < partition.interval_count(); ++p) {
        const double ta = partition.times[static_cast<std::size_t>(p)];
        const double tb = partition.times[static_cast<std::size_t>(p) + 1];
        if (ta < last / 2.0) continue;
        mass += transition_matrix(schedule, ta, tb).phi;
    }
    PersistenceGraph graph;
    graph.n = n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            EdgeEvidence ev;
            ev.i = i;
            ev.j = j;
            ev.increment = mass(i, j);
            ev.persistent = ev.increment >= theta;
            if (ev.persistent) graph.edges.emplace_back(j, i);
            graph.evidence.push_back(std::move(ev));
        }
    graph.components = scc(n, graph.edges);
    return graph;
}

/// Per-agent limit estimates over the trajectory tail plus cluster spreads.
struct LimitReport {
    std::vector<double> limits;
    std::vector<bool> converged;        ///< tail oscillation <= tol_conv
    std::vector<double> spreads;        ///< per cluster, max intra-cluster limit gap
    std::vector<double> gaps;           ///< pairwise distances between cluster means
    bool all_converged = false;
    bool pass = false;                  ///< all spreads <= tol_cluster
};

inline LimitReport analyze_limits(const Trajectory& trajectory,
                                  const std::vector<std::vector<int>>& clusters, double tol_conv,
                                  double tol_cluster) {
    const int n = trajectory.agents();
    const std::size_t samples = trajectory.times.size();
    if (samples < 2) throw TrajectoryTooShortError("analyze_limits: trajectory has < 2 samples");

    // tail window: last 10% of the horizon, at least 10 samples
    const double tail_from = trajectory.t_end() - 0.1 * (trajectory.t_end() - trajectory.t_begin());
    std::size_t tail_begin = samples;
    for (std::size_t k = 0; k < samples; ++k) {
        if (trajectory.times[k] >= tail_from) {
            tail_begin = k;
            break;
        }
    }
    if (samples - tail_begin < 10) {
        if (samples < 10) throw TrajectoryTooShortError("analyze_limits: tail window below 10 samples");
        tail_begin = samples - 10;
    }

    LimitReport report;
    report.limits.resize(static_cast<std::size_t>(n));
    report.converged.resize(static_cast<std::size_t>(n));
    report.all_converged = true;
    for (int i = 0; i < n; ++i) {
        double lo = trajectory.states[tail_begin][static_cast<std::size_t>(i)];
        double hi = lo;
        for (std::size_t k = tail_begin; k < samples; ++k) {
            const double v = trajectory.states[k][static_cast<std::size_t>(i)];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        report.limits[static_cast<std::size_t>(i)] = trajectory.states.back()[static_cast<std::size_t>(i)];
        const bool conv = (hi - lo) <= tol_conv;
        report.converged[static_cast<std::size_t>(i)] = conv;
        report.all_converged = report.all_converged && conv;
    }

    std::vector<double> means;
    report.pass = true;
    for (const auto& cluster : clusters) {
        double lo = report.limits[static_cast<std::size_t>(cluster.front())];
        double hi = lo;
        double sum = 0.0;
        for (int i : cluster) {
            const double v = report.limits[static_cast<std::size_t>(i)];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            sum += v;
        }
        report.spreads.push_back(hi - lo);
        means.push_back(sum / static_cast<double>(cluster.size()));
        if (hi - lo > tol_cluster) report.pass = false;
    }
    for (std::size_t c = 0; c < means.size(); ++c)
        for (std::size_t d = c + 1; d < means.size(); ++d)
            report.gaps.push_back(std::abs(means[c] - means[d]));
    return report;
}

/// Reachability must be symmetric in a persistence graph certified by the
/// reciprocity assumptions; the witness is the first ordered pair breaking it.
struct PathCheckResult {
    bool symmetric = true;
    std::optional<std::pair<int, int>> witness;
};

inline PathCheckResult reciprocal_path_check(const PersistenceGraph& graph) {
    const int n = graph.n;
    std::vector<std::vector<bool>> reach(static_cast<std::size_t>(n),
                                         std::vector<bool>(static_cast<std::size_t>(n), false));
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (auto [from, to] : graph.edges) adj[static_cast<std::size_t>(from)].push_back(to);
    for (int s = 0; s < n; ++s) {
        std::vector<int> queue{s};
        reach[static_cast<std::size_t>(s)][static_cast<std::size_t>(s)] = true;
        while (!queue.empty()) {
            const int v = queue.back();
            queue.pop_back();
            for (int w : adj[static_cast<std::size_t>(v)]) {
                if (!reach[static_cast<std::size_t>(s)][static_cast<std::size_t>(w)]) {
                    reach[static_cast<std::size_t>(s)][static_cast<std::size_t>(w)] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] !=
                reach[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)])
                return {false, std::make_pair(i, j)};
    return {true, std::nullopt};
}

} // namespace recipro
