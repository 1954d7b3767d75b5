#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "recipro/clustering.hpp"
#include "recipro/dynamics.hpp"
#include "recipro/errors.hpp"
#include "recipro/reciprocity.hpp"
#include "recipro/rendezvous.hpp"
#include "recipro/schedule.hpp"

namespace recipro {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Schedule files: {n, pieces: [{t0, t1, entries: [[i, j, rate], ...]}],
// persistence_hint}. Entries are sparse and 0-based; absent entries are zero.
// ---------------------------------------------------------------------------

inline json schedule_to_json(const WeightSchedule& schedule) {
    json doc;
    const int n = schedule.agent_count();
    doc["n"] = n;
    doc["pieces"] = json::array();
    for (const auto& piece : schedule.pieces()) {
        json entries = json::array();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (piece.rates(i, j) != 0.0) entries.push_back({i, j, piece.rates(i, j)});
        doc["pieces"].push_back({{"t0", piece.t_begin}, {"t1", piece.t_end}, {"entries", entries}});
    }
    if (schedule.has_hints()) {
        json persistent = json::array(), transient = json::array();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (schedule.hint(i, j) == EdgeHint::persistent) persistent.push_back({i, j});
                if (schedule.hint(i, j) == EdgeHint::transient) transient.push_back({i, j});
            }
        doc["persistence_hint"] = {{"persistent", persistent}, {"transient", transient}};
    }
    return doc;
}

inline WeightSchedule schedule_from_json(const json& doc) {
    try {
        const int n = doc.at("n").get<int>();
        std::vector<SchedulePiece> pieces;
        for (const auto& pj : doc.at("pieces")) {
            SchedulePiece piece;
            piece.t_begin = pj.at("t0").get<double>();
            piece.t_end = pj.at("t1").get<double>();
            piece.rates = Mat(n, n);
            for (const auto& entry : pj.at("entries")) {
                const int i = entry.at(0).get<int>();
                const int j = entry.at(1).get<int>();
                if (i < 0 || i >= n || j < 0 || j >= n)
                    throw IoError("schedule entry index out of range");
                piece.rates(i, j) = entry.at(2).get<double>();
            }
            pieces.push_back(std::move(piece));
        }
        std::vector<EdgeHint> hints;
        if (doc.contains("persistence_hint")) {
            hints.assign(static_cast<std::size_t>(n) * n, EdgeHint::unknown);
            for (const auto& e : doc["persistence_hint"].value("persistent", json::array()))
                hints[static_cast<std::size_t>(e.at(0).get<int>()) * n + e.at(1).get<int>()] =
                    EdgeHint::persistent;
            for (const auto& e : doc["persistence_hint"].value("transient", json::array()))
                hints[static_cast<std::size_t>(e.at(0).get<int>()) * n + e.at(1).get<int>()] =
                    EdgeHint::transient;
        }
        return WeightSchedule(n, std::move(pieces), std::move(hints));
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed schedule file: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Robot scenario files: {n, mu, d0, d1, delta_min, delta_max, seed,
// x0 | box, activations?, horizon?, step?}.
// ---------------------------------------------------------------------------

struct RendezvousConfig {
    int n = 0;
    double mu = 0.0, d0 = 0.0, d1 = 0.0, delta_min = 0.0, delta_max = 0.0;
    std::uint64_t seed = 0;
    std::optional<double> box;
    std::optional<std::vector<Vec2>> x0;
    std::optional<std::vector<std::vector<double>>> activations;
    std::optional<double> horizon;
    std::optional<double> step;

    RobotScenario build(double run_horizon) const {
        if (x0 && activations)
            return RobotScenario::make(n, mu, d0, d1, delta_min, delta_max, *x0, *activations, seed);
        if (x0) {
            detail::Uniform rng(seed);
            std::vector<std::vector<double>> acts(static_cast<std::size_t>(n));
            for (auto& seq : acts) {
                double t = rng.next(0.0, delta_max);
                seq.push_back(t);
                while (t < run_horizon) {
                    t += rng.next(delta_min, delta_max);
                    seq.push_back(t);
                }
            }
            return RobotScenario::make(n, mu, d0, d1, delta_min, delta_max, *x0, std::move(acts),
                                       seed);
        }
        return RobotScenario::random(n, mu, d0, d1, delta_min, delta_max, box.value_or(100.0),
                                     run_horizon, seed);
    }
};

inline RendezvousConfig rendezvous_config_from_json(const json& doc) {
    try {
        RendezvousConfig cfg;
        cfg.n = doc.at("n").get<int>();
        cfg.mu = doc.at("mu").get<double>();
        cfg.d0 = doc.at("d0").get<double>();
        cfg.d1 = doc.at("d1").get<double>();
        cfg.delta_min = doc.at("delta_min").get<double>();
        cfg.delta_max = doc.at("delta_max").get<double>();
        cfg.seed = doc.value("seed", 0ull);
        if (doc.contains("box")) cfg.box = doc["box"].get<double>();
        if (doc.contains("x0")) {
            std::vector<Vec2> pts;
            for (const auto& p : doc["x0"]) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            cfg.x0 = std::move(pts);
        }
        if (doc.contains("activations"))
            cfg.activations = doc["activations"].get<std::vector<std::vector<double>>>();
        if (doc.contains("horizon")) cfg.horizon = doc["horizon"].get<double>();
        if (doc.contains("step")) cfg.step = doc["step"].get<double>();
        return cfg;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed scenario file: ") + e.what());
    }
}

inline json robot_scenario_to_json(const RobotScenario& s) {
    json doc;
    doc["n"] = s.n;
    doc["mu"] = s.mu;
    doc["d0"] = s.d0;
    doc["d1"] = s.d1;
    doc["delta_min"] = s.delta_min;
    doc["delta_max"] = s.delta_max;
    doc["seed"] = s.seed;
    doc["x0"] = json::array();
    for (const auto& p : s.x0) doc["x0"].push_back({p.x, p.y});
    doc["activations"] = s.activations;
    return doc;
}

inline RobotScenario robot_scenario_from_json(const json& doc) {
    const RendezvousConfig cfg = rendezvous_config_from_json(doc);
    if (!cfg.x0 || !cfg.activations)
        throw IoError("scenario file must carry explicit x0 and activations to reload exactly");
    return RobotScenario::make(cfg.n, cfg.mu, cfg.d0, cfg.d1, cfg.delta_min, cfg.delta_max,
                               *cfg.x0, *cfg.activations, cfg.seed);
}

// ---------------------------------------------------------------------------
// Files on disk
// ---------------------------------------------------------------------------

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        json doc;
        in >> doc;
        return doc;
    } catch (const json::exception& e) {
        throw IoError("cannot parse " + path + ": " + e.what());
    }
}

inline void save_json_file(const json& doc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << doc.dump(2) << "\n";
}

namespace detail {

inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/// CSV export `t,x1,...,xn`, one row per sample, full double precision.
inline void write_trajectory_csv(const Trajectory& trajectory, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "t";
    for (int i = 1; i <= trajectory.agents(); ++i) out << ",x" << i;
    out << "\n";
    for (std::size_t k = 0; k < trajectory.times.size(); ++k) {
        out << detail::fmt17(trajectory.times[k]);
        for (double v : trajectory.states[k]) out << "," << detail::fmt17(v);
        out << "\n";
    }
}

/// CSV export `t,x1x,x1y,...,xnx,xny` for planar runs.
inline void write_planar_csv(const PlanarTrajectory& trajectory, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "t";
    for (int i = 1; i <= trajectory.agents(); ++i) out << ",x" << i << "x,x" << i << "y";
    out << "\n";
    for (std::size_t k = 0; k < trajectory.times.size(); ++k) {
        out << detail::fmt17(trajectory.times[k]);
        for (const auto& p : trajectory.positions[k])
            out << "," << detail::fmt17(p.x) << "," << detail::fmt17(p.y);
        out << "\n";
    }
}

/// Long-format plot data `t,agent,component,value` (agents numbered from 1 to
/// match the trajectory CSV columns).
inline void emit_plot_data(const Trajectory& trajectory, const std::string& path) {
    if (trajectory.times.empty()) throw IoError("emit_plot_data: empty trajectory");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "t,agent,component,value\n";
    for (std::size_t k = 0; k < trajectory.times.size(); ++k)
        for (int i = 0; i < trajectory.agents(); ++i)
            out << detail::fmt17(trajectory.times[k]) << "," << (i + 1) << ",0,"
                << detail::fmt17(trajectory.states[k][static_cast<std::size_t>(i)]) << "\n";
}

inline void emit_plot_data(const PlanarTrajectory& trajectory, const std::string& path) {
    if (trajectory.times.empty()) throw IoError("emit_plot_data: empty trajectory");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "t,agent,component,value\n";
    for (std::size_t k = 0; k < trajectory.times.size(); ++k)
        for (int i = 0; i < trajectory.agents(); ++i) {
            const auto& p = trajectory.positions[k][static_cast<std::size_t>(i)];
            out << detail::fmt17(trajectory.times[k]) << "," << (i + 1) << ",0,"
                << detail::fmt17(p.x) << "\n";
            out << detail::fmt17(trajectory.times[k]) << "," << (i + 1) << ",1,"
                << detail::fmt17(p.y) << "\n";
        }
}

/// JSON-lines interaction log {t, i, j, b, cause}, 0-based robot indices.
inline void write_interaction_log(const PlanarTrajectory& trajectory, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& ev : trajectory.interaction_log) {
        json line = {{"t", ev.t}, {"i", ev.i}, {"j", ev.j}, {"b", ev.b ? 1 : 0},
                     {"cause", to_string(ev.cause)}};
        out << line.dump() << "\n";
    }
}

// ---------------------------------------------------------------------------
// Reports (agent ids are 1-based here, matching the human-facing convention)
// ---------------------------------------------------------------------------

inline json one_based(const std::vector<int>& ids) {
    json arr = json::array();
    for (int v : ids) arr.push_back(v + 1);
    return arr;
}

inline json certification_report_json(const WeightSchedule& schedule,
                                      const IntervalPartition& partition,
                                      const CutBalanceResult& cut, const MassBoundResult& mass,
                                      double eps, double T,
                                      const std::vector<PairActivityReport>& pairwise) {
    json doc;
    doc["assumption1"] = {{"feasible", cut.feasible},
                          {"K", cut.feasible ? json(cut.K) : json(nullptr)},
                          {"worst_subset", one_based(cut.worst_subset)},
                          {"worst_interval", cut.worst_interval}};
    doc["assumption2"] = {{"M", mass.M},
                          {"worst_edge", mass.worst_i >= 0
                                             ? json::array({mass.worst_i + 1, mass.worst_j + 1})
                                             : json::array()},
                          {"worst_interval", mass.worst_interval}};
    json violations = json::array();
    for (const auto& rep : pairwise) {
        if (rep.clean()) continue;
        violations.push_back({{"pair", json::array({rep.i + 1, rep.j + 1})},
                              {"times", rep.violations}});
    }
    doc["assumption3"] = {{"epsilon", eps}, {"T", T}, {"violations", violations}};
    doc["partition"] = {{"times", partition.times},
                        {"M1", partition.M1 ? json(*partition.M1) : json(nullptr)},
                        {"M2", partition.M2 ? json(*partition.M2) : json(nullptr)}};
    doc["n"] = schedule.agent_count();
    doc["horizon"] = schedule.horizon();
    return doc;
}

inline json cluster_report_json(const PersistenceGraph& graph, const LimitReport& limits) {
    json doc;
    doc["components"] = json::array();
    for (const auto& c : graph.components) doc["components"].push_back(one_based(c));
    json edges = json::array();
    for (auto [from, to] : graph.edges) edges.push_back({from + 1, to + 1});
    doc["persistent_edges"] = edges;
    doc["limits"] = limits.limits;
    doc["spreads"] = limits.spreads;
    doc["gaps"] = limits.gaps;
    doc["converged"] = limits.converged;
    doc["pass"] = limits.pass;
    return doc;
}

inline json rendezvous_report_json(const RobotScenario& scenario, const RendezvousReport& rdv,
                                   const ReciprocityInstantiationReport& recip) {
    json doc;
    doc["n"] = scenario.n;
    doc["limit_exists"] = rdv.limit_exists;
    doc["final_diameter"] = rdv.final_diameter;
    doc["max_tail_movement"] = rdv.max_tail_movement;
    doc["pass"] = rdv.pass;
    doc["reciprocity"] = {{"epsilon", recip.epsilon},
                          {"T", recip.T},
                          {"initial_diameter", recip.initial_diameter},
                          {"support_samples_checked", recip.support_samples_checked},
                          {"violation_count", recip.violations.size()}};
    json v = json::array();
    for (std::size_t k = 0; k < recip.violations.size() && k < 64; ++k)
        v.push_back({{"i", recip.violations[k].i + 1},
                     {"j", recip.violations[k].j + 1},
                     {"t", recip.violations[k].t}});
    doc["reciprocity"]["violations"] = v;
    return doc;
}

} // namespace recipro
