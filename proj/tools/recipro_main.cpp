// Command-line front end: load scenarios, run simulations and certifications,
// emit trajectories, reports and plot-ready data.
//
// Exit codes: 0 success, 1 usage or I/O error, 2 certification failure
// (assumption violated or prediction mismatch).

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "recipro/recipro.hpp"

namespace fs = std::filesystem;
using namespace recipro;

namespace {

int log_level() {
    const char* env = std::getenv("RECIPRO_LOG");
    if (!env) return 1;
    const std::string v(env);
    if (v == "quiet") return 0;
    if (v == "debug") return 2;
    return 1;
}

void info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << msg << "\n";
}

void debug(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[debug] " << msg << "\n";
}

std::string join_components(const std::vector<std::vector<int>>& components) {
    std::ostringstream out;
    for (const auto& c : components) {
        out << "{";
        for (std::size_t k = 0; k < c.size(); ++k) out << (k ? "," : "") << c[k] + 1;
        out << "} ";
    }
    return out.str();
}

Vec parse_x0(const std::string& csv, int n) {
    if (csv.empty()) {
        Vec x(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = i;
        return x;
    }
    Vec x;
    std::istringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) x.push_back(std::stod(tok));
    if (static_cast<int>(x.size()) != n)
        throw IoError("--x0 needs exactly " + std::to_string(n) + " comma-separated values");
    return x;
}

struct CommonFlags {
    std::string scenario;
    std::string name;
    std::string out = "out";
    std::string x0;
    double horizon = 0.0;
    double step = 0.0;
    std::uint64_t seed = 1;
    double tol_conv = 1e-3;
    double tol_cluster = 1e-3;
    double theta = 0.05;
    int jobs = 1;
};

fs::path ensure_out(const CommonFlags& flags) {
    fs::path dir(flags.out);
    fs::create_directories(dir);
    return dir;
}

ScheduleGenerator builtin_generator(const std::string& name) {
    if (name == "example1") return ScheduleGenerator::example1();
    if (name == "example2") return ScheduleGenerator::example2();
    if (name == "oscillator") return ScheduleGenerator::oscillator();
    throw IoError("unknown builtin '" + name + "' (try example1, example2, oscillator)");
}

// Shared by `example` and `cluster`: simulate, classify, analyze, write the
// report bundle. Returns the exit code from the prediction check.
int run_cluster_pipeline(const WeightSchedule& schedule, const Vec& x0, double horizon,
                         const CommonFlags& flags, bool expect_clusters) {
    const fs::path dir = ensure_out(flags);

    const auto trajectory = propagate(schedule, x0, 0.0, horizon);
    ClassifyOptions copt;
    copt.theta = flags.theta;
    const auto graph = classify_persistence(schedule, doubling_horizons(schedule), copt);
    const auto limits = analyze_limits(trajectory, graph.components, flags.tol_conv,
                                       flags.tol_cluster);

    write_trajectory_csv(trajectory, (dir / "trajectory.csv").string());
    emit_plot_data(trajectory, (dir / "plot.csv").string());
    save_json_file(schedule_to_json(schedule), (dir / "schedule.json").string());
    save_json_file(cluster_report_json(graph, limits), (dir / "cluster_report.json").string());

    std::cout << "components: " << join_components(graph.components) << "\n";
    std::cout << "limits:";
    for (double v : limits.limits) std::cout << " " << v;
    std::cout << "\n";

    const auto path_check = reciprocal_path_check(graph);
    if (!path_check.symmetric)
        info("warning: persistence classification is not reciprocal for pair (" +
             std::to_string(path_check.witness->first + 1) + "," +
             std::to_string(path_check.witness->second + 1) + "); heuristic evidence only");

    if (!expect_clusters) return 0;
    if (!limits.pass || !limits.all_converged || !path_check.symmetric) {
        info("prediction mismatch: cluster spreads or convergence out of tolerance");
        return 2;
    }
    std::cout << "prediction: pass\n";
    return 0;
}

int cmd_example(const CommonFlags& flags) {
    const std::string name = flags.name.empty() ? "example1" : flags.name;
    const fs::path dir = ensure_out(flags);

    if (name == "robots8") throw IoError("robots8 runs under the rendezvous command");
    const auto gen = builtin_generator(name);

    if (name == "oscillator") {
        const double horizon = flags.horizon > 0.0 ? flags.horizon : 800.0;
        const auto schedule = gen.materialize(horizon);
        const Vec x0 = flags.x0.empty() ? Vec{0.0, 0.5, 1.0} : parse_x0(flags.x0, 3);
        const auto trajectory = propagate(schedule, x0, 0.0, horizon);
        write_trajectory_csv(trajectory, (dir / "trajectory.csv").string());
        emit_plot_data(trajectory, (dir / "plot.csv").string());
        save_json_file(schedule_to_json(schedule), (dir / "schedule.json").string());
        const auto limits = analyze_limits(trajectory, {{0}, {1}, {2}}, flags.tol_conv,
                                           flags.tol_cluster);
        // expected behaviour: the middle agent keeps oscillating between two
        // separated extremes
        const std::size_t last = trajectory.times.size() - 1;
        const double gap = trajectory.states[last][2] - trajectory.states[last][0];
        std::cout << "extreme gap: " << gap << "\n";
        std::cout << "middle agent converged: " << (limits.converged[1] ? "yes" : "no") << "\n";
        if (limits.converged[1] || gap < 0.5) {
            info("oscillator failed to reproduce its non-convergent behaviour");
            return 2;
        }
        return 0;
    }

    const double horizon = flags.horizon > 0.0 ? flags.horizon : 2000.0;
    const auto schedule = gen.materialize(horizon);
    const Vec x0 = parse_x0(flags.x0, schedule.agent_count());
    return run_cluster_pipeline(schedule, x0, horizon, flags, true);
}

int cmd_simulate(const CommonFlags& flags) {
    if (flags.scenario.empty()) throw IoError("simulate needs --scenario");
    const auto schedule = schedule_from_json(load_json_file(flags.scenario));
    const double horizon = flags.horizon > 0.0 ? std::min(flags.horizon, schedule.horizon())
                                               : schedule.horizon();
    const Vec x0 = parse_x0(flags.x0, schedule.agent_count());
    const fs::path dir = ensure_out(flags);

    PropagateOptions opt;
    if (flags.step > 0.0) opt.max_sample_spacing = flags.step;
    const auto trajectory = propagate(schedule, x0, 0.0, horizon, opt);
    write_trajectory_csv(trajectory, (dir / "trajectory.csv").string());
    emit_plot_data(trajectory, (dir / "plot.csv").string());
    std::cout << "samples: " << trajectory.times.size() << "\n";
    std::cout << "final state:";
    for (double v : trajectory.states.back()) std::cout << " " << v;
    std::cout << "\n";
    return 0;
}

int cmd_certify(const CommonFlags& flags, double eps_flag, double t_flag, double uniform_dt) {
    if (flags.scenario.empty()) throw IoError("certify needs --scenario");
    const auto schedule = schedule_from_json(load_json_file(flags.scenario));
    const fs::path dir = ensure_out(flags);

    double eps = eps_flag, T = t_flag;
    if (eps <= 0.0 || T <= 0.0) {
        const auto suggestion = suggest_epsilon_T(schedule, schedule.horizon());
        if (eps <= 0.0) eps = suggestion.epsilon;
        if (T <= 0.0) T = suggestion.T;
        debug("calibrated eps = " + std::to_string(eps) + ", T = " + std::to_string(T));
    }

    const auto pairwise = check_pairwise(schedule, eps, T, schedule.horizon());
    bool pairwise_clean = true;
    for (const auto& rep : pairwise) pairwise_clean = pairwise_clean && rep.clean();

    IntervalPartition partition;
    if (uniform_dt > 0.0) {
        partition = IntervalPartition::uniform(schedule.horizon(), uniform_dt);
    } else {
        const int n = schedule.agent_count();
        const double m2 = n * (n - 1) * T + 1.5 * T;
        const double m1 = m2 + T;
        const double target = flags.horizon > 0.0 ? flags.horizon
                                                  : schedule.horizon() - (m1 + m2);
        if (pairwise_clean && target > 0.0 && schedule.horizon() >= target + m1 + m2) {
            partition = build_partition(schedule, eps, T, target);
        } else {
            partition = IntervalPartition::uniform(schedule.horizon(),
                                                   std::max(T, schedule.horizon() / 16.0));
            if (pairwise_clean)
                info("horizon too short for the window builder; using a uniform partition");
        }
    }

    const auto cut = cut_balance_ratio(schedule, partition, flags.jobs);
    const auto mass = interval_mass_bound(schedule, partition);
    partition.K = cut.feasible ? std::optional<double>(cut.K) : std::nullopt;
    partition.M = mass.M;

    save_json_file(certification_report_json(schedule, partition, cut, mass, eps, T, pairwise),
                   (dir / "certification.json").string());

    std::cout << "assumption1: "
              << (cut.feasible ? "K = " + std::to_string(cut.K) : std::string("infeasible"))
              << "\n";
    std::cout << "assumption2: M = " << mass.M << "\n";
    std::cout << "assumption3: " << (pairwise_clean ? "clean" : "violations") << " (eps = " << eps
              << ", T = " << T << ")\n";
    std::cout << "partition: " << partition.times.size() << " times, last "
              << partition.times.back() << "\n";

    if (!cut.feasible || !pairwise_clean) {
        info("certification failed");
        return 2;
    }
    return 0;
}

int cmd_cluster(const CommonFlags& flags) {
    if (flags.scenario.empty()) throw IoError("cluster needs --scenario");
    const auto schedule = schedule_from_json(load_json_file(flags.scenario));
    const double horizon = flags.horizon > 0.0 ? std::min(flags.horizon, schedule.horizon())
                                               : schedule.horizon();
    const Vec x0 = parse_x0(flags.x0, schedule.agent_count());
    return run_cluster_pipeline(schedule, x0, horizon, flags, true);
}

int cmd_rendezvous(const CommonFlags& flags) {
    const fs::path dir = ensure_out(flags);

    double horizon = flags.horizon > 0.0 ? flags.horizon : 500.0;
    std::optional<double> file_step;
    RobotScenario scenario = [&] {
        if (!flags.scenario.empty()) {
            const auto cfg = rendezvous_config_from_json(load_json_file(flags.scenario));
            if (flags.horizon <= 0.0 && cfg.horizon) horizon = *cfg.horizon;
            file_step = cfg.step;
            return cfg.build(horizon);
        }
        const std::string name = flags.name.empty() ? "robots8" : flags.name;
        if (name != "robots8")
            throw IoError("unknown rendezvous builtin '" + name + "' (try robots8)");
        return RobotScenario::random(8, 1.0, 1.0, 9.0, 0.5, 2.0, 100.0, horizon, flags.seed);
    }();

    double step = flags.step > 0.0 ? flags.step : file_step.value_or(scenario.delta_min / 20.0);
    const auto trajectory = simulate(scenario, horizon, step);
    const auto rdv = check_rendezvous(trajectory, scenario);
    const auto recip = check_reciprocity_instantiation(trajectory, scenario);

    write_planar_csv(trajectory, (dir / "trajectory.csv").string());
    emit_plot_data(trajectory, (dir / "plot.csv").string());
    write_interaction_log(trajectory, (dir / "interactions.jsonl").string());
    save_json_file(robot_scenario_to_json(scenario), (dir / "scenario.json").string());
    save_json_file(rendezvous_report_json(scenario, rdv, recip),
                   (dir / "rendezvous_report.json").string());

    std::cout << "final diameter: " << rdv.final_diameter << " (d1 = " << scenario.d1 << ")\n";
    std::cout << "limits exist: " << (rdv.limit_exists ? "yes" : "no") << "\n";
    std::cout << "reciprocity violations: " << recip.violations.size() << "\n";
    debug("eps = " + std::to_string(recip.epsilon) + ", T = " + std::to_string(recip.T));

    if (!rdv.pass || !rdv.limit_exists || !recip.clean()) {
        info("rendezvous check failed");
        return 2;
    }
    std::cout << "rendezvous: pass\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"simulator and certification toolkit for consensus dynamics with "
                 "intermittent reciprocal interactions"};
    app.require_subcommand(1);

    CommonFlags flags;
    double eps_flag = 0.0, t_flag = 0.0, uniform_dt = 0.0;

    auto add_common = [&flags](CLI::App* cmd) {
        cmd->add_option("--scenario", flags.scenario, "scenario/schedule file (JSON)");
        cmd->add_option("--name", flags.name, "builtin scenario name");
        cmd->add_option("--horizon", flags.horizon, "simulation horizon");
        cmd->add_option("--step", flags.step, "integration step / sample spacing");
        cmd->add_option("--seed", flags.seed, "seed for any randomness");
        cmd->add_option("--out", flags.out, "output directory (default: out)");
        cmd->add_option("--x0", flags.x0, "comma-separated initial state");
        cmd->add_option("--tol-conv", flags.tol_conv, "per-agent convergence tolerance")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--tol-cluster", flags.tol_cluster, "cluster spread tolerance")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--theta", flags.theta, "persistence mass threshold")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--jobs", flags.jobs, "worker threads for subset enumeration");
    };

    auto* example = app.add_subcommand("example", "run a builtin scenario and verify it");
    add_common(example);
    auto* simulate_cmd = app.add_subcommand("simulate", "propagate a schedule file");
    add_common(simulate_cmd);
    auto* certify = app.add_subcommand("certify", "certify the reciprocity assumptions");
    add_common(certify);
    certify->add_option("--eps", eps_flag, "pairwise activity threshold (default: calibrated)");
    certify->add_option("--T", t_flag, "pairwise window bound (default: calibrated)");
    certify->add_option("--uniform-dt", uniform_dt, "use a uniform partition with this spacing");
    auto* cluster = app.add_subcommand("cluster", "predict and verify consensus clusters");
    add_common(cluster);
    auto* rendezvous = app.add_subcommand("rendezvous", "planar robot rendezvous run");
    add_common(rendezvous);

    try {
        app.parse(argc, argv);
        if (example->parsed()) return cmd_example(flags);
        if (simulate_cmd->parsed()) return cmd_simulate(flags);
        if (certify->parsed()) return cmd_certify(flags, eps_flag, t_flag, uniform_dt);
        if (cluster->parsed()) return cmd_cluster(flags);
        if (rendezvous->parsed()) return cmd_rendezvous(flags);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
