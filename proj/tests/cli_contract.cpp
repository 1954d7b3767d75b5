// Exercises the installed CLI binary end to end: exit codes, output files,
// scenario round trips.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "recipro/io.hpp"

namespace fs = std::filesystem;
using namespace recipro;

namespace {

struct Workspace {
    fs::path dir;
    Workspace() {
        dir = fs::temp_directory_path() / ("recipro_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }
    std::string path(const char* name) const { return (dir / name).string(); }
};

int run_cli(const std::string& args) {
    const std::string cmd = std::string(RECIPRO_CLI_PATH) + " " + args + " 2>/dev/null >/dev/null";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("certify on a zero schedule is vacuously clean") {
    Workspace ws;
    const WeightSchedule zero(2, {{0.0, 40.0, Mat(2, 2)}});
    save_json_file(schedule_to_json(zero), ws.path("zero.json"));
    const int code = run_cli("certify --scenario " + ws.path("zero.json") + " --out " +
                             ws.path("out"));
    CHECK(code == 0);

    const json report = load_json_file(ws.path("out") + "/certification.json");
    CHECK(report["assumption1"]["feasible"] == true);
    CHECK(report["assumption1"]["K"].get<double>() == doctest::Approx(1.0));
    CHECK(report["assumption2"]["M"].get<double>() == 0.0);
    CHECK(report["assumption3"]["violations"].empty());
}

TEST_CASE("certify flags a one-directional schedule") {
    Workspace ws;
    Mat one_way(2, 2);
    one_way(0, 1) = 1.0;
    const WeightSchedule lopsided(2, {{0.0, 40.0, one_way}});
    save_json_file(schedule_to_json(lopsided), ws.path("oneway.json"));
    CHECK(run_cli("certify --scenario " + ws.path("oneway.json") + " --out " + ws.path("out")) ==
          2);
}

TEST_CASE("example1 reproduces its clusters end to end") {
    Workspace ws;
    const int code =
        run_cli("example --name example1 --horizon 600 --out " + ws.path("out"));
    CHECK(code == 0);
    const json report = load_json_file(ws.path("out") + "/cluster_report.json");
    CHECK(report["components"] == json::parse("[[1,4],[2,3]]"));
    CHECK(report["pass"] == true);
    CHECK(fs::exists(ws.path("out") + "/trajectory.csv"));
    CHECK(fs::exists(ws.path("out") + "/plot.csv"));
    CHECK(fs::exists(ws.path("out") + "/schedule.json"));
}

TEST_CASE("oscillator example reproduces non-convergence") {
    Workspace ws;
    CHECK(run_cli("example --name oscillator --horizon 200 --out " + ws.path("out")) == 0);
}

TEST_CASE("simulate works on a schedule written by the tool") {
    Workspace ws;
    // agent 2 trails its cluster by ~1/p, so the spread at horizon 1000 needs
    // a matching tolerance
    REQUIRE(run_cli("example --name example2 --horizon 1000 --tol-cluster 0.005 --out " +
                    ws.path("ex")) == 0);
    const int code = run_cli("simulate --scenario " + ws.path("ex") + "/schedule.json --out " +
                             ws.path("sim"));
    CHECK(code == 0);
    CHECK(fs::exists(ws.path("sim") + "/trajectory.csv"));

    // the emitted schedule reloads to the same in-memory schedule
    const auto reloaded = schedule_from_json(load_json_file(ws.path("ex") + "/schedule.json"));
    CHECK(reloaded == ScheduleGenerator::example2().materialize(1000.0));
}

TEST_CASE("cluster subcommand verifies a schedule file") {
    Workspace ws;
    REQUIRE(run_cli("example --name example1 --horizon 800 --out " + ws.path("ex")) == 0);
    const int code = run_cli("cluster --scenario " + ws.path("ex") + "/schedule.json --out " +
                             ws.path("out"));
    CHECK(code == 0);
    const json report = load_json_file(ws.path("out") + "/cluster_report.json");
    CHECK(report["components"] == json::parse("[[1,4],[2,3]]"));
}

TEST_CASE("usage and I/O errors exit with 1") {
    CHECK(run_cli("simulate --scenario /nonexistent.json") == 1);
    CHECK(run_cli("bogus-subcommand") == 1);
    CHECK(run_cli("simulate") == 1); // missing --scenario
    CHECK(run_cli("example --name not-a-builtin") == 1);
}

TEST_CASE("rendezvous builtin robots8 passes and writes its bundle") {
    Workspace ws;
    const int code = run_cli("rendezvous --name robots8 --seed 2 --out " + ws.path("out"));
    CHECK(code == 0);
    const json report = load_json_file(ws.path("out") + "/rendezvous_report.json");
    CHECK(report["n"] == 8);
    CHECK(report["pass"] == true);
    CHECK(report["limit_exists"] == true);
    CHECK(report["final_diameter"].get<double>() <= 9.0 + 2.0 * 0.025);
    CHECK(report["reciprocity"]["violation_count"] == 0);
    CHECK(fs::exists(ws.path("out") + "/scenario.json"));
    CHECK(fs::exists(ws.path("out") + "/interactions.jsonl"));
}

TEST_CASE("rendezvous on a small feasible scenario file") {
    Workspace ws;
    const auto scenario = RobotScenario::random(3, 1.0, 1.0, 9.0, 0.5, 2.0, 30.0, 220.0, 5);
    json doc = robot_scenario_to_json(scenario);
    doc["horizon"] = 220.0;
    save_json_file(doc, ws.path("robots3.json"));
    const int code = run_cli("rendezvous --scenario " + ws.path("robots3.json") + " --out " +
                             ws.path("out"));
    CHECK(code == 0);
    CHECK(fs::exists(ws.path("out") + "/trajectory.csv"));
    CHECK(fs::exists(ws.path("out") + "/interactions.jsonl"));
    const json report = load_json_file(ws.path("out") + "/rendezvous_report.json");
    CHECK(report["pass"] == true);
    CHECK(report["reciprocity"]["violation_count"] == 0);

    // scenario round trip through the emitted file
    const auto reloaded =
        robot_scenario_from_json(load_json_file(ws.path("out") + "/scenario.json"));
    CHECK(reloaded.x0 == scenario.x0);
    CHECK(reloaded.activations == scenario.activations);
}
