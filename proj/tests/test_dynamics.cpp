#include <doctest.h>

#include <cmath>
#include <random>

#include "recipro/dynamics.hpp"
#include "oracles.hpp"

using namespace recipro;

namespace {

WeightSchedule zero_schedule(int n, double horizon) {
    return WeightSchedule(n, {{0.0, horizon, Mat(n, n)}});
}

WeightSchedule symmetric_pair(double rate, double horizon) {
    Mat a(2, 2);
    a(0, 1) = a(1, 0) = rate;
    return WeightSchedule(2, {{0.0, horizon, a}});
}

} // namespace

TEST_CASE("expm of the zero matrix is the identity") {
    CHECK(expm(Mat(3, 3)) == Mat::identity(3));
}

TEST_CASE("expm matches the symmetric 2x2 closed form") {
    // -L for a symmetric rate-1 pair over h = 1
    Mat neg_l(2, 2);
    neg_l(0, 0) = neg_l(1, 1) = -1.0;
    neg_l(0, 1) = neg_l(1, 0) = 1.0;
    const Mat e = expm(neg_l);
    const double diag = (1.0 + std::exp(-2.0)) / 2.0;
    const double off = (1.0 - std::exp(-2.0)) / 2.0;
    CHECK(e(0, 0) == doctest::Approx(diag).epsilon(1e-13));
    CHECK(e(1, 1) == doctest::Approx(diag).epsilon(1e-13));
    CHECK(e(0, 1) == doctest::Approx(off).epsilon(1e-13));
    CHECK(e(1, 0) == doctest::Approx(off).epsilon(1e-13));
}

TEST_CASE("expm of a consensus generator is entrywise non-negative") {
    std::mt19937_64 rng(991);
    for (int trial = 0; trial < 50; ++trial) {
        const auto schedule = oracles::random_schedule(rng, {.n = 4, .pieces = 1, .max_rate = 50.0});
        Mat neg_lh = detail::laplacian(schedule.pieces().front().rates);
        neg_lh *= -(schedule.pieces().front().t_end);
        const Mat e = expm(neg_lh);
        for (int i = 0; i < 4; ++i) {
            double row = 0.0;
            for (int j = 0; j < 4; ++j) {
                CHECK(e(i, j) >= 0.0);
                row += e(i, j);
            }
            CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("expm stays sane at extreme rates") {
    // one-directional rate 700 over a unit span: the flow is
    // (e^-700, 1 - e^-700) in the first row, deep in the denormal range
    Mat rates(2, 2);
    rates(0, 1) = 700.0;
    const Mat e = detail::piece_flow(rates, 1.0, 1e-13);
    CHECK(e(1, 0) == 0.0);
    CHECK(e(1, 1) == 1.0);
    CHECK(e(0, 0) >= 0.0);
    CHECK(e(0, 0) <= 1e-300);
    CHECK(e(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e(0, 0) + e(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero schedule propagates the identity flow") {
    const auto schedule = zero_schedule(3, 5.0);
    const Vec x0{3.0, -1.0, 7.5};
    const auto traj = propagate(schedule, x0, 0.0, 5.0);
    CHECK(traj.states.back() == x0);
}

TEST_CASE("symmetric pair matches the 2x2 closed form after one second") {
    const auto schedule = symmetric_pair(1.0, 2.0);
    const auto traj = propagate(schedule, {0.0, 1.0}, 0.0, 1.0);
    CHECK(traj.states.back()[0] == doctest::Approx((1.0 - std::exp(-2.0)) / 2.0).epsilon(1e-12));
    CHECK(traj.states.back()[1] == doctest::Approx((1.0 + std::exp(-2.0)) / 2.0).epsilon(1e-12));
}

TEST_CASE("oscillator phase follows the single-attractor recursion") {
    const auto schedule = ScheduleGenerator::oscillator().materialize(50.0);
    Vec x{0.0, 0.5, 1.0};
    for (int p = 0; p < 8; ++p) {
        const auto traj = propagate(schedule, x, 4.0 * p, 4.0 * p + 1.0);
        const double rho = ScheduleGenerator::oscillator().rho(p);
        const double expected = (1.0 - std::exp(-rho)) * x[0] + std::exp(-rho) * x[1];
        CHECK(traj.states.back()[1] == doctest::Approx(expected).epsilon(1e-12));
        // x1 and x3 are untouched during this phase (up to exponential roundoff)
        CHECK(std::abs(traj.states.back()[0] - x[0]) < 1e-12);
        CHECK(std::abs(traj.states.back()[2] - x[2]) < 1e-12);
        x = propagate(schedule, x, 4.0 * p, 4.0 * (p + 1)).states.back();
    }
}

TEST_CASE("transition matrix of the zero schedule is the identity") {
    const auto schedule = zero_schedule(4, 6.0);
    CHECK(transition_matrix(schedule, 1.0, 5.0).phi == Mat::identity(4));
}

TEST_CASE("example1 transition over [2,4] is row-stochastic with bounded diagonal") {
    const auto schedule = ScheduleGenerator::example1().materialize(10.0);
    const auto tm = transition_matrix(schedule, 2.0, 4.0);
    for (int i = 0; i < 4; ++i) {
        double row = 0.0;
        for (int j = 0; j < 4; ++j) {
            CHECK(tm.phi(i, j) >= 0.0);
            row += tm.phi(i, j);
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(tm.phi(i, i) >= std::exp(-4.0 * 2.0)); // n = 4, interval mass M = 2
    }
}

TEST_CASE("single-piece symmetric transition equals the closed form") {
    const auto schedule = symmetric_pair(1.0, 1.0);
    const auto tm = transition_matrix(schedule, 0.0, 1.0);
    const double diag = (1.0 + std::exp(-2.0)) / 2.0;
    const double off = (1.0 - std::exp(-2.0)) / 2.0;
    CHECK(tm.phi(0, 0) == doctest::Approx(diag).epsilon(1e-12));
    CHECK(tm.phi(0, 1) == doctest::Approx(off).epsilon(1e-12));
    CHECK(tm.phi(1, 0) == doctest::Approx(off).epsilon(1e-12));
    CHECK(tm.phi(1, 1) == doctest::Approx(diag).epsilon(1e-12));
}

TEST_CASE("semigroup property of transition matrices") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 30; ++trial) {
        const auto schedule = oracles::random_schedule(rng, {.n = 4, .pieces = 5});
        const double h = schedule.horizon();
        double t0 = 0.13 * h, t1 = 0.58 * h, t2 = 0.97 * h;
        const Mat whole = transition_matrix(schedule, t0, t2).phi;
        const Mat split = transition_matrix(schedule, t1, t2).phi *
                          transition_matrix(schedule, t0, t1).phi;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) CHECK(std::abs(whole(i, j) - split(i, j)) <= 1e-8);
    }
}

TEST_CASE("diagonal entries respect the e^{-nM} floor") {
    std::mt19937_64 rng(5150);
    for (int trial = 0; trial < 30; ++trial) {
        const auto schedule = oracles::random_schedule(rng, {.n = 4, .pieces = 4});
        const auto partition = IntervalPartition::uniform(schedule.horizon(), schedule.horizon() / 3.0);
        const double m = interval_mass_bound(schedule, partition).M;
        for (int p = 0; p < partition.interval_count(); ++p) {
            const auto tm = transition_matrix(schedule, partition.times[p], partition.times[p + 1]);
            for (int i = 0; i < 4; ++i) CHECK(tm.phi(i, i) >= std::exp(-4.0 * m) - 1e-9);
        }
    }
}

TEST_CASE("hull invariance: min never decreases, max never increases") {
    std::mt19937_64 rng(8080);
    for (int trial = 0; trial < 30; ++trial) {
        const auto schedule = oracles::random_schedule(rng, {.n = 5, .pieces = 6});
        Vec x0(5);
        for (auto& v : x0) v = static_cast<double>(rng() % 100) / 10.0 - 5.0;
        PropagateOptions opt;
        opt.max_sample_spacing = 0.25;
        const auto traj = propagate(schedule, x0, 0.0, schedule.horizon(), opt);
        double lo = *std::min_element(x0.begin(), x0.end());
        double hi = *std::max_element(x0.begin(), x0.end());
        const double tol = 1e-10 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
        for (const auto& state : traj.states) {
            const double cur_lo = *std::min_element(state.begin(), state.end());
            const double cur_hi = *std::max_element(state.begin(), state.end());
            CHECK(cur_lo >= lo - tol);
            CHECK(cur_hi <= hi + tol);
            lo = std::max(lo, cur_lo - tol);
            hi = std::min(hi, cur_hi + tol);
        }
    }
}

TEST_CASE("propagate agrees with the RK4 reference integrator") {
    std::mt19937_64 rng(424242);
    for (int trial = 0; trial < 10; ++trial) {
        const auto schedule = oracles::random_schedule(rng, {.n = 3, .pieces = 4});
        const Vec x0{0.0, 1.0, 2.0};
        const auto traj = propagate(schedule, x0, 0.0, schedule.horizon());
        const Vec ref = oracles::rk4_reference(schedule, x0, 0.0, schedule.horizon(), 1e-4);
        CHECK(oracles::max_abs_diff(traj.states.back(), ref) < 1e-6);
    }
}

TEST_CASE("Gronwall floor on artificial states") {
    // From x_j = 1 outside S and x_i = 0 on S, every outside agent stays
    // above e^{-nM} throughout the interval.
    const auto schedule = ScheduleGenerator::example1().materialize(20.0);
    const auto partition = IntervalPartition::from_times({0.0, 2.0, 4.0, 6.0, 8.0});
    const double m = interval_mass_bound(schedule, partition).M;
    for (int p = 0; p < partition.interval_count(); ++p) {
        for (unsigned mask = 1; mask < 15; ++mask) {
            Vec x0(4, 0.0);
            for (int i = 0; i < 4; ++i)
                if (!(mask & (1u << i))) x0[i] = 1.0;
            PropagateOptions opt;
            opt.max_sample_spacing = 0.1;
            const auto traj =
                propagate(schedule, x0, partition.times[p], partition.times[p + 1], opt);
            for (std::size_t k = 0; k < traj.times.size(); ++k)
                for (int i = 0; i < 4; ++i)
                    if (!(mask & (1u << i)))
                        CHECK(traj.states[k][i] >= std::exp(-4.0 * m) - 1e-9);
        }
    }
}

TEST_CASE("phi-bound check on the zero schedule holds with equality") {
    const auto schedule = zero_schedule(4, 8.0);
    auto partition = IntervalPartition::from_times({0.0, 4.0, 8.0});
    partition.M = interval_mass_bound(schedule, partition).M;
    const auto report = check_phi_bounds(schedule, partition, {0, 2}, 0);
    CHECK(report.cut_a == 0.0);
    CHECK(report.cut_phi == 0.0);
    CHECK(report.lower_ok);
    CHECK(report.upper_ok);
}

TEST_CASE("phi-bound check passes on example 1 and example 2 cuts") {
    const auto ex1 = ScheduleGenerator::example1().materialize(10.0);
    auto partition = IntervalPartition::from_times({0.0, 2.0, 4.0, 6.0, 8.0});
    partition.M = interval_mass_bound(ex1, partition).M;
    const auto r1 = check_phi_bounds(ex1, partition, {0, 1}, 2); // S = {1,2} over [4,6]
    CHECK(r1.lower_ok);
    CHECK(r1.upper_ok);
    CHECK(r1.cut_a > 0.0);

    const auto ex2 = ScheduleGenerator::example2().materialize(10.0);
    auto partition2 = IntervalPartition::from_times({0.0, 2.0, 4.0});
    partition2.M = interval_mass_bound(ex2, partition2).M;
    const auto r2 = check_phi_bounds(ex2, partition2, {1, 2, 3}, 1); // S = {2,3,4} over [2,4]
    CHECK(r2.lower_ok);
    CHECK(r2.upper_ok);
}

TEST_CASE("phi-bound check requires a certified mass bound") {
    const auto schedule = zero_schedule(4, 8.0);
    const auto partition = IntervalPartition::from_times({0.0, 8.0});
    CHECK_THROWS_AS((void)check_phi_bounds(schedule, partition, {0}, 0),
                    PartitionNotCertifiedError);
}

TEST_CASE("sampled cuts satisfy the discrete cut-balance constant n/G") {
    // the sampled system inherits cut balance with K' = n/G = n^2 e^{2nM}
    const auto schedule = ScheduleGenerator::example1().materialize(20.0);
    auto partition = IntervalPartition::uniform(20.0, 2.0);
    partition.M = interval_mass_bound(schedule, partition).M;
    const double k_prime = 16.0 * std::exp(2.0 * 4.0 * *partition.M);
    for (int p = 0; p < partition.interval_count(); ++p) {
        const Mat phi = transition_matrix(schedule, partition.times[p], partition.times[p + 1]).phi;
        for (unsigned mask = 1; mask < 15; ++mask) {
            double fwd = 0.0, rev = 0.0;
            for (int i = 0; i < 4; ++i) {
                if (!(mask & (1u << i))) continue;
                for (int j = 0; j < 4; ++j) {
                    if (mask & (1u << j)) continue;
                    fwd += phi(i, j);
                    rev += phi(j, i);
                }
            }
            if (fwd > 0.0) {
                CHECK(rev > 0.0);
                CHECK(fwd / rev <= k_prime);
            }
        }
    }
}

TEST_CASE("symmetric schedules conserve the average") {
    const auto schedule = symmetric_pair(1.5, 4.0);
    const auto report = conserved_average(schedule, {0.0, 1.0}, 0.0, 4.0);
    CHECK(report.is_symmetric);
    CHECK(report.drift <= 1e-9);
}

TEST_CASE("example1 is not instantaneously symmetric") {
    const auto schedule = ScheduleGenerator::example1().materialize(10.0);
    const auto report = conserved_average(schedule, {0.0, 1.0, 2.0, 3.0}, 2.0, 6.0);
    CHECK_FALSE(report.is_symmetric);
    CHECK(std::isfinite(report.drift));
}

TEST_CASE("zero schedule has zero drift") {
    const auto schedule = zero_schedule(3, 5.0);
    const auto report = conserved_average(schedule, {1.0, 2.0, 3.0}, 0.0, 5.0);
    CHECK(report.drift == 0.0);
}

TEST_CASE("propagate validates its inputs") {
    const auto schedule = zero_schedule(3, 5.0);
    CHECK_THROWS_AS((void)propagate(schedule, {1.0, 2.0}, 0.0, 5.0), OutOfRangeError);
    CHECK_THROWS_AS((void)propagate(schedule, {1.0, 2.0, 3.0}, 0.0, 6.0), OutOfRangeError);
    CHECK_THROWS_AS((void)propagate(schedule, {1.0, std::nan(""), 3.0}, 0.0, 5.0), NonFiniteError);
}

TEST_CASE("sample emission honors breakpoints and max spacing") {
    const auto schedule = ScheduleGenerator::example1().materialize(6.0);
    const auto coarse = propagate(schedule, {0.0, 1.0, 2.0, 3.0}, 0.0, 6.0);
    // breakpoints at 0, 2, 3, 4, 5, 6
    CHECK(coarse.times == std::vector<double>{0.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    PropagateOptions opt;
    opt.max_sample_spacing = 0.5;
    const auto fine = propagate(schedule, {0.0, 1.0, 2.0, 3.0}, 0.0, 6.0, opt);
    for (std::size_t k = 1; k < fine.times.size(); ++k)
        CHECK(fine.times[k] - fine.times[k - 1] <= 0.5 + 1e-12);
    CHECK(oracles::max_abs_diff(fine.states.back(), coarse.states.back()) < 1e-12);
}
