#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/errors.h"
#include "core/rng.h"
#include "plant/actuators.h"
#include "plant/bratu.h"
#include "plant/dataset.h"

using namespace efc;

namespace {
const double kPi = 3.14159265358979323846;

// Eigenvalue of the second-difference matrix with Dirichlet ends for the
// discrete sine mode sin(k pi x_j).
double lap_eig(int k, const Grid& g) {
    double s = std::sin(0.5 * k * kPi * g.h());
    return -4.0 / (g.h() * g.h()) * s * s;
}

Vec sine_mode(int k, const Grid& g) {
    Vec u(g.m);
    for (int j = 0; j < g.m; ++j) u[j] = std::sin(k * kPi * g.x(j));
    u[0] = 0.0;
    u[g.m - 1] = 0.0;
    return u;
}
}  // namespace

TEST_CASE("substep count and validation") {
    BratuParams p;
    CHECK(p.substeps() == 10);
    p.dt_inner = 2.5e-4;
    CHECK(p.substeps() == 4);
    p.dt_inner = 3e-4;
    CHECK_THROWS_AS(p.substeps(), Error);
    p = BratuParams{};
    p.m = 2;
    CHECK_THROWS_AS(p.validate(), Error);
    p = BratuParams{};
    p.dt_report = -1.0;
    CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("boundary values stay pinned to zero") {
    BratuParams p;
    Rng rng(3);
    Vec u = rng.uniform_vec(p.m, -0.5, 0.5);
    Vec out = bratu_step(u, p);
    CHECK(out[0] == 0.0);
    CHECK(out[p.m - 1] == 0.0);
    Vec f = rng.uniform_vec(p.m, -1.0, 1.0);
    out = bratu_step_forced(u, f, p);
    CHECK(out[0] == 0.0);
    CHECK(out[p.m - 1] == 0.0);
}

TEST_CASE("pure diffusion matches the discrete mode decay exactly") {
    BratuParams p;
    p.lambda = 0.0;
    const Grid g = p.grid();
    for (int k : {1, 3, 7}) {
        Vec u = sine_mode(k, g);
        double factor = std::pow(1.0 + p.dt_inner * lap_eig(k, g), p.substeps());
        Vec expect = factor * u;
        Vec got = bratu_step(u, p);
        CHECK((got - expect).lpNorm<Eigen::Infinity>() < 1e-13);
    }
}

TEST_CASE("forcing is held constant across substeps") {
    // With lambda = 0 and u0 = 0 the response to a sine forcing is the
    // geometric sum dt * ((1+a)^n - 1)/a along the same mode.
    BratuParams p;
    p.lambda = 0.0;
    const Grid g = p.grid();
    Vec f = sine_mode(2, g);
    double a = p.dt_inner * lap_eig(2, g);
    double gain = p.dt_inner * (std::pow(1.0 + a, p.substeps()) - 1.0) / a;
    Vec got = bratu_step_forced(Vec::Zero(p.m), f, p);
    CHECK((got - gain * f).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("forced step reduces to the unforced step at zero input") {
    BratuParams p;
    Vec u = sine_mode(1, p.grid());
    Vec a = bratu_step(u, p);
    Vec b = bratu_step_forced(u, Vec::Zero(p.m), p);
    CHECK((a - b).norm() == 0.0);
}

TEST_CASE("state length is checked") {
    BratuParams p;
    CHECK_THROWS_AS(bratu_step(Vec::Zero(p.m + 1), p), Error);
    CHECK_THROWS_AS(bratu_step_forced(Vec::Zero(p.m), Vec::Zero(p.m - 1), p), Error);
}

TEST_CASE("steady branch roots at lambda = 2") {
    // cosh(theta) = 4 theta / sqrt(2 lambda) has two roots below the fold.
    double lo = steady_theta(2.0, SteadyBranch::lower);
    double up = steady_theta(2.0, SteadyBranch::upper);
    CHECK(lo == doctest::Approx(0.5893877634693505).epsilon(1e-12));
    CHECK(up == doctest::Approx(2.1267998926782568).epsilon(1e-12));
    double c = 4.0 / std::sqrt(4.0);
    CHECK(std::abs(std::cosh(lo) - c * lo) < 1e-12);
    CHECK(std::abs(std::cosh(up) - c * up) < 1e-12);
}

TEST_CASE("no analytic branch at or above the fold") {
    const double fold = 3.513830719125161;
    CHECK_THROWS_AS(steady_theta(fold + 1e-6, SteadyBranch::lower), Error);
    CHECK_THROWS_AS(steady_theta(5.0, SteadyBranch::upper), Error);
    CHECK_THROWS_AS(steady_theta(-1.0, SteadyBranch::lower), Error);
    // Just below the fold both branches still exist and nearly coincide.
    double lo = steady_theta(fold - 1e-3, SteadyBranch::lower);
    double up = steady_theta(fold - 1e-3, SteadyBranch::upper);
    CHECK(lo < up);
    CHECK(up - lo < 0.2);
}

TEST_CASE("analytic steady profile properties") {
    BratuParams p;
    Vec u = analytic_steady_state(p, SteadyBranch::lower);
    CHECK(u[0] == 0.0);
    CHECK(u[p.m - 1] == 0.0);
    // Symmetric about x = 1/2 and peaked there.
    for (int j = 0; j < p.m; ++j) CHECK(u[j] == doctest::Approx(u[p.m - 1 - j]).epsilon(1e-13));
    int mid = (p.m - 1) / 2;
    CHECK(u[mid] == u.maxCoeff());
    double theta = steady_theta(2.0, SteadyBranch::lower);
    CHECK(u[mid] == doctest::Approx(2.0 * std::log(std::cosh(theta))).epsilon(1e-12));
    // It is nearly a fixed point of the coarse step; the leftover is the
    // spatial truncation error of the second-order stencil.
    Vec moved = bratu_step(u, p);
    CHECK((moved - u).lpNorm<Eigen::Infinity>() < 1e-4);
}

TEST_CASE("upper branch profile is larger and farther from fixed") {
    BratuParams p;
    Vec lo = analytic_steady_state(p, SteadyBranch::lower);
    Vec up = analytic_steady_state(p, SteadyBranch::upper);
    CHECK(up.maxCoeff() > 2.0 * lo.maxCoeff());
    CHECK(up.maxCoeff() < 6.0);
}

TEST_CASE("actuator matrix shape and values") {
    Grid g;
    ActuatorConfig cfg;
    Mat b = actuator_matrix(g, cfg);
    REQUIRE(b.rows() == g.m);
    REQUIRE(b.cols() == 3);
    // Dirichlet rows are zeroed.
    CHECK(b.row(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(b.row(g.m - 1).cwiseAbs().maxCoeff() == 0.0);
    // The middle actuator sits exactly on node 25.
    CHECK(b(25, 1) == doctest::Approx(1.0).epsilon(1e-15));
    // Off-center value of the first actuator, one explicit Gaussian sample.
    double expect = std::exp(-std::pow(g.x(12) - 0.25, 2) / (2.0 * 0.05 * 0.05));
    CHECK(b(12, 0) == doctest::Approx(expect).epsilon(1e-15));
    // Columns decay quickly away from their centers.
    CHECK(b(1, 2) < 1e-10);
    CHECK_THROWS_AS(actuator_matrix(g, ActuatorConfig{{0.5}, 0.0}), Error);
    CHECK_THROWS_AS(actuator_matrix(g, ActuatorConfig{{1.5}, 0.05}), Error);
}

TEST_CASE("initial condition family") {
    Grid g;
    BratuParams p;
    DatasetConfig cfg;
    Vec base = analytic_steady_state(p, SteadyBranch::upper);
    Rng rng(11);
    bool above = false, below = false;
    for (int i = 0; i < 20; ++i) {
        Vec u = sample_initial_condition(base, g, cfg, rng);
        REQUIRE(u.size() == g.m);
        CHECK(std::abs(u[0]) < 1e-14);
        CHECK(std::abs(u[g.m - 1]) < 1e-14);
        // Amplitude bound: amp_max * base peak + sum_j extra_amp/j.
        double harmonic = 0.0;
        for (int j = 1; j <= cfg.extra_modes; ++j) harmonic += 1.0 / j;
        double bound = cfg.amp_max * base.lpNorm<Eigen::Infinity>() + cfg.extra_amp * harmonic;
        CHECK(u.lpNorm<Eigen::Infinity>() <= bound + 1e-12);
        // The family straddles the tall profile.
        double mid = u[g.m / 2];
        above = above || mid > base[g.m / 2];
        below = below || mid < base[g.m / 2];
    }
    CHECK(above);
    CHECK(below);
    Rng rng2(11);
    CHECK_THROWS_AS(sample_initial_condition(Vec::Zero(g.m + 1), g, cfg, rng2), Error);
}

TEST_CASE("dataset generation: exact size, bound, pairing, determinism") {
    BratuParams plant;
    DatasetConfig cfg;
    cfg.n_traj = 12;
    cfg.steps = 25;
    Dataset d = generate_dataset(plant, cfg, 8101);
    REQUIRE(d.X.cols() == 12 * 25);
    REQUIRE(d.Y.cols() == d.X.cols());
    REQUIRE(d.X.rows() == plant.m);
    CHECK(d.max_abs_state <= cfg.state_bound);
    CHECK(d.X.cwiseAbs().maxCoeff() <= cfg.state_bound);
    CHECK(d.Y.cwiseAbs().maxCoeff() <= cfg.state_bound);

    // Each Y column is the coarse step of its X column.
    for (int c : {0, 7, 12 * 25 - 1}) {
        Vec expect = bratu_step(d.X.col(c), plant);
        CHECK((d.Y.col(c) - expect).lpNorm<Eigen::Infinity>() < 1e-14);
    }
    // Consecutive pairs within one trajectory chain together.
    CHECK((d.X.col(1) - d.Y.col(0)).lpNorm<Eigen::Infinity>() < 1e-14);

    Dataset d2 = generate_dataset(plant, cfg, 8101);
    CHECK((d.X - d2.X).cwiseAbs().maxCoeff() == 0.0);
    CHECK((d.Y - d2.Y).cwiseAbs().maxCoeff() == 0.0);
    Dataset d3 = generate_dataset(plant, cfg, 8102);
    CHECK((d.X - d3.X).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("dataset drops exploding trajectories and redraws") {
    BratuParams plant;
    DatasetConfig cfg;
    cfg.n_traj = 40;
    cfg.steps = 30;
    // Amplitudes this large overshoot the attracting basin, so a good chunk
    // of the draws blow up and must be redrawn, yet every kept trajectory
    // still honors the bound.
    cfg.amp_max = 8.0;
    Dataset d = generate_dataset(plant, cfg, 8101);
    CHECK(d.discarded > 0);
    CHECK(d.X.cols() == 40 * 30);
    CHECK(d.max_abs_state <= cfg.state_bound);

    // An impossible bound exhausts the attempt budget with a numeric error.
    DatasetConfig hopeless = cfg;
    hopeless.n_traj = 2;
    hopeless.state_bound = 1e-3;
    hopeless.max_attempts_factor = 3;
    CHECK_THROWS_AS(generate_dataset(plant, hopeless, 8101), Error);
}

TEST_CASE("dataset config validation") {
    DatasetConfig cfg;
    cfg.n_traj = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = DatasetConfig{};
    cfg.steps = -1;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = DatasetConfig{};
    cfg.state_bound = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
