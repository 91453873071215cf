#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>

#include "core/errors.h"
#include "core/rng.h"
#include "krylov/krylov.h"
#include "plant/actuators.h"
#include "plant/bratu.h"
#include "plant/dataset.h"
#include "randonet/randonet.h"
#include "reduction/reduction.h"

using namespace efc;

namespace {

LinOp dense_op(const Mat& a) {
    return [a](const Vec& v) { return Vec(a * v); };
}

// The unstable upper-branch fixed point, found by seeding Newton just above
// its closed-form profile.
Vec fd_steady_state(const BratuParams& p) {
    NewtonOptions opt;
    opt.tol_res = 1e-12;
    Vec guess = 1.05 * analytic_steady_state(p, SteadyBranch::upper);
    NewtonResult r =
        newton_fixed_point([p](const Vec& u) { return bratu_step(u, p); }, guess, opt);
    REQUIRE(r.converged);
    return r.u;
}

}  // namespace

TEST_CASE("slow basis of a diagonal operator is the leading coordinate axis") {
    Mat a = Mat::Zero(3, 3);
    a.diagonal() << 2.0, 0.5, 0.1;
    SpectrumResult spec = arnoldi_spectrum(dense_op(a), 3, {3});
    bool expanded = true;
    Mat v = slow_basis(spec, 1, &expanded, nullptr);
    REQUIRE(v.cols() == 1);
    CHECK_FALSE(expanded);
    // Sign canonicalization makes the dominant entry positive.
    CHECK(std::abs(v(0, 0) - 1.0) < 1e-10);
    CHECK(v.col(0).tail(2).norm() < 1e-10);
}

TEST_CASE("complex pair contributes its plane once") {
    Mat a = Mat::Zero(4, 4);
    a(0, 0) = 0.9;
    a(0, 1) = 0.5;
    a(1, 0) = -0.5;
    a(1, 1) = 0.9;  // modulus ~1.03 pair
    a(2, 2) = 0.3;
    a(3, 3) = 0.1;
    SpectrumResult spec = arnoldi_spectrum(dense_op(a), 4, {4});
    bool expanded = false;
    Mat v = slow_basis(spec, 2, &expanded, nullptr);
    REQUIRE(v.cols() == 2);
    CHECK_FALSE(expanded);
    Mat proj = v * v.transpose();
    Mat expect = Mat::Zero(4, 4);
    expect(0, 0) = 1.0;
    expect(1, 1) = 1.0;
    CHECK((proj - expect).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("pair straddling the cutoff widens the basis and flags it") {
    Mat a = Mat::Zero(4, 4);
    a(0, 0) = 0.9;
    a(0, 1) = 0.5;
    a(1, 0) = -0.5;
    a(1, 1) = 0.9;
    a(2, 2) = 0.3;
    a(3, 3) = 0.1;
    SpectrumResult spec = arnoldi_spectrum(dense_op(a), 4, {4});
    bool expanded = false;
    Mat v = slow_basis(spec, 1, &expanded, nullptr);
    CHECK(expanded);
    REQUIRE(v.cols() == 2);
    Mat gram = v.transpose() * v;
    CHECK((gram - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("slow basis warnings: large Ritz residual and rank deficiency") {
    SpectrumResult fake;
    fake.steps = 2;
    fake.values.resize(2);
    fake.values << std::complex<double>(1.0, 0.0), std::complex<double>(0.9, 0.0);
    fake.vectors = Eigen::MatrixXcd::Zero(3, 2);
    fake.vectors(0, 0) = 1.0;
    fake.vectors(0, 1) = 1.0;  // duplicate direction
    fake.residual_estimates = {2e-3, 0.0};

    std::vector<std::string> warnings;
    bool expanded = false;
    slow_basis(fake, 2, &expanded, &warnings);
    REQUIRE(warnings.size() >= 2);
    CHECK(warnings[0].find("Ritz residual") != std::string::npos);
    bool saw_rank = false;
    for (const auto& w : warnings) saw_rank = saw_rank || w.find("rank") != std::string::npos;
    CHECK(saw_rank);

    CHECK_THROWS_AS(slow_basis(fake, 0, &expanded, nullptr), Error);
    CHECK_THROWS_AS(slow_basis(fake, 5, &expanded, nullptr), Error);
}

TEST_CASE("actuator jacobian recovers the influence matrix of a linear plant") {
    Rng rng(40);
    Mat h_true = rng.uniform_mat(8, 3, -1.0, 1.0);
    ForcedStep step = [&h_true](const Vec& u, const Vec& z) { return Vec(0.5 * u + h_true * z); };
    Mat h = actuator_jacobian(step, rng.uniform_vec(8, -1.0, 1.0), 3, 1e-6);
    CHECK((h - h_true).cwiseAbs().maxCoeff() < 1e-9);
    CHECK_THROWS_AS(actuator_jacobian(step, Vec::Zero(8), 0, 1e-6), Error);
    CHECK_THROWS_AS(actuator_jacobian(step, Vec::Zero(8), 3, 0.0), Error);
}

TEST_CASE("reduced D modes: consistent, eigenvector-aligned, and the fallback") {
    Rng rng(41);
    Mat v = Mat::Identity(4, 2);
    Mat h = rng.uniform_mat(4, 3, -1.0, 1.0);

    Mat f = Mat::Zero(2, 2);
    f.diagonal() << 0.9, 0.5;
    Mat d_cons = reduced_D(v, h, f, "consistent", nullptr);
    CHECK((d_cons - v.transpose() * h).cwiseAbs().maxCoeff() == 0.0);

    // Diagonal F has axis eigenvectors, so the aligned mode can only flip
    // row signs.
    std::vector<std::string> warnings;
    Mat d_vf = reduced_D(v, h, f, "paper_vf", &warnings);
    CHECK(warnings.empty());
    CHECK((d_vf.cwiseAbs() - d_cons.cwiseAbs()).cwiseAbs().maxCoeff() < 1e-12);

    // A Jordan block has a defective eigenvector matrix: fall back, warn.
    Mat jordan(2, 2);
    jordan << 0.9, 1.0, 0.0, 0.9;
    Mat d_fb = reduced_D(v, h, jordan, "paper_vf", &warnings);
    CHECK(!warnings.empty());
    CHECK((d_fb - d_cons).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(reduced_D(v, h, f, "other", nullptr), Error);
}

TEST_CASE("full-basis reduction of a linear map recovers its matrix") {
    Rng rng(42);
    Mat a = 0.1 * rng.uniform_mat(6, 6, -1.0, 1.0);
    a.diagonal().array() += 0.5;
    Vec b = rng.uniform_vec(6, -0.2, 0.2);
    Vec u_ss = (Mat::Identity(6, 6) - a).lu().solve(b);
    Mat h_true = rng.uniform_mat(6, 2, -1.0, 1.0);

    StepMap step = [&](const Vec& u) { return Vec(a * u + b); };
    ForcedStep forced = [&](const Vec& u, const Vec& z) { return Vec(a * u + b + h_true * z); };

    ReductionOptions opt;
    opt.m_slow = 6;
    opt.m_k = 6;
    ReducedModel model = build_reduced_model(step, forced, 2, u_ss, opt, "fd");
    REQUIRE(model.m_slow() == 6);
    // V is orthonormal and spans everything, so V F V^T must equal A.
    Mat back = model.V * model.F * model.V.transpose();
    CHECK((back - a).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((model.H - h_true).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(model.subspace_residual < 1e-7);
}

TEST_CASE("fixed point precondition is enforced") {
    StepMap step = [](const Vec& u) { return Vec(0.5 * u); };
    ForcedStep forced = [](const Vec& u, const Vec& z) { return Vec(0.5 * u); };
    ReductionOptions opt;
    opt.m_slow = 2;
    opt.m_k = 3;
    CHECK_THROWS_AS(build_reduced_model(step, forced, 1, Vec::Ones(5), opt, "fd"), Error);
}

TEST_CASE("plant reduction: slow subspace quality and actuator response") {
    BratuParams p;
    Vec u_ss = fd_steady_state(p);
    Mat b_act = actuator_matrix(p.grid(), ActuatorConfig{});

    StepMap step = [p](const Vec& u) { return bratu_step(u, p); };
    ForcedStep forced = [&](const Vec& u, const Vec& z) {
        return bratu_step_forced(u, Vec(b_act * z), p);
    };

    ReductionOptions opt;
    ReducedModel model = build_reduced_model(step, forced, 3, u_ss, opt, "fd");
    REQUIRE(model.m_slow() == 5);
    CHECK_FALSE(model.expanded);
    CHECK(model.provenance == "fd");

    Mat gram = model.V.transpose() * model.V;
    CHECK((gram - Mat::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(model.subspace_residual < 1e-5);

    // Reduced dynamics carries the leading Ritz values.
    Eigen::VectorXcd ef = Eigen::EigenSolver<Mat>(model.F).eigenvalues();
    for (int i = 0; i < 5; ++i) {
        double best = 1e9;
        for (int j = 0; j < ef.size(); ++j) best = std::min(best, std::abs(ef[j] - model.ritz[i]));
        CHECK(best < 1e-6);
    }
    // Exactly one slow multiplier outside the unit circle.
    int unstable = 0;
    for (int j = 0; j < ef.size(); ++j) unstable += std::abs(ef[j]) > 1.0;
    CHECK(unstable == 1);

    // One forced coarse step responds nearly like dt * B, damped a little by
    // diffusion over the substeps.
    double dev = (model.H - p.dt_report * b_act).cwiseAbs().maxCoeff();
    CHECK(dev < 0.2 * p.dt_report * b_act.cwiseAbs().maxCoeff());
    CHECK(dev > 0.0);

    // Step size robustness of the actuator response.
    ReductionOptions opt2 = opt;
    opt2.h_eps = 2e-6;
    Mat h2 = actuator_jacobian(forced, u_ss, 3, opt2.h_eps);
    CHECK((h2 - model.H).cwiseAbs().maxCoeff() < 1e-5 * model.H.cwiseAbs().maxCoeff());

    // Projection basics.
    CHECK(model.project(u_ss).norm() < 1e-14);
    Vec y = Vec::LinSpaced(5, -0.1, 0.1);
    CHECK((model.project(u_ss + model.V * y) - y).norm() < 1e-12);

    // Reduced one-step consistency for a small slow perturbation.
    Vec y0 = 1e-4 * Vec::Ones(5) / std::sqrt(5.0);
    Vec y1 = model.project(step(u_ss + model.V * y0));
    CHECK((y1 - model.F * y0).norm() < 1e-6 * y0.norm());
}

TEST_CASE("surrogate forced step recovers its own influence matrix") {
    BratuParams p;
    DatasetConfig dcfg;
    dcfg.n_traj = 10;
    dcfg.steps = 30;
    Dataset data = generate_dataset(p, dcfg, 900);
    RandONetConfig cfg;
    cfg.n_trunk = 60;
    cfg.m_branch = 300;
    RandONet net = RandONet::train(data, p.grid(), p.dt_report, cfg, 901);
    Mat b_act = actuator_matrix(p.grid(), ActuatorConfig{});

    // Additive forcing on top of the learned step: the finite-difference
    // response must return the forcing matrix itself to rounding accuracy.
    ForcedStep forced = [&](const Vec& u, const Vec& z) {
        Vec out = net.predict(u) + p.dt_report * (b_act * z);
        out[0] = 0.0;
        out[p.m - 1] = 0.0;
        return out;
    };
    Mat h = actuator_jacobian(forced, Vec::Zero(p.m), 3, 1e-6);
    CHECK((h - p.dt_report * b_act).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("reduced model save and load round-trip") {
    Rng rng(50);
    Mat a = 0.1 * rng.uniform_mat(5, 5, -1.0, 1.0);
    a.diagonal().array() += 0.4;
    Mat h_true = rng.uniform_mat(5, 2, -1.0, 1.0);
    StepMap step = [&](const Vec& u) { return Vec(a * u); };
    ForcedStep forced = [&](const Vec& u, const Vec& z) { return Vec(a * u + h_true * z); };
    ReductionOptions opt;
    opt.m_slow = 3;
    opt.m_k = 5;
    ReducedModel model = build_reduced_model(step, forced, 2, Vec::Zero(5), opt, "surrogate");

    std::string path = (std::filesystem::temp_directory_path() / "efc_reduced.json").string();
    save_reduced_model(model, path);
    ReducedModel loaded = load_reduced_model(path);
    CHECK(loaded.provenance == "surrogate");
    CHECK(loaded.d_mode == model.d_mode);
    CHECK(loaded.m_slow() == model.m_slow());
    CHECK((loaded.V - model.V).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.F - model.F).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.H - model.H).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.D - model.D).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(loaded.ritz.size() == model.ritz.size());
    CHECK(std::abs(loaded.ritz[0] - model.ritz[0]) == 0.0);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_reduced_model(path), Error);
}
