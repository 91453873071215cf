#include "control/control.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/errors.h"
#include "core/jsonio.h"
#include "core/rng.h"

namespace efc {

namespace {

void check_symmetric(const Mat& a, const char* name) {
    double scale = 1.0 + a.cwiseAbs().maxCoeff();
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-14 * scale)
        fail_usage(std::string(name) + " weight must be symmetric");
}

// Smallest singular value of [lambda*I - F, D], the PBH test matrix.
double pbh_min_sv(const Mat& f, const Mat& d, std::complex<double> lambda) {
    const int m = static_cast<int>(f.rows());
    const int k = static_cast<int>(d.cols());
    Eigen::MatrixXcd pencil(m, m + k);
    pencil.leftCols(m) = -f.cast<std::complex<double>>();
    pencil.leftCols(m).diagonal().array() += lambda;
    pencil.rightCols(k) = d.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pencil);
    return svd.singularValues().minCoeff();
}

void check_shapes(const Mat& f, const Mat& d) {
    if (f.rows() != f.cols()) fail_usage("F must be square");
    if (d.rows() != f.rows()) fail_usage("D row count must match F");
    if (d.cols() < 1) fail_usage("D needs at least one input column");
}

Eigen::VectorXcd sorted_eigs(const Mat& a) {
    Eigen::EigenSolver<Mat> es(a);
    if (es.info() != Eigen::Success) fail_numeric("eigen decomposition failed");
    Eigen::VectorXcd v = es.eigenvalues();
    std::sort(v.data(), v.data() + v.size(),
              [](const std::complex<double>& x, const std::complex<double>& y) {
                  return std::abs(x) > std::abs(y);
              });
    return v;
}

Mat riccati_rhs(const Mat& f, const Mat& d, const Mat& q, const Mat& r, const Mat& p) {
    Mat dtp = d.transpose() * p;
    Mat gain = (r + dtp * d).llt().solve(dtp * f);
    Mat next = q + f.transpose() * p * f - (dtp * f).transpose() * gain;
    return 0.5 * (next + next.transpose());
}

// Structure-preserving doubling for the DARE; quadratic convergence, used
// when plain iteration is too slow for the given spectrum.
Mat solve_dare_doubling(const Mat& f, const Mat& d, const Mat& q, const Mat& r, double tol) {
    const int m = static_cast<int>(f.rows());
    Mat a = f;
    Mat g = d * r.llt().solve(d.transpose());
    Mat h = q;
    for (int it = 0; it < 100; ++it) {
        Eigen::PartialPivLU<Mat> w(Mat::Identity(m, m) + g * h);
        Mat wa = w.solve(a);
        Mat wg = w.solve(g);
        Mat a1 = a * wa;
        Mat g1 = g + a * wg * a.transpose();
        Mat h1 = h + wa.transpose() * h * a;
        g1 = 0.5 * (g1 + g1.transpose());
        h1 = 0.5 * (h1 + h1.transpose());
        double delta = (h1 - h).cwiseAbs().maxCoeff();
        a = a1;
        g = g1;
        h = h1;
        if (delta <= tol * (1.0 + h.cwiseAbs().maxCoeff())) return h;
        if (!h.allFinite() || h.cwiseAbs().maxCoeff() > 1e12)
            fail_numeric("Riccati doubling iteration diverged");
    }
    fail_numeric("Riccati doubling iteration did not converge");
}

}  // namespace

void LqrSpec::validate(int m_states, int k_inputs) const {
    if (Q.rows() != m_states || Q.cols() != m_states) fail_usage("Q shape must match the state count");
    if (R.rows() != k_inputs || R.cols() != k_inputs) fail_usage("R shape must match the input count");
    check_symmetric(Q, "state");
    check_symmetric(R, "input");
    Eigen::SelfAdjointEigenSolver<Mat> eq(0.5 * (Q + Q.transpose()), Eigen::EigenvaluesOnly);
    if (eq.eigenvalues().minCoeff() < -1e-12 * (1.0 + eq.eigenvalues().cwiseAbs().maxCoeff()))
        fail_usage("Q must be positive semidefinite");
    Eigen::SelfAdjointEigenSolver<Mat> er(0.5 * (R + R.transpose()), Eigen::EigenvaluesOnly);
    if (er.eigenvalues().minCoeff() <= 0) fail_usage("R must be positive definite");
}

LqrSpec default_lqr_weights(int m_states, int k_inputs, double dt_report) {
    LqrSpec spec;
    spec.Q = 0.5 * Mat::Identity(m_states, m_states);
    spec.R = 10.0 * dt_report * dt_report * Mat::Identity(k_inputs, k_inputs);
    return spec;
}

std::vector<std::complex<double>> default_poles(int m_states) {
    std::vector<std::complex<double>> poles = {0.30, 0.425, 0.55, 0.675, 0.80};
    while (static_cast<int>(poles.size()) < m_states)
        poles.emplace_back(0.85 + 0.03 * (poles.size() - 5), 0.0);
    poles.resize(m_states);
    return poles;
}

Mat solve_dare(const Mat& f, const Mat& d, const LqrSpec& spec, const DareOptions& opt,
               DareInfo* info) {
    check_shapes(f, d);
    const int m = static_cast<int>(f.rows());
    const int k = static_cast<int>(d.cols());
    spec.validate(m, k);
    if (opt.tol <= 0 || opt.max_iter < 1) fail_usage("DARE options must be positive");

    const double scale = std::max(1.0, f.cwiseAbs().maxCoeff() + d.cwiseAbs().maxCoeff());
    for (const auto& lambda : sorted_eigs(f)) {
        if (std::abs(lambda) < 1.0 - 1e-12) continue;
        if (pbh_min_sv(f, d, lambda) <= 1e-10 * scale)
            fail_numeric("pair is not stabilizable: uncontrollable eigenvalue " +
                         format_double(lambda.real()) + (lambda.imag() >= 0 ? "+" : "-") +
                         format_double(std::abs(lambda.imag())) + "i with modulus >= 1");
    }

    Mat q = 0.5 * (spec.Q + spec.Q.transpose());
    Mat r = 0.5 * (spec.R + spec.R.transpose());
    Mat p = q;
    DareInfo local;
    bool settled = false;
    for (int it = 0; it < opt.max_iter; ++it) {
        Mat next = riccati_rhs(f, d, q, r, p);
        double delta = (next - p).cwiseAbs().maxCoeff();
        p = next;
        ++local.iterations;
        if (p.cwiseAbs().maxCoeff() > 1e12) fail_numeric("Riccati iteration diverged");
        if (delta <= opt.tol * (1.0 + p.cwiseAbs().maxCoeff())) {
            settled = true;
            break;
        }
    }
    if (!settled) {
        p = solve_dare_doubling(f, d, q, r, opt.tol);
        local.used_doubling = true;
    }
    local.residual = (riccati_rhs(f, d, q, r, p) - p).cwiseAbs().maxCoeff() /
                     (1.0 + p.cwiseAbs().maxCoeff());
    if (info) *info = local;
    return p;
}

ControllerGain dlqr_gain(const Mat& f, const Mat& d, const LqrSpec& spec,
                         const DareOptions& opt) {
    ControllerGain gain;
    gain.method = "dlqr";
    gain.spec = spec;
    gain.P = solve_dare(f, d, spec, opt, &gain.dare);
    Mat dtp = d.transpose() * gain.P;
    gain.K = (spec.R + dtp * d).llt().solve(dtp * f);
    gain.closed_loop_eigs = sorted_eigs(f - d * gain.K);
    if (std::abs(gain.closed_loop_eigs[0]) >= 1.0)
        fail_numeric("designed closed loop is not stable (spectral radius " +
                     format_double(std::abs(gain.closed_loop_eigs[0])) + ")");
    return gain;
}

Eigen::VectorXcd closed_loop_eigs(const Mat& f, const Mat& d, const Mat& k) {
    check_shapes(f, d);
    if (k.rows() != d.cols() || k.cols() != f.rows()) fail_usage("gain shape must be k x M");
    return sorted_eigs(f - d * k);
}

double multiset_eig_distance(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
    if (a.size() != b.size()) fail_usage("eigenvalue multisets differ in size");
    std::vector<bool> used(b.size(), false);
    double worst = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < b.size(); ++j) {
            if (used[j]) continue;
            double dist = std::abs(a[i] - b[j]);
            if (dist < best_d) {
                best_d = dist;
                best = j;
            }
        }
        used[best] = true;
        worst = std::max(worst, best_d);
    }
    return worst;
}

namespace {

// Real block-diagonal form of a conjugation-closed pole list. Real poles give
// 1x1 blocks, pairs give [[a, b], [-b, a]].
Mat real_block_diagonal(const std::vector<std::complex<double>>& poles) {
    const int m = static_cast<int>(poles.size());
    Mat lam = Mat::Zero(m, m);
    std::vector<bool> used(m, false);
    int pos = 0;
    for (int i = 0; i < m; ++i) {
        if (used[i]) continue;
        if (std::abs(poles[i].imag()) <= 1e-14) {
            lam(pos, pos) = poles[i].real();
            used[i] = true;
            pos += 1;
            continue;
        }
        int twin = -1;
        for (int j = i + 1; j < m; ++j) {
            if (!used[j] && std::abs(poles[j] - std::conj(poles[i])) <= 1e-12) {
                twin = j;
                break;
            }
        }
        if (twin < 0) fail_usage("target poles are not closed under conjugation");
        double a = poles[i].real(), b = std::abs(poles[i].imag());
        lam(pos, pos) = a;
        lam(pos, pos + 1) = b;
        lam(pos + 1, pos) = -b;
        lam(pos + 1, pos + 1) = a;
        used[i] = used[twin] = true;
        pos += 2;
    }
    return lam;
}

Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace

ControllerGain pole_place(const Mat& f, const Mat& d,
                          std::vector<std::complex<double>> poles, std::uint64_t seed,
                          const PolePlaceOptions& opt) {
    check_shapes(f, d);
    const int m = static_cast<int>(f.rows());
    const int k = static_cast<int>(d.cols());
    if (static_cast<int>(poles.size()) != m)
        fail_usage("need exactly one target pole per reduced state");

    ControllerGain gain;
    gain.method = "pole_placement";
    gain.seed = seed;

    for (size_t i = 0; i < poles.size(); ++i)
        for (size_t j = i + 1; j < poles.size(); ++j)
            if (std::abs(poles[i] - poles[j]) < 1e-12)
                fail_usage("target poles must be distinct");

    const double scale = std::max(1.0, f.cwiseAbs().maxCoeff() + d.cwiseAbs().maxCoeff());
    Eigen::VectorXcd f_eigs = sorted_eigs(f);
    for (const auto& lambda : f_eigs)
        if (pbh_min_sv(f, d, lambda) <= 1e-10 * scale)
            fail_numeric("pair is not controllable at eigenvalue " + format_double(lambda.real()) +
                         (lambda.imag() >= 0 ? "+" : "-") + format_double(std::abs(lambda.imag())) +
                         "i");

    // The Sylvester solve needs the target and open-loop spectra disjoint.
    for (auto& p : poles) {
        for (int pass = 0; pass < 5; ++pass) {
            bool collision = false;
            for (const auto& lambda : f_eigs)
                if (std::abs(p - lambda) < opt.collision_perturb) collision = true;
            if (!collision) break;
            p += opt.collision_perturb;
            gain.warnings.push_back("target pole collided with an open-loop eigenvalue; shifted to " +
                                    format_double(p.real()));
        }
    }
    gain.target_poles = poles;

    Eigen::VectorXcd targets(m);
    for (int i = 0; i < m; ++i) targets[i] = poles[i];
    Mat lam = real_block_diagonal(poles);
    Mat sylvester = kron(Mat::Identity(m, m), f) - kron(lam.transpose(), Mat::Identity(m, m));
    Eigen::PartialPivLU<Mat> lu(sylvester);

    Rng rng(seed);
    std::vector<double> conds;
    for (int attempt = 0; attempt < opt.max_retries; ++attempt) {
        Mat g = rng.normal_mat(k, m, 0.0, 1.0);
        Mat dg = d * g;
        Vec rhs = Eigen::Map<const Vec>(dg.data(), m * m);
        Vec xv = lu.solve(rhs);
        Mat x = Eigen::Map<const Mat>(xv.data(), m, m);

        Eigen::JacobiSVD<Mat> svd(x);
        double cond = svd.singularValues()(0) / svd.singularValues().minCoeff();
        conds.push_back(cond);
        if (!std::isfinite(cond) || cond > opt.cond_limit) continue;

        Mat kmat = x.transpose().partialPivLu().solve(g.transpose()).transpose();
        Eigen::VectorXcd achieved = sorted_eigs(f - d * kmat);
        if (multiset_eig_distance(targets, achieved) > opt.verify_tol) continue;

        gain.K = kmat;
        gain.closed_loop_eigs = achieved;
        if (std::abs(achieved[0]) >= 1.0)
            fail_numeric("placed closed loop is not stable (spectral radius " +
                         format_double(std::abs(achieved[0])) + ")");
        return gain;
    }
    std::string report;
    for (double c : conds) report += (report.empty() ? "" : ", ") + format_double(c);
    fail_numeric("pole placement exhausted retries; cond(X) per attempt: [" + report + "]");
}

void save_gain(const ControllerGain& gain, const std::string& path) {
    JsonWriter w;
    w.begin_object();
    w.kv("schema_version", 1);
    w.kv("method", gain.method);
    w.kv("provenance", gain.provenance);
    w.kv("K", gain.K);
    Vec re(gain.closed_loop_eigs.size()), im(gain.closed_loop_eigs.size());
    for (int i = 0; i < gain.closed_loop_eigs.size(); ++i) {
        re[i] = gain.closed_loop_eigs[i].real();
        im[i] = gain.closed_loop_eigs[i].imag();
    }
    w.kv("closed_loop_re", re);
    w.kv("closed_loop_im", im);
    if (gain.method == "dlqr") {
        w.kv("Q", gain.spec.Q);
        w.kv("R", gain.spec.R);
        w.kv("P", gain.P);
        w.kv("dare_iterations", gain.dare.iterations);
        w.kv("dare_used_doubling", gain.dare.used_doubling);
        w.kv("dare_residual", gain.dare.residual);
    } else {
        Vec pre(static_cast<int>(gain.target_poles.size()));
        Vec pim(static_cast<int>(gain.target_poles.size()));
        for (size_t i = 0; i < gain.target_poles.size(); ++i) {
            pre[static_cast<int>(i)] = gain.target_poles[i].real();
            pim[static_cast<int>(i)] = gain.target_poles[i].imag();
        }
        w.kv("poles_re", pre);
        w.kv("poles_im", pim);
        w.kv("seed", static_cast<std::int64_t>(gain.seed));
    }
    w.key("warnings");
    w.begin_array();
    for (const auto& s : gain.warnings) w.value(s);
    w.end_array();
    w.end_object();
    save_atomic(path, w.str());
}

ControllerGain load_gain(const std::string& path) {
    nlohmann::json j = load_json(path);
    const std::string ctx = "gain file " + path;
    if (require(j, "schema_version", ctx).get<int>() != 1)
        fail_io("unsupported gain schema_version in " + path);

    ControllerGain gain;
    gain.method = require(j, "method", ctx).get<std::string>();
    gain.provenance = require(j, "provenance", ctx).get<std::string>();
    gain.K = to_mat(require(j, "K", ctx));
    Vec re = to_vec(require(j, "closed_loop_re", ctx));
    Vec im = to_vec(require(j, "closed_loop_im", ctx));
    gain.closed_loop_eigs.resize(re.size());
    for (int i = 0; i < re.size(); ++i) gain.closed_loop_eigs[i] = {re[i], im[i]};
    if (gain.method == "dlqr") {
        gain.spec.Q = to_mat(require(j, "Q", ctx));
        gain.spec.R = to_mat(require(j, "R", ctx));
        gain.P = to_mat(require(j, "P", ctx));
        gain.dare.iterations = require(j, "dare_iterations", ctx).get<int>();
        gain.dare.used_doubling = require(j, "dare_used_doubling", ctx).get<bool>();
        gain.dare.residual = require(j, "dare_residual", ctx).get<double>();
    } else if (gain.method == "pole_placement") {
        Vec pre = to_vec(require(j, "poles_re", ctx));
        Vec pim = to_vec(require(j, "poles_im", ctx));
        for (int i = 0; i < pre.size(); ++i) gain.target_poles.emplace_back(pre[i], pim[i]);
        gain.seed = require(j, "seed", ctx).get<std::uint64_t>();
    } else {
        fail_io("unknown gain method in " + path);
    }
    for (const auto& s : require(j, "warnings", ctx)) gain.warnings.push_back(s.get<std::string>());
    return gain;
}

}  // namespace efc
