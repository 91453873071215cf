#include "reduction/reduction.h"

#include <cmath>

#include "core/errors.h"
#include "core/jsonio.h"

namespace efc {

Vec ReducedModel::project(const Vec& u) const {
    if (u.size() != u_ss.size()) fail_usage("state length does not match the reduced model");
    return V.transpose() * (u - u_ss);
}

Mat slow_basis(const SpectrumResult& spec, int m_slow, bool* expanded,
               std::vector<std::string>* warnings) {
    const int steps = spec.steps;
    if (m_slow < 1) fail_usage("m_slow must be positive");
    if (m_slow > steps) fail_usage("m_slow exceeds the computed Ritz set");

    const int n = static_cast<int>(spec.vectors.rows());
    Mat raw(n, m_slow + 1);
    int cols = 0, i = 0;
    while (cols < m_slow && i < steps) {
        const auto mu = spec.values[i];
        if (spec.residual_estimates[i] > 1e-4 && warnings)
            warnings->push_back("Ritz residual " + format_double(spec.residual_estimates[i]) +
                                " for mode " + std::to_string(i) + " exceeds 1e-4");
        if (std::abs(mu.imag()) <= 1e-12 * std::max(1.0, std::abs(mu))) {
            raw.col(cols++) = spec.vectors.col(i).real();
            i += 1;
        } else {
            // Conjugate twin carries no new information; take the plane once.
            raw.col(cols++) = spec.vectors.col(i).real();
            raw.col(cols++) = spec.vectors.col(i).imag();
            i += 2;
        }
    }
    if (cols < m_slow) fail_numeric("Ritz set too small to span the requested slow subspace");
    if (expanded) *expanded = cols > m_slow;

    Eigen::HouseholderQR<Mat> qr(raw.leftCols(cols));
    Mat q = qr.householderQ() * Mat::Identity(n, cols);
    Mat r = qr.matrixQR().topLeftCorner(cols, cols).triangularView<Eigen::Upper>();
    for (int j = 0; j < cols; ++j) {
        if (std::abs(r(j, j)) < 1e-10 * std::abs(r(0, 0)) && warnings)
            warnings->push_back("slow basis is near rank-deficient at column " + std::to_string(j));
        int idx;
        q.col(j).cwiseAbs().maxCoeff(&idx);
        if (q(idx, j) < 0) q.col(j) = -q.col(j);
    }
    return q;
}

Mat actuator_jacobian(const ForcedStep& step, const Vec& u_ss, int k, double eps) {
    if (k < 1) fail_usage("need at least one actuator");
    if (eps <= 0 || 1.0 + eps == 1.0) fail_usage("actuator Jacobian step underflows");
    const Vec base = step(u_ss, Vec::Zero(k));
    if (!base.allFinite()) fail_numeric("forced step returned non-finite values");
    Mat h(u_ss.size(), k);
    for (int i = 0; i < k; ++i) {
        Vec z = Vec::Zero(k);
        z[i] = eps;
        Vec out = step(u_ss, z);
        if (!out.allFinite()) fail_numeric("forced step returned non-finite values");
        h.col(i) = (out - base) / eps;
    }
    return h;
}

namespace {

// Real eigenvector matrix of a small real matrix: real eigenvectors as-is,
// complex pairs as their real and imaginary parts once.
Mat real_eigenvector_matrix(const Mat& f, bool* ok) {
    const int n = static_cast<int>(f.rows());
    Eigen::EigenSolver<Mat> es(f);
    *ok = es.info() == Eigen::Success;
    if (!*ok) return Mat::Identity(n, n);

    Mat vf(n, n);
    int col = 0, i = 0;
    while (i < n && col < n) {
        const auto lam = es.eigenvalues()[i];
        if (std::abs(lam.imag()) <= 1e-12 * std::max(1.0, std::abs(lam))) {
            vf.col(col++) = es.eigenvectors().col(i).real();
            i += 1;
        } else {
            vf.col(col++) = es.eigenvectors().col(i).real();
            if (col < n) vf.col(col++) = es.eigenvectors().col(i).imag();
            i += 2;
        }
    }
    *ok = col == n;
    return vf;
}

}  // namespace

Mat reduced_D(const Mat& v, const Mat& h, const Mat& f, const std::string& mode,
              std::vector<std::string>* warnings) {
    if (v.rows() != h.rows()) fail_usage("basis and actuator Jacobian row counts differ");
    if (f.rows() != f.cols() || f.rows() != v.cols())
        fail_usage("reduced dynamics shape does not match the basis");
    Mat d = v.transpose() * h;
    if (mode == "consistent") return d;
    if (mode != "paper_vf") fail_usage("unknown D mode: " + mode);

    bool ok = false;
    Mat vf = real_eigenvector_matrix(f, &ok);
    if (ok) {
        Eigen::JacobiSVD<Mat> svd(vf);
        ok = svd.singularValues().minCoeff() >
             1e-12 * std::max(1.0, svd.singularValues().maxCoeff());
    }
    if (!ok) {
        if (warnings)
            warnings->push_back(
                "eigenvector matrix of F is numerically singular; using consistent D mode");
        return d;
    }
    return vf * d;
}

ReducedModel build_reduced_model(const StepMap& step, const ForcedStep& forced_step,
                                 int k_inputs, const Vec& u_ss,
                                 const ReductionOptions& opt,
                                 const std::string& provenance) {
    const int n = static_cast<int>(u_ss.size());
    Vec s0 = step(u_ss);
    if (!s0.allFinite()) fail_numeric("stepper returned non-finite values at the fixed point");
    const double fp_resid = (u_ss - s0).norm();
    if (fp_resid > opt.fixed_point_tol)
        fail_usage("u_ss is not a fixed point of this plant (residual " +
                   format_double(fp_resid) + ")");

    LinOp jac = [&](const Vec& v) { return jvp(step, u_ss, v, &s0, opt.central_diff); };
    ArnoldiOptions aopt;
    aopt.m_k = std::min(opt.m_k, n);
    SpectrumResult spec = arnoldi_spectrum(jac, n, aopt);

    ReducedModel model;
    model.u_ss = u_ss;
    model.provenance = provenance;
    model.d_mode = opt.d_mode;
    model.m_slow_requested = opt.m_slow;
    model.ritz = spec.values;
    model.ritz_residuals = spec.residual_estimates;
    model.V = slow_basis(spec, opt.m_slow, &model.expanded, &model.warnings);

    const int m = model.m_slow();
    Mat jv(n, m);
    for (int j = 0; j < m; ++j) jv.col(j) = jac(model.V.col(j));
    model.F = model.V.transpose() * jv;
    model.subspace_residual = (jv - model.V * model.F).norm();

    model.H = actuator_jacobian(forced_step, u_ss, k_inputs, opt.h_eps);
    model.D = reduced_D(model.V, model.H, model.F, opt.d_mode, &model.warnings);
    return model;
}

void save_reduced_model(const ReducedModel& model, const std::string& path) {
    JsonWriter w;
    w.begin_object();
    w.kv("schema_version", 1);
    w.kv("provenance", model.provenance);
    w.kv("d_mode", model.d_mode);
    w.kv("m_slow", model.m_slow());
    w.kv("m_slow_requested", model.m_slow_requested);
    w.kv("expanded", model.expanded);
    w.kv("subspace_residual", model.subspace_residual);
    w.kv("u_ss", model.u_ss);
    w.kv("V_M", model.V);
    w.kv("F", model.F);
    w.kv("H", model.H);
    w.kv("D", model.D);
    Vec re(model.ritz.size()), im(model.ritz.size());
    for (int i = 0; i < model.ritz.size(); ++i) {
        re[i] = model.ritz[i].real();
        im[i] = model.ritz[i].imag();
    }
    w.kv("ritz_re", re);
    w.kv("ritz_im", im);
    w.key("ritz_residuals");
    w.begin_array();
    for (double r : model.ritz_residuals) w.value(r);
    w.end_array();
    w.key("warnings");
    w.begin_array();
    for (const auto& s : model.warnings) w.value(s);
    w.end_array();
    w.end_object();
    save_atomic(path, w.str());
}

ReducedModel load_reduced_model(const std::string& path) {
    nlohmann::json j = load_json(path);
    const std::string ctx = "reduced model file " + path;
    if (require(j, "schema_version", ctx).get<int>() != 1)
        fail_io("unsupported reduced model schema_version in " + path);

    ReducedModel model;
    model.provenance = require(j, "provenance", ctx).get<std::string>();
    model.d_mode = require(j, "d_mode", ctx).get<std::string>();
    model.m_slow_requested = require(j, "m_slow_requested", ctx).get<int>();
    model.expanded = require(j, "expanded", ctx).get<bool>();
    model.subspace_residual = require(j, "subspace_residual", ctx).get<double>();
    model.u_ss = to_vec(require(j, "u_ss", ctx));
    model.V = to_mat(require(j, "V_M", ctx));
    model.F = to_mat(require(j, "F", ctx));
    model.H = to_mat(require(j, "H", ctx));
    model.D = to_mat(require(j, "D", ctx));
    Vec re = to_vec(require(j, "ritz_re", ctx));
    Vec im = to_vec(require(j, "ritz_im", ctx));
    model.ritz.resize(re.size());
    for (int i = 0; i < re.size(); ++i) model.ritz[i] = {re[i], im[i]};
    for (const auto& r : require(j, "ritz_residuals", ctx)) model.ritz_residuals.push_back(r.get<double>());
    for (const auto& s : require(j, "warnings", ctx)) model.warnings.push_back(s.get<std::string>());
    if (model.V.cols() != model.F.rows() || model.F.rows() != model.F.cols() ||
        model.D.rows() != model.F.rows() || model.H.rows() != model.V.rows())
        fail_io("reduced model dimensions are inconsistent in " + path);
    return model;
}

}  // namespace efc
