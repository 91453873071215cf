#include "krylov/krylov.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "core/errors.h"

namespace efc {

double jvp_epsilon(const Vec& u) {
    return std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + u.norm());
}

Vec jvp(const StepMap& S, const Vec& u, const Vec& v, const Vec* su, bool central) {
    const double vn = v.norm();
    if (vn == 0.0) return Vec::Zero(u.size());
    const double eps = jvp_epsilon(u);
    const Vec vh = v / vn;

    Vec out;
    if (central) {
        out = (S(u + eps * vh) - S(u - eps * vh)) * (vn / (2.0 * eps));
    } else {
        Vec s0 = su ? *su : S(u);
        out = (S(u + eps * vh) - s0) * (vn / eps);
    }
    if (!out.allFinite()) fail_numeric("stepper returned non-finite values during differentiation");
    return out;
}

namespace {

// Modified Gram-Schmidt against the first j+1 columns of Q, with a second
// pass when the norm drops enough to suggest cancellation.
void orthogonalize(const Mat& q, int j, Vec& w, Eigen::Ref<Vec> h) {
    const double norm_before = w.norm();
    for (int i = 0; i <= j; ++i) {
        double c = q.col(i).dot(w);
        h[i] = c;
        w -= c * q.col(i);
    }
    if (w.norm() < 0.7 * norm_before) {
        for (int i = 0; i <= j; ++i) {
            double c = q.col(i).dot(w);
            h[i] += c;
            w -= c * q.col(i);
        }
    }
}

}  // namespace

GmresResult gmres(const LinOp& A, const Vec& b, const GmresOptions& opt, const Vec* x0) {
    if (opt.restart < 1 || opt.max_iter < 1 || opt.tol <= 0)
        fail_usage("gmres options must be positive");
    const int n = static_cast<int>(b.size());

    GmresResult res;
    res.x = x0 ? *x0 : Vec::Zero(n);
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        res.x.setZero();
        res.converged = true;
        res.history.push_back(0.0);
        return res;
    }

    bool have_x = x0 && x0->norm() > 0;
    while (res.iterations < opt.max_iter) {
        Vec r = have_x ? Vec(b - A(res.x)) : b;
        have_x = true;
        double beta = r.norm();
        res.residual = beta / bnorm;
        if (res.history.empty()) res.history.push_back(res.residual);
        if (res.residual <= opt.tol) {
            res.converged = true;
            return res;
        }

        const int mdim = std::min(opt.restart, opt.max_iter - res.iterations);
        Mat q(n, mdim + 1);
        Mat h = Mat::Zero(mdim + 1, mdim);
        Vec g = Vec::Zero(mdim + 1);
        Vec cs(mdim), sn(mdim);
        q.col(0) = r / beta;
        g[0] = beta;

        int j = 0;
        bool happy = false, stalled = false;
        for (; j < mdim; ++j) {
            Vec w = A(q.col(j));
            ++res.iterations;
            const double wnorm = w.norm();
            orthogonalize(q, j, w, h.col(j).head(j + 1));
            h(j + 1, j) = w.norm();
            happy = h(j + 1, j) <= 1e-14 * std::max(1.0, wnorm);
            if (!happy) q.col(j + 1) = w / h(j + 1, j);

            // Givens update of column j, then a new rotation to kill the
            // subdiagonal entry.
            for (int i = 0; i < j; ++i) {
                double t = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
                h(i + 1, j) = -sn[i] * h(i, j) + cs[i] * h(i + 1, j);
                h(i, j) = t;
            }
            double denom = std::hypot(h(j, j), h(j + 1, j));
            if (denom == 0.0) {
                // The new direction is useless (singular operator); stop the
                // cycle without counting this column so the solve stays sane.
                stalled = true;
                break;
            }
            cs[j] = h(j, j) / denom;
            sn[j] = h(j + 1, j) / denom;
            h(j, j) = denom;
            h(j + 1, j) = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];

            res.residual = std::abs(g[j + 1]) / bnorm;
            res.history.push_back(res.residual);
            if (happy || res.residual <= opt.tol) {
                ++j;
                break;
            }
        }

        if (j > 0) {
            Vec y = h.topLeftCorner(j, j)
                        .triangularView<Eigen::Upper>()
                        .solve(g.head(j));
            res.x += q.leftCols(j) * y;
        }
        if (stalled) {
            res.converged = res.residual <= opt.tol;
            return res;
        }
        if (happy || res.residual <= opt.tol) {
            res.converged = true;
            return res;
        }
    }
    return res;
}

NewtonResult newton_fixed_point(const StepMap& S, const Vec& u0, const NewtonOptions& opt) {
    if (opt.max_iter < 1 || opt.tol_res <= 0) fail_usage("newton options must be positive");

    NewtonResult res;
    res.u = u0;
    Vec su = S(res.u);
    if (!su.allFinite()) fail_numeric("stepper returned non-finite values");
    Vec psi = res.u - su;
    res.residual = psi.norm();
    res.history.push_back(res.residual);

    for (int it = 0; it < opt.max_iter; ++it) {
        if (res.residual <= opt.tol_res) {
            res.converged = true;
            return res;
        }

        const Vec u = res.u;
        LinOp jac = [&](const Vec& v) { return Vec(v - jvp(S, u, v, &su, opt.central_diff)); };
        GmresResult lin = gmres(jac, -psi, opt.gmres);

        double alpha = 1.0;
        bool accepted = false;
        Vec u_try, psi_try;
        double rn_try = 0.0;
        for (int bt = 0; bt <= opt.max_backtrack; ++bt) {
            u_try = res.u + alpha * lin.x;
            Vec s_try = S(u_try);
            if (s_try.allFinite()) {
                psi_try = u_try - s_try;
                rn_try = psi_try.norm();
                if (rn_try <= (1.0 - 1e-4 * alpha) * res.residual) {
                    su = s_try;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if (!accepted) return res;  // stalled; caller inspects converged flag

        res.u = u_try;
        psi = psi_try;
        res.residual = rn_try;
        res.history.push_back(res.residual);
        ++res.iterations;

        if (opt.tol_step > 0 && alpha * lin.x.norm() <= opt.tol_step) {
            res.converged = true;
            return res;
        }
    }
    res.converged = res.residual <= opt.tol_res;
    return res;
}

SpectrumResult arnoldi_spectrum(const LinOp& A, int n, const ArnoldiOptions& opt) {
    if (opt.m_k < 1) fail_usage("subspace size must be positive");
    if (opt.m_k > n) fail_usage("subspace size cannot exceed the operator dimension");

    const int m = opt.m_k;
    Mat q(n, m + 1);
    Mat h = Mat::Zero(m + 1, m);
    q.col(0) = Vec::Ones(n) / std::sqrt(static_cast<double>(n));

    SpectrumResult res;
    int steps = m;
    for (int j = 0; j < m; ++j) {
        Vec w = A(q.col(j));
        if (!w.allFinite()) fail_numeric("operator returned non-finite values");
        const double wnorm = w.norm();
        orthogonalize(q, j, w, h.col(j).head(j + 1));
        h(j + 1, j) = w.norm();
        if (h(j + 1, j) <= opt.breakdown_tol * std::max(1.0, wnorm)) {
            steps = j + 1;
            res.truncated = true;
            break;
        }
        q.col(j + 1) = w / h(j + 1, j);
    }
    res.steps = steps;
    res.basis = q.leftCols(steps);
    res.hessenberg = h.topLeftCorner(steps, steps);

    Eigen::EigenSolver<Mat> es(res.hessenberg);
    if (es.info() != Eigen::Success) fail_numeric("eigen decomposition of the Hessenberg failed");

    std::vector<int> order(steps);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return std::abs(es.eigenvalues()[a]) > std::abs(es.eigenvalues()[b]);
    });

    res.values.resize(steps);
    res.vectors.resize(n, steps);
    res.residual_estimates.resize(steps);
    const double tail = res.truncated ? 0.0 : h(steps, steps - 1);
    for (int i = 0; i < steps; ++i) {
        const int k = order[i];
        res.values[i] = es.eigenvalues()[k];
        Eigen::VectorXcd y = es.eigenvectors().col(k);
        res.vectors.col(i) = res.basis * y;
        res.residual_estimates[i] = std::abs(tail) * std::abs(y[steps - 1]);
    }
    return res;
}

}  // namespace efc
