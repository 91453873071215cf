#include "plant/bratu.h"

#include <cmath>

#include "core/errors.h"

namespace efc {

int BratuParams::substeps() const {
    double ratio = dt_report / dt_inner;
    int n = static_cast<int>(std::lround(ratio));
    if (n < 1 || std::abs(ratio - n) > 1e-9 * ratio)
        fail_usage("dt_report must be an integer multiple of dt_inner");
    return n;
}

void BratuParams::validate() const {
    if (m < 3) fail_usage("grid needs at least 3 points");
    if (dt_inner <= 0 || dt_report <= 0) fail_usage("time steps must be positive");
    substeps();
}

static void check_state(const Vec& u, const BratuParams& p) {
    if (u.size() != p.m) fail_usage("state length does not match grid");
}

Vec bratu_step_forced(const Vec& u, const Vec& forcing, const BratuParams& p) {
    check_state(u, p);
    check_state(forcing, p);
    const int n = p.substeps();
    const double h2 = p.grid().h() * p.grid().h();
    const double dt = p.dt_inner;

    Vec cur = u, next(p.m);
    next[0] = 0.0;
    next[p.m - 1] = 0.0;
    for (int s = 0; s < n; ++s) {
        for (int j = 1; j < p.m - 1; ++j) {
            double lap = (cur[j - 1] - 2.0 * cur[j] + cur[j + 1]) / h2;
            next[j] = cur[j] + dt * (lap + p.lambda * std::exp(cur[j]) + forcing[j]);
        }
        cur.segment(1, p.m - 2) = next.segment(1, p.m - 2);
    }
    cur[0] = 0.0;
    cur[p.m - 1] = 0.0;
    return cur;
}

Vec bratu_step(const Vec& u, const BratuParams& p) {
    return bratu_step_forced(u, Vec::Zero(p.m), p);
}

// log(cosh(t)) without overflow for large |t|.
static double log_cosh(double t) {
    double a = std::abs(t);
    return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

double steady_theta(double lambda, SteadyBranch branch) {
    if (lambda <= 0) fail_usage("lambda must be positive");
    const double c = 4.0 / std::sqrt(2.0 * lambda);
    auto g = [c](double t) { return std::cosh(t) - c * t; };

    double lo = (branch == SteadyBranch::lower) ? 1e-6 : 1.2;
    double hi = (branch == SteadyBranch::lower) ? 1.2 : 10.0;
    if (g(lo) * g(hi) >= 0)
        fail_numeric("no steady branch bracket; lambda is at or above the fold point");
    while (hi - lo > 1e-14) {
        double mid = 0.5 * (lo + hi);
        if (g(lo) * g(mid) <= 0)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

Vec analytic_steady_state(const BratuParams& p, SteadyBranch branch) {
    p.validate();
    const double theta = steady_theta(p.lambda, branch);
    const Grid g = p.grid();
    Vec u(p.m);
    for (int j = 0; j < p.m; ++j)
        u[j] = 2.0 * (log_cosh(theta) - log_cosh(theta * (1.0 - 2.0 * g.x(j))));
    u[0] = 0.0;
    u[p.m - 1] = 0.0;
    return u;
}

}  // namespace efc
