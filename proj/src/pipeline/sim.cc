#include "pipeline/sim.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "core/errors.h"
#include "core/jsonio.h"

namespace efc {

double ClosedLoopTrace::min_error() const {
    return *std::min_element(l2_error.begin(), l2_error.end());
}

double ClosedLoopTrace::tail_max_increase() const {
    const int n = static_cast<int>(l2_error.size());
    const int start = n - std::max(2, n / 5);
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = std::max(0, start); i + 1 < n; ++i)
        worst = std::max(worst, l2_error[i + 1] - l2_error[i]);
    return worst;
}

namespace {

ClosedLoopTrace run_loop(const ForcedStep& plant, const Mat& b_act, const Mat* v,
                         const Mat* k_gain, const Vec& u_set, const Vec& u_ref, const Vec& u0,
                         const ClosedLoopOptions& opt, int k_inputs) {
    if (opt.steps < 1 || opt.snapshot_every < 1 || opt.blow_up <= 0)
        fail_usage("closed loop options must be positive");
    if (u0.size() != u_ref.size()) fail_usage("initial state and reference lengths differ");
    if (u_set.size() != u_ref.size()) fail_usage("setpoint and reference lengths differ");

    ClosedLoopTrace trace;
    trace.dt_report = opt.dt_report;
    trace.z.resize(k_inputs, opt.steps + 1);
    trace.t.reserve(opt.steps + 1);
    trace.l2_error.reserve(opt.steps + 1);
    trace.bz_absmax.reserve(opt.steps + 1);

    Vec u = u0;
    for (int n = 0; n <= opt.steps; ++n) {
        Vec z = Vec::Zero(k_inputs);
        if (k_gain) z = -(*k_gain) * (v->transpose() * (u - u_set));
        trace.t.push_back(n * opt.dt_report);
        trace.l2_error.push_back((u - u_ref).norm());
        trace.bz_absmax.push_back(k_inputs > 0 ? (b_act * z).cwiseAbs().maxCoeff() : 0.0);
        trace.z.col(n) = z;
        if (n % opt.snapshot_every == 0) {
            trace.snapshots.conservativeResize(u.size(), trace.snapshots.cols() + 1);
            trace.snapshots.col(trace.snapshots.cols() - 1) = u;
            trace.snapshot_steps.push_back(n);
        }
        if (n == opt.steps) break;

        u = plant(u, z);
        trace.steps_run = n + 1;
        if (!u.allFinite() || u.cwiseAbs().maxCoeff() > opt.blow_up) {
            trace.diverged = true;
            trace.z.conservativeResize(k_inputs, n + 1);
            break;
        }
    }
    return trace;
}

}  // namespace

ClosedLoopTrace run_closed_loop(const ForcedStep& plant, const Mat& b_act, const Mat& v,
                                const Mat& k_gain, const Vec& u_set, const Vec& u_ref,
                                const Vec& u0, const ClosedLoopOptions& opt) {
    if (v.rows() != u_ref.size()) fail_usage("basis rows must match the state length");
    if (k_gain.cols() != v.cols()) fail_usage("gain columns must match the basis width");
    if (b_act.rows() != u_ref.size() || b_act.cols() != k_gain.rows())
        fail_usage("actuator matrix shape does not match the gain");
    return run_loop(plant, b_act, &v, &k_gain, u_set, u_ref, u0, opt,
                    static_cast<int>(k_gain.rows()));
}

ClosedLoopTrace run_closed_loop(const ForcedStep& plant, const Mat& b_act, const Mat& v,
                                const Mat& k_gain, const Vec& u_ss, const Vec& u0,
                                const ClosedLoopOptions& opt) {
    return run_closed_loop(plant, b_act, v, k_gain, u_ss, u_ss, u0, opt);
}

ClosedLoopTrace run_open_loop(const ForcedStep& plant, const Mat& b_act, int k_inputs,
                              const Vec& u_ref, const Vec& u0, const ClosedLoopOptions& opt) {
    ClosedLoopTrace trace = run_loop(plant, b_act, nullptr, nullptr, u_ref, u_ref, u0, opt,
                                     k_inputs);
    trace.controller = "open";
    return trace;
}

Vec initial_perturbation(const Vec& u_ss, const Grid& grid) {
    if (u_ss.size() != grid.m) fail_usage("steady state length does not match the grid");
    Vec u0(grid.m);
    for (int j = 0; j < grid.m; ++j) {
        double x = grid.x(j);
        u0[j] = u_ss[j] * (1.2 + 0.4 * std::sin(10.0 * std::numbers::pi * x) + 0.4 * std::exp(x));
    }
    return u0;
}

void write_trace_csv(const ClosedLoopTrace& trace, const std::string& path) {
    std::string out = "t,l2_error";
    for (int i = 1; i <= trace.z.rows(); ++i) out += ",z_" + std::to_string(i);
    out += ",bz_absmax\n";
    for (size_t n = 0; n < trace.t.size(); ++n) {
        out += format_double(trace.t[n]);
        out += ',';
        out += format_double(trace.l2_error[n]);
        for (int i = 0; i < trace.z.rows(); ++i) {
            out += ',';
            out += format_double(trace.z(i, static_cast<int>(n)));
        }
        out += ',';
        out += format_double(trace.bz_absmax[n]);
        out += '\n';
    }
    save_atomic(path, out);
}

void write_snapshots_csv(const ClosedLoopTrace& trace, const std::string& path) {
    std::string out = "t";
    for (int j = 0; j < trace.snapshots.rows(); ++j) out += ",u_" + std::to_string(j);
    out += '\n';
    for (size_t s = 0; s < trace.snapshot_steps.size(); ++s) {
        out += format_double(trace.snapshot_steps[s] * trace.dt_report);
        for (int j = 0; j < trace.snapshots.rows(); ++j) {
            out += ',';
            out += format_double(trace.snapshots(j, static_cast<int>(s)));
        }
        out += '\n';
    }
    save_atomic(path, out);
}

}  // namespace efc
