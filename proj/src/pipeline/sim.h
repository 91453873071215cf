#pragma once

#include <string>
#include <vector>

#include "core/types.h"

namespace efc {

struct ClosedLoopOptions {
    int steps = 5000;
    double blow_up = 1e3;     // on the sup norm of the state
    int snapshot_every = 10;
    double dt_report = 1e-3;  // converts step index to the recorded time
};

struct ClosedLoopTrace {
    std::string plant_kind;  // fd | surrogate
    std::string controller;  // dlqr | pp | open
    std::vector<double> t;
    std::vector<double> l2_error;
    std::vector<double> bz_absmax;
    Mat z;          // k x recorded rows
    Mat snapshots;  // m x snapshot count
    std::vector<int> snapshot_steps;
    double dt_report = 0.0;
    bool diverged = false;
    int steps_run = 0;  // transitions actually taken

    double final_error() const { return l2_error.back(); }
    double min_error() const;
    // Largest single-step error increase over the last fifth of the rows;
    // <= 0 means the tail is non-increasing.
    double tail_max_increase() const;
};

// Runs u_{n+1} = plant(u_n, z_n) with z_n = -K V^T (u_n - u_set), recording
// t_n, |u_n - u_ref|_2, z_n and |B z_n|_inf for every step, and the state
// every snapshot_every steps. The setpoint u_set is the fixed point the gain
// was designed around; u_ref is the profile the error column is measured
// against, which may differ when a surrogate loop is judged against the true
// steady state. A state with sup norm above blow_up truncates the trace and
// flags it; the caller decides whether that is an error.
ClosedLoopTrace run_closed_loop(const ForcedStep& plant, const Mat& b_act, const Mat& v,
                                const Mat& k_gain, const Vec& u_set, const Vec& u_ref,
                                const Vec& u0, const ClosedLoopOptions& opt);

// Convenience overload with u_set == u_ref.
ClosedLoopTrace run_closed_loop(const ForcedStep& plant, const Mat& b_act, const Mat& v,
                                const Mat& k_gain, const Vec& u_ss, const Vec& u0,
                                const ClosedLoopOptions& opt);

// Same bookkeeping with z held at zero.
ClosedLoopTrace run_open_loop(const ForcedStep& plant, const Mat& b_act, int k_inputs,
                              const Vec& u_ref, const Vec& u0, const ClosedLoopOptions& opt);

// Multiplicative profile u_ss .* (1.2 + 0.4 sin(10 pi x) + 0.4 e^x): a large
// smooth disturbance that vanishes at the boundary with u_ss.
Vec initial_perturbation(const Vec& u_ss, const Grid& grid);

// Header t,l2_error,z_1,...,z_k,bz_absmax with 17-significant-digit values.
void write_trace_csv(const ClosedLoopTrace& trace, const std::string& path);
void write_snapshots_csv(const ClosedLoopTrace& trace, const std::string& path);

}  // namespace efc
