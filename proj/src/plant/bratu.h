#pragma once

#include "core/types.h"

namespace efc {

// Finite-difference reaction-diffusion plant on [0,1] with homogeneous
// Dirichlet ends: u_t = u_xx + lambda*exp(u) + forcing. Second-order central
// differences in space, forward Euler in time. One reporting step of dt_report
// is taken as dt_report/dt_inner explicit substeps.
struct BratuParams {
    double lambda = 2.0;
    int m = 51;               // grid points including both ends
    double dt_inner = 1e-4;   // explicit Euler substep
    double dt_report = 1e-3;  // coarse step exposed to solvers and controllers

    Grid grid() const { return Grid{m}; }
    int substeps() const;
    void validate() const;
};

// Advances one coarse step with no forcing.
Vec bratu_step(const Vec& u, const BratuParams& p);

// Advances one coarse step with the forcing profile (already B*z, one value
// per grid node) held constant across all substeps.
Vec bratu_step_forced(const Vec& u, const Vec& forcing, const BratuParams& p);

// Closed-form steady profile u(x) = 2*ln(cosh(theta)/cosh(theta*(1-2x)))
// where theta solves cosh(theta) = 4*theta/sqrt(2*lambda). Below the fold
// point two roots exist; branch selects which one.
enum class SteadyBranch { lower, upper };

// Root of cosh(theta) - 4*theta/sqrt(2*lambda) by bisection to width 1e-14.
// Raises a numeric error when the bracket holds no sign change, which happens
// for lambda at or above the fold.
double steady_theta(double lambda, SteadyBranch branch);

Vec analytic_steady_state(const BratuParams& p, SteadyBranch branch);

}  // namespace efc
