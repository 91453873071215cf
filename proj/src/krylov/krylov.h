#pragma once

#include <functional>
#include <vector>

#include "core/types.h"

namespace efc {

using LinOp = std::function<Vec(const Vec&)>;

// Directional derivative of a step map by finite differences:
//   jvp = (S(u + eps*v/|v|) - S(u)) * (|v|/eps),  eps = sqrt(mach_eps)*(1 + |u|_2).
// central=true uses the symmetric difference at twice the stepper cost.
// su, when given, must equal S(u) and saves one stepper call.
Vec jvp(const StepMap& S, const Vec& u, const Vec& v, const Vec* su = nullptr,
        bool central = false);

double jvp_epsilon(const Vec& u);

struct GmresOptions {
    double tol = 1e-10;  // relative residual target
    int restart = 50;
    int max_iter = 200;  // total inner iterations across restarts
};

struct GmresResult {
    Vec x;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;  // relative to |b|
    std::vector<double> history;
};

// Restarted GMRES with modified Gram-Schmidt, one conditional
// reorthogonalization pass, and Givens rotations for the least-squares
// update. Stagnation is reported through the result, never thrown.
GmresResult gmres(const LinOp& A, const Vec& b, const GmresOptions& opt = {},
                  const Vec* x0 = nullptr);

struct NewtonOptions {
    double tol_res = 1e-12;   // absolute 2-norm of the residual u - S(u)
    double tol_step = 0.0;    // 0 disables the step-size stop
    int max_iter = 50;
    int max_backtrack = 8;    // Armijo halvings per step
    bool central_diff = false;
    GmresOptions gmres;
};

struct NewtonResult {
    Vec u;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> history;  // residual norm per iterate, starting at u0
};

// Jacobian-free Newton-Krylov for fixed points of S: solves psi(u) = u - S(u) = 0
// with GMRES on the matrix-free Jacobian v -> v - jvp(S, u, v) and Armijo
// backtracking on the residual norm.
NewtonResult newton_fixed_point(const StepMap& S, const Vec& u0,
                                const NewtonOptions& opt = {});

struct ArnoldiOptions {
    int m_k = 40;
    double breakdown_tol = 1e-12;
    bool central_diff = false;  // used by spectrum helpers built on jvp
};

struct SpectrumResult {
    Eigen::VectorXcd values;    // Ritz values, descending modulus
    Eigen::MatrixXcd vectors;   // n x m, Ritz vectors in matching order
    std::vector<double> residual_estimates;  // |h_{m+1,m}| * |last Ritz coeff|
    Mat basis;                  // n x m Arnoldi basis Q
    Mat hessenberg;             // m x m
    bool truncated = false;     // hit an invariant subspace early; values exact
    int steps = 0;
};

// Arnoldi iteration on a matrix-free operator, started from the normalized
// all-ones vector so results are reproducible.
SpectrumResult arnoldi_spectrum(const LinOp& A, int n, const ArnoldiOptions& opt = {});

}  // namespace efc
