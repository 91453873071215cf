#pragma once

#include <string>
#include <vector>

#include "core/types.h"
#include "krylov/krylov.h"

namespace efc {

struct ReductionOptions {
    int m_slow = 5;
    int m_k = 40;          // Arnoldi subspace size
    double h_eps = 1e-6;   // finite-difference step for the actuator Jacobian
    std::string d_mode = "consistent";  // or "paper_vf"
    bool central_diff = false;
    double fixed_point_tol = 1e-6;  // how good u_ss must be before linearizing
};

// Linear model of the slow dynamics around a fixed point:
//   y_{n+1} = F y_n + D z_n,   y = V^T (u - u_ss).
struct ReducedModel {
    Vec u_ss;
    Mat V;  // n x M, orthonormal slow basis
    Mat F;  // M x M
    Mat H;  // n x k, response of one forced step to each actuator
    Mat D;  // M x k
    std::string d_mode;
    std::string provenance;  // "fd" or "surrogate"
    int m_slow_requested = 0;
    bool expanded = false;  // a conjugate pair straddled the cutoff
    double subspace_residual = 0.0;
    Eigen::VectorXcd ritz;  // full Ritz set from the Arnoldi run, descending modulus
    std::vector<double> ritz_residuals;
    std::vector<std::string> warnings;

    int m_slow() const { return static_cast<int>(V.cols()); }
    int inputs() const { return static_cast<int>(D.cols()); }
    Vec project(const Vec& u) const;
};

// Real orthonormal basis for the span of the leading m_slow Ritz vectors.
// Complex pairs contribute their real and imaginary parts once; a pair that
// straddles the cutoff widens the basis by one column (expanded flag).
Mat slow_basis(const SpectrumResult& spec, int m_slow, bool* expanded,
               std::vector<std::string>* warnings);

// Column i is (step(u_ss, eps*e_i) - step(u_ss, 0)) / eps. For a plant whose
// actuation enters additively this recovers the influence matrix exactly.
Mat actuator_jacobian(const ForcedStep& step, const Vec& u_ss, int k, double eps);

// mode "consistent" keeps D in the same coordinates as F (D = V^T H).
// mode "paper_vf" additionally left-multiplies by the real eigenvector matrix
// of F, falling back to consistent with a warning when that matrix is
// numerically singular.
Mat reduced_D(const Mat& v, const Mat& h, const Mat& f, const std::string& mode,
              std::vector<std::string>* warnings);

ReducedModel build_reduced_model(const StepMap& step, const ForcedStep& forced_step,
                                 int k_inputs, const Vec& u_ss,
                                 const ReductionOptions& opt,
                                 const std::string& provenance);

void save_reduced_model(const ReducedModel& model, const std::string& path);
ReducedModel load_reduced_model(const std::string& path);

}  // namespace efc
