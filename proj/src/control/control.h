#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "core/types.h"

namespace efc {

struct LqrSpec {
    Mat Q;  // state weight, symmetric PSD
    Mat R;  // input weight, symmetric PD

    void validate(int m_states, int k_inputs) const;
};

// Q = 0.5 I, R = 10 dt^2 I: penalizes inputs at the scale a coarse step can
// actually move the state.
LqrSpec default_lqr_weights(int m_states, int k_inputs, double dt_report);

// [0.30, 0.425, 0.55, 0.675, 0.80], padded upward in 0.03 steps when the slow
// basis came out wider than five.
std::vector<std::complex<double>> default_poles(int m_states);

struct DareOptions {
    double tol = 1e-12;   // on the max-norm iterate delta, relative
    int max_iter = 10000; // fixed-point budget before the doubling fallback
};

struct DareInfo {
    int iterations = 0;
    bool used_doubling = false;
    double residual = 0.0;  // max-norm DARE defect relative to 1 + |P|
};

// Discrete algebraic Riccati solution by value-style fixed-point iteration
// from P0 = Q, with a structure-preserving doubling fallback if the plain
// iteration has not settled within max_iter sweeps.
Mat solve_dare(const Mat& f, const Mat& d, const LqrSpec& spec,
               const DareOptions& opt = {}, DareInfo* info = nullptr);

struct ControllerGain {
    Mat K;  // k x M, feedback z = -K y
    std::string method;  // "dlqr" or "pole_placement"
    std::string provenance;  // plant kind of the reduced model it was built on
    Eigen::VectorXcd closed_loop_eigs;  // descending modulus
    // dlqr extras
    Mat P;
    LqrSpec spec;
    DareInfo dare;
    // pole placement extras
    std::vector<std::complex<double>> target_poles;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

ControllerGain dlqr_gain(const Mat& f, const Mat& d, const LqrSpec& spec,
                         const DareOptions& opt = {});

struct PolePlaceOptions {
    int max_retries = 10;
    double cond_limit = 1e8;        // on the Sylvester solution X
    double collision_perturb = 1e-8;
    double verify_tol = 1e-8;       // multiset match of achieved eigenvalues
};

// Sylvester-based assignment: solve F X - X Lambda = D G for a seeded random
// G and set K = G X^{-1}, retrying with fresh G while X is ill-conditioned.
ControllerGain pole_place(const Mat& f, const Mat& d,
                          std::vector<std::complex<double>> poles,
                          std::uint64_t seed, const PolePlaceOptions& opt = {});

Eigen::VectorXcd closed_loop_eigs(const Mat& f, const Mat& d, const Mat& k);

// Greedy nearest matching between two multisets of eigenvalues; returns the
// largest matched distance.
double multiset_eig_distance(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b);

void save_gain(const ControllerGain& gain, const std::string& path);
ControllerGain load_gain(const std::string& path);

}  // namespace efc
