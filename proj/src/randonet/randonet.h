#pragma once

#include <cstdint>
#include <string>

#include "core/types.h"
#include "plant/dataset.h"

namespace efc {

// Random-feature operator surrogate for the coarse step map. The trunk is a
// random sigmoid layer evaluated at the grid nodes, the branch is a random
// Fourier feature map of the input field, and only the mixing matrix W is
// fitted, by two ridge-regularized least squares stages.
struct RandONetConfig {
    int n_trunk = 200;
    int m_branch = 2000;
    double a_u = 25.0;      // trunk weights drawn U[-a_u, a_u]
    double eps_rff = 0.05;  // branch weights drawn N(0, eps_rff^2)
    // Ridge strength is mu_scale * trace(Gram)/dim for each stage, so it
    // tracks the feature scale instead of being an absolute constant.
    double mu_scale = 1e-12;
    double val_fraction = 0.1;
    std::uint64_t split_seed = 777;

    void validate() const;
};

struct TrainingMeta {
    int n_pairs = 0;
    int n_train = 0;
    int n_val = 0;
    double mu_trunk = 0.0;
    double mu_branch = 0.0;
    double train_rel_fro = 0.0;  // relative Frobenius misfit on training columns
    double val_median_l2 = 0.0;  // median held-out one-step error
    double val_max_l2 = 0.0;
    std::uint64_t seed = 0;
    std::string normalization = "none";  // raw field values, no input scaling
};

class RandONet {
  public:
    static RandONet train(const Dataset& data, const Grid& grid, double dt_report,
                          const RandONetConfig& cfg, std::uint64_t seed);

    // One coarse step of the learned operator, boundary values clamped to 0.
    Vec predict(const Vec& u) const;
    Mat predict_batch(const Mat& inputs) const;

    // Raw feature maps, exposed for diagnostics and tests.
    Mat branch_features(const Mat& inputs) const;  // m_branch x cols
    const Mat& trunk() const { return trunk_; }
    const Mat& weights() const { return w_; }
    const Grid& grid() const { return grid_; }
    double dt_report() const { return dt_report_; }
    const TrainingMeta& meta() const { return meta_; }
    double mu_trunk() const { return meta_.mu_trunk; }
    double mu_branch() const { return meta_.mu_branch; }

    void save(const std::string& path) const;
    static RandONet load(const std::string& path);

  private:
    RandONet() = default;

    Grid grid_;
    double dt_report_ = 0.0;
    double a_u_ = 0.0;
    double eps_rff_ = 0.0;
    Vec tr_alpha_, tr_beta_, tr_centers_;
    Mat trunk_;     // m x n_trunk, fixed once drawn
    Mat br_alpha_;  // m_branch x m
    Vec br_beta_;   // m_branch
    Mat w_;         // n_trunk x m_branch
    Mat tw_;        // trunk_ * w_, cached for prediction
    TrainingMeta meta_;
};

}  // namespace efc
