#include "randonet/randonet.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "core/errors.h"
#include "core/jsonio.h"
#include "core/rng.h"

namespace efc {

namespace {

constexpr int kSchemaVersion = 1;
constexpr int kBlockCols = 2048;

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

Mat trunk_matrix(const Grid& grid, const Vec& alpha, const Vec& beta) {
    Mat t(grid.m, alpha.size());
    for (int j = 0; j < grid.m; ++j)
        for (int k = 0; k < alpha.size(); ++k)
            t(j, k) = sigmoid(grid.x(j) * alpha[k] + beta[k]);
    return t;
}

// Ridge solve (gram + mu I) X = rhs through an eigendecomposition of the
// Gram matrix. Unlike a Cholesky factorization this cannot fail when roundoff
// pushes trailing eigenvalues slightly negative: those are clamped to zero and
// directions with no usable curvature are dropped outright, which is what lets
// the ridge term shrink to the conditioning floor of the feature matrix.
template <typename Rhs>
Mat ridge_solve(const Mat& gram, double mu, const Rhs& rhs, const char* label) {
    Eigen::SelfAdjointEigenSolver<Mat> es(gram);
    if (es.info() != Eigen::Success)
        fail_numeric(std::string(label) + " Gram matrix eigendecomposition failed");
    const Vec& lam = es.eigenvalues();
    const double lam_max = std::max(lam.maxCoeff(), 0.0);
    const double floor = lam_max * 1e-15;
    Vec inv(lam.size());
    for (int i = 0; i < lam.size(); ++i) {
        const double shifted = std::max(lam[i], 0.0) + mu;
        inv[i] = shifted > floor ? 1.0 / shifted : 0.0;
    }
    return es.eigenvectors() * (inv.asDiagonal() * (es.eigenvectors().transpose() * rhs));
}

}  // namespace

void RandONetConfig::validate() const {
    if (n_trunk < 1 || m_branch < 1) fail_usage("feature counts must be positive");
    if (a_u <= 0 || eps_rff <= 0) fail_usage("feature scales must be positive");
    if (mu_scale < 0) fail_usage("ridge scale cannot be negative");
    if (val_fraction < 0 || val_fraction >= 1) fail_usage("val_fraction must lie in [0,1)");
}

Mat RandONet::branch_features(const Mat& inputs) const {
    if (inputs.rows() != grid_.m) fail_usage("input rows do not match the sensor grid");
    Mat b = br_alpha_ * inputs;
    b.colwise() += br_beta_;
    const double scale = std::sqrt(2.0 / br_alpha_.rows());
    return scale * b.array().cos().matrix();
}

RandONet RandONet::train(const Dataset& data, const Grid& grid, double dt_report,
                         const RandONetConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (data.X.cols() == 0) fail_usage("dataset is empty");
    if (data.X.rows() != grid.m || data.Y.rows() != grid.m || data.X.cols() != data.Y.cols())
        fail_usage("dataset shapes do not match the grid");
    if (!data.X.allFinite() || !data.Y.allFinite()) fail_usage("dataset contains non-finite values");

    RandONet net;
    net.grid_ = grid;
    net.dt_report_ = dt_report;
    net.a_u_ = cfg.a_u;
    net.eps_rff_ = cfg.eps_rff;

    Rng rng(seed);
    net.tr_alpha_ = rng.uniform_vec(cfg.n_trunk, -cfg.a_u, cfg.a_u);
    net.tr_centers_ = rng.uniform_vec(cfg.n_trunk, 0.0, 1.0);
    net.tr_beta_ = -net.tr_alpha_.cwiseProduct(net.tr_centers_);
    net.br_alpha_ = rng.normal_mat(cfg.m_branch, grid.m, 0.0, cfg.eps_rff);
    net.br_beta_ = rng.uniform_vec(cfg.m_branch, 0.0, 2.0 * std::numbers::pi);
    net.trunk_ = trunk_matrix(grid, net.tr_alpha_, net.tr_beta_);

    // Held-out split on pair indices, fixed permutation seed so the split is a
    // property of the dataset size alone.
    const int pairs = static_cast<int>(data.X.cols());
    std::vector<int> perm(pairs);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 split_gen(cfg.split_seed);
    std::shuffle(perm.begin(), perm.end(), split_gen);
    const int n_val = static_cast<int>(std::lround(cfg.val_fraction * pairs));
    const int n_train = pairs - n_val;
    if (n_train < 1) fail_usage("validation split leaves no training data");

    Mat xtr(grid.m, n_train), ytr(grid.m, n_train);
    for (int i = 0; i < n_train; ++i) {
        xtr.col(i) = data.X.col(perm[i]);
        ytr.col(i) = data.Y.col(perm[i]);
    }

    // Stage one: ridge-project the targets through the trunk. The m x m Gram
    // keeps this cheap regardless of the pair count.
    Mat gt = net.trunk_ * net.trunk_.transpose();
    const double mu_t = cfg.mu_scale * gt.trace() / grid.m;
    Mat c = net.trunk_.transpose() * ridge_solve(gt, mu_t, ytr, "trunk");

    // Stage two: ridge least squares against the branch features, with the
    // feature matrix streamed in column blocks so it never materializes whole.
    const int mb = cfg.m_branch;
    Mat gram = Mat::Zero(mb, mb);
    Mat cbt = Mat::Zero(cfg.n_trunk, mb);
    for (int start = 0; start < n_train; start += kBlockCols) {
        const int cols = std::min(kBlockCols, n_train - start);
        Mat bblk = net.branch_features(xtr.middleCols(start, cols));
        gram.selfadjointView<Eigen::Lower>().rankUpdate(bblk);
        cbt += c.middleCols(start, cols) * bblk.transpose();
    }
    gram = gram.selfadjointView<Eigen::Lower>();
    const double mu_b = cfg.mu_scale * gram.trace() / mb;
    net.w_ = ridge_solve(gram, mu_b, cbt.transpose(), "branch feature").transpose();
    net.tw_ = net.trunk_ * net.w_;

    TrainingMeta meta;
    meta.n_pairs = pairs;
    meta.n_train = n_train;
    meta.n_val = n_val;
    meta.mu_trunk = mu_t;
    meta.mu_branch = mu_b;
    meta.seed = seed;

    double misfit2 = 0.0, ynorm2 = 0.0;
    for (int start = 0; start < n_train; start += kBlockCols) {
        const int cols = std::min(kBlockCols, n_train - start);
        Mat pred = net.tw_ * net.branch_features(xtr.middleCols(start, cols));
        misfit2 += (pred - ytr.middleCols(start, cols)).squaredNorm();
        ynorm2 += ytr.middleCols(start, cols).squaredNorm();
    }
    meta.train_rel_fro = ynorm2 > 0 ? std::sqrt(misfit2 / ynorm2) : 0.0;

    if (n_val > 0) {
        std::vector<double> errs(n_val);
        for (int i = 0; i < n_val; ++i) {
            const int idx = perm[n_train + i];
            errs[i] = (net.predict(data.X.col(idx)) - data.Y.col(idx)).norm();
        }
        meta.val_max_l2 = *std::max_element(errs.begin(), errs.end());
        auto mid = errs.begin() + n_val / 2;
        std::nth_element(errs.begin(), mid, errs.end());
        meta.val_median_l2 = *mid;
        if (n_val % 2 == 0) {
            auto lo = std::max_element(errs.begin(), mid);
            meta.val_median_l2 = 0.5 * (*lo + *mid);
        }
    }
    net.meta_ = meta;
    return net;
}

Vec RandONet::predict(const Vec& u) const {
    if (u.size() != grid_.m) fail_usage("input length does not match the sensor grid");
    Vec phi = br_alpha_ * u + br_beta_;
    phi = std::sqrt(2.0 / br_alpha_.rows()) * phi.array().cos().matrix();
    Vec out = tw_ * phi;
    out[0] = 0.0;
    out[grid_.m - 1] = 0.0;
    return out;
}

Mat RandONet::predict_batch(const Mat& inputs) const {
    Mat out = tw_ * branch_features(inputs);
    out.row(0).setZero();
    out.row(grid_.m - 1).setZero();
    return out;
}

void RandONet::save(const std::string& path) const {
    JsonWriter w;
    w.begin_object();
    w.kv("schema_version", kSchemaVersion);
    w.key("grid");
    w.begin_object();
    w.kv("m", grid_.m);
    w.end_object();
    w.kv("dt_report", dt_report_);
    w.key("trunk");
    w.begin_object();
    w.kv("N", static_cast<int>(tr_alpha_.size()));
    w.kv("a_U", a_u_);
    w.kv("alpha", tr_alpha_);
    w.kv("beta", tr_beta_);
    w.kv("centers", tr_centers_);
    w.end_object();
    w.key("branch");
    w.begin_object();
    w.kv("M_br", static_cast<int>(br_alpha_.rows()));
    w.kv("eps_rff", eps_rff_);
    w.kv("alpha", br_alpha_);
    w.kv("beta", br_beta_);
    w.end_object();
    w.kv("W", w_);
    w.key("training_meta");
    w.begin_object();
    w.kv("n_pairs", meta_.n_pairs);
    w.kv("n_train", meta_.n_train);
    w.kv("n_val", meta_.n_val);
    w.kv("mu_trunk", meta_.mu_trunk);
    w.kv("mu_branch", meta_.mu_branch);
    w.kv("train_rel_fro", meta_.train_rel_fro);
    w.kv("val_median_l2", meta_.val_median_l2);
    w.kv("val_max_l2", meta_.val_max_l2);
    w.kv("seed", static_cast<std::int64_t>(meta_.seed));
    w.kv("normalization", meta_.normalization);
    w.end_object();
    w.end_object();
    save_atomic(path, w.str());
}

RandONet RandONet::load(const std::string& path) {
    nlohmann::json j = load_json(path);
    const std::string ctx = "model file " + path;
    int version = require(j, "schema_version", ctx).get<int>();
    if (version != kSchemaVersion)
        fail_io("unsupported model schema_version " + std::to_string(version));

    RandONet net;
    net.grid_ = Grid{require(require(j, "grid", ctx), "m", ctx).get<int>()};
    net.dt_report_ = require(j, "dt_report", ctx).get<double>();

    const auto& trunk = require(j, "trunk", ctx);
    net.a_u_ = require(trunk, "a_U", ctx).get<double>();
    net.tr_alpha_ = to_vec(require(trunk, "alpha", ctx));
    net.tr_beta_ = to_vec(require(trunk, "beta", ctx));
    net.tr_centers_ = to_vec(require(trunk, "centers", ctx));

    const auto& branch = require(j, "branch", ctx);
    net.eps_rff_ = require(branch, "eps_rff", ctx).get<double>();
    net.br_alpha_ = to_mat(require(branch, "alpha", ctx));
    net.br_beta_ = to_vec(require(branch, "beta", ctx));

    net.w_ = to_mat(require(j, "W", ctx));
    if (net.br_alpha_.cols() != net.grid_.m || net.w_.rows() != net.tr_alpha_.size() ||
        net.w_.cols() != net.br_alpha_.rows())
        fail_io("model dimensions are inconsistent in " + path);

    const auto& meta = require(j, "training_meta", ctx);
    net.meta_.n_pairs = require(meta, "n_pairs", ctx).get<int>();
    net.meta_.n_train = require(meta, "n_train", ctx).get<int>();
    net.meta_.n_val = require(meta, "n_val", ctx).get<int>();
    net.meta_.mu_trunk = require(meta, "mu_trunk", ctx).get<double>();
    net.meta_.mu_branch = require(meta, "mu_branch", ctx).get<double>();
    net.meta_.train_rel_fro = require(meta, "train_rel_fro", ctx).get<double>();
    net.meta_.val_median_l2 = require(meta, "val_median_l2", ctx).get<double>();
    net.meta_.val_max_l2 = require(meta, "val_max_l2", ctx).get<double>();
    net.meta_.seed = require(meta, "seed", ctx).get<std::uint64_t>();
    net.meta_.normalization = require(meta, "normalization", ctx).get<std::string>();

    net.trunk_ = trunk_matrix(net.grid_, net.tr_alpha_, net.tr_beta_);
    net.tw_ = net.trunk_ * net.w_;
    return net;
}

}  // namespace efc
