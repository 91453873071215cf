#pragma once

#include <Eigen/Dense>
#include <functional>

namespace efc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// One coarse step of some plant: state in, state out. Forcing (if any) is
// bound into the closure by the caller.
using StepMap = std::function<Vec(const Vec&)>;

// One coarse step under a control input z (actuator amplitudes).
using ForcedStep = std::function<Vec(const Vec&, const Vec&)>;

// Uniform grid on [0,1] including both endpoints.
struct Grid {
    int m = 51;

    double h() const { return 1.0 / (m - 1); }
    double x(int j) const { return j * h(); }

    Vec nodes() const {
        Vec xs(m);
        for (int j = 0; j < m; ++j) xs[j] = x(j);
        return xs;
    }
};

}  // namespace efc
