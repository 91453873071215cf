#pragma once

#include <vector>

#include "core/types.h"

namespace efc {

// Gaussian actuator shapes. Column i of the influence matrix is a bump
// centered at centers[i]; the end rows are zeroed because the Dirichlet
// boundary values are pinned and cannot be forced.
struct ActuatorConfig {
    std::vector<double> centers = {0.25, 0.5, 0.75};
    double sigma = 0.05;

    int count() const { return static_cast<int>(centers.size()); }
    void validate() const;
};

// m x k matrix with B(j,i) = exp(-(x_j - c_i)^2 / (2 sigma^2)).
Mat actuator_matrix(const Grid& grid, const ActuatorConfig& cfg);

}  // namespace efc
