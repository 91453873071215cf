#include "plant/actuators.h"

#include <cmath>

#include "core/errors.h"

namespace efc {

void ActuatorConfig::validate() const {
    if (centers.empty()) fail_usage("need at least one actuator");
    if (sigma <= 0) fail_usage("actuator width must be positive");
    for (double c : centers)
        if (c < 0.0 || c > 1.0) fail_usage("actuator centers must lie in [0,1]");
}

Mat actuator_matrix(const Grid& grid, const ActuatorConfig& cfg) {
    cfg.validate();
    Mat b(grid.m, cfg.count());
    for (int i = 0; i < cfg.count(); ++i) {
        for (int j = 0; j < grid.m; ++j) {
            double d = grid.x(j) - cfg.centers[i];
            b(j, i) = std::exp(-d * d / (2.0 * cfg.sigma * cfg.sigma));
        }
        b(0, i) = 0.0;
        b(grid.m - 1, i) = 0.0;
    }
    return b;
}

}  // namespace efc
