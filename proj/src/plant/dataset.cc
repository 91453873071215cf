#include "plant/dataset.h"

#include <cmath>
#include <numbers>

#include "core/errors.h"
#include "core/rng.h"

namespace efc {

void DatasetConfig::validate() const {
    if (n_traj < 1 || steps < 1) fail_usage("dataset needs positive trajectory and step counts");
    if (burn_in < 0) fail_usage("burn_in cannot be negative");
    if (amp_max <= 0 || state_bound <= 0) fail_usage("amplitudes and state bound must be positive");
    if (extra_modes < 0) fail_usage("extra_modes cannot be negative");
}

Vec sample_initial_condition(const Vec& base, const Grid& grid, const DatasetConfig& cfg,
                             Rng& rng) {
    if (base.size() != grid.m) fail_usage("base profile length does not match the grid");
    const double pi = std::numbers::pi;
    double a = rng.uniform(0.0, cfg.amp_max);
    Vec coef(cfg.extra_modes);
    for (int i = 0; i < cfg.extra_modes; ++i) coef[i] = rng.uniform(-cfg.extra_amp, cfg.extra_amp);

    Vec u(grid.m);
    for (int j = 0; j < grid.m; ++j) {
        double x = grid.x(j);
        double v = a * base[j];
        for (int i = 0; i < cfg.extra_modes; ++i) {
            int mode = i + 1;
            v += coef[i] / mode * std::sin(mode * pi * x);
        }
        u[j] = v;
    }
    u[0] = 0.0;
    u[grid.m - 1] = 0.0;
    return u;
}

Dataset generate_dataset(const BratuParams& plant, const DatasetConfig& cfg, std::uint64_t seed) {
    plant.validate();
    cfg.validate();
    const Grid grid = plant.grid();
    const int pairs = cfg.n_traj * cfg.steps;

    Dataset ds;
    ds.X.resize(grid.m, pairs);
    ds.Y.resize(grid.m, pairs);

    // Center the sampling family on the tall steady profile so the data
    // covers the region the controller will later regulate.
    const Vec base = analytic_steady_state(plant, SteadyBranch::upper);

    Rng rng(seed);
    int accepted = 0, attempts = 0;
    std::vector<Vec> states(cfg.steps + 1);
    while (accepted < cfg.n_traj) {
        if (++attempts > cfg.max_attempts_factor * cfg.n_traj)
            fail_numeric("initial condition family keeps escaping the trusted state range");

        Vec u = sample_initial_condition(base, grid, cfg, rng);
        bool ok = u.cwiseAbs().maxCoeff() <= cfg.state_bound;
        for (int s = 0; ok && s < cfg.burn_in; ++s) {
            u = bratu_step(u, plant);
            ok = u.allFinite() && u.cwiseAbs().maxCoeff() <= cfg.state_bound;
        }
        double traj_max = ok ? u.cwiseAbs().maxCoeff() : 0.0;
        if (ok) states[0] = u;
        for (int s = 0; ok && s < cfg.steps; ++s) {
            states[s + 1] = bratu_step(states[s], plant);
            ok = states[s + 1].allFinite() &&
                 states[s + 1].cwiseAbs().maxCoeff() <= cfg.state_bound;
            if (ok) traj_max = std::max(traj_max, states[s + 1].cwiseAbs().maxCoeff());
        }
        if (!ok) {
            ++ds.discarded;
            continue;
        }
        for (int s = 0; s < cfg.steps; ++s) {
            ds.X.col(accepted * cfg.steps + s) = states[s];
            ds.Y.col(accepted * cfg.steps + s) = states[s + 1];
        }
        ds.max_abs_state = std::max(ds.max_abs_state, traj_max);
        ++accepted;
    }
    return ds;
}

}  // namespace efc
