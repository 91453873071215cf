#pragma once

#include <cstdint>

#include "core/types.h"
#include "plant/bratu.h"

namespace efc {

// Training data: unforced trajectories from random smooth initial profiles.
// Each accepted trajectory contributes `steps` consecutive (state, next state)
// pairs after a short burn-in. Trajectories that leave the trusted state range
// are dropped entirely and redrawn, so the final set has exactly
// n_traj * steps pairs, every state bounded by state_bound.
struct DatasetConfig {
    int n_traj = 200;
    int steps = 100;
    int burn_in = 10;
    double amp_max = 1.3;      // scale on the base profile, U[0, amp_max]
    int extra_modes = 8;       // sine modes 1 .. extra_modes
    double extra_amp = 0.5;    // mode-j coefficient U[-extra_amp, extra_amp] / j
    double state_bound = 6.0;
    int max_attempts_factor = 50;

    void validate() const;
};

struct Dataset {
    Mat X;  // m x P, one state per column
    Mat Y;  // m x P, the coarse step of the matching X column
    int discarded = 0;
    double max_abs_state = 0.0;
};

class Rng;

// Random scaling of the base profile plus a sine series, zero at both ends by
// construction. The base is the tall steady profile, so the family straddles
// both basins and covers the neighborhood the controller will operate in.
Vec sample_initial_condition(const Vec& base, const Grid& grid, const DatasetConfig& cfg,
                             Rng& rng);

Dataset generate_dataset(const BratuParams& plant, const DatasetConfig& cfg, std::uint64_t seed);

}  // namespace efc
