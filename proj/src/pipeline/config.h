#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plant/actuators.h"
#include "plant/bratu.h"
#include "plant/dataset.h"
#include "randonet/randonet.h"

namespace efc {

struct KrylovConfig {
    double gmres_tol = 1e-10;
    int gmres_restart = 50;
    int gmres_max_iter = 200;
    double newton_tol_fd = 1e-12;
    double newton_tol_surrogate = 1e-9;
    double newton_tol_step = 0.0;  // disabled by default
    int newton_max_iter = 50;
    int m_k = 40;
    bool central_diff = false;
};

struct ReductionConfig {
    int m_slow = 5;
    std::string d_mode = "consistent";
    double h_eps = 1e-6;
};

struct ControlConfig {
    double q_scale = 0.5;
    double r_scale = 10.0;  // R = r_scale * dt_report^2 * I
    std::vector<double> poles = {0.30, 0.425, 0.55, 0.675, 0.80};
    double pole_pad_start = 0.85;  // used when the slow basis widened
    double pole_pad_step = 0.03;
    double dare_tol = 1e-12;
    int dare_max_iter = 10000;
};

struct SimConfig {
    int steps = 5000;
    int snapshot_every = 10;
    double blow_up = 1e3;
    std::string ic = "perturbation";  // or "steady-state"
};

struct Seeds {
    std::uint64_t datagen = 8101;
    std::uint64_t model = 4202;
    std::uint64_t control = 7303;
};

// Per-invocation selectors, carried in the same config object so every entry
// point (CLI, C API, tests) drives stages the same way.
struct StageOptions {
    std::string plant = "both";   // fd | surrogate | both
    std::string method = "both";  // dlqr | pp | both
    int steps = 0;                // 0: use sim.steps
    std::string reference;        // empty: canonical steady-state artifact
    std::string gain_from;        // empty: same plant kind as the simulation
    bool allow_mismatch = false;
    bool open_loop = false;
};

struct PipelineConfig {
    BratuParams plant;
    ActuatorConfig actuators;
    DatasetConfig datagen;
    RandONetConfig model;
    KrylovConfig krylov;
    ReductionConfig reduction;
    ControlConfig control;
    SimConfig sim;
    Seeds seeds;
    StageOptions stage_options;

    void validate() const;
};

// Defaults overlaid with the JSON text (unknown keys rejected so typos fail
// loudly instead of silently reverting to defaults).
PipelineConfig config_from_json(const std::string& json_text);
PipelineConfig load_config(const std::string& path);

// Sets one field addressed as "section.key" from a JSON-encoded scalar or
// array, e.g. ("seeds.model", "42") or ("control.poles", "[0.3,0.5]").
void config_set(PipelineConfig& cfg, const std::string& key_path, const std::string& json_value);

// Every field materialized, suitable for resolved.cfg.
std::string config_to_json(const PipelineConfig& cfg);

}  // namespace efc
