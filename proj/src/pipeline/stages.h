#pragma once

#include <string>
#include <vector>

#include "core/types.h"
#include "pipeline/config.h"

namespace efc {

// Runs one named stage against a run directory: one of gen-data, train,
// steady-state, spectrum, reduce, design, simulate, pipeline, report.
// Every stage materializes resolved.cfg, reads only artifacts in run_dir plus
// the config, writes its own artifacts, and returns a one-line key=value
// summary. Warnings are appended to *warnings when given.
std::string run_stage(const PipelineConfig& cfg, const std::string& stage,
                      const std::string& run_dir,
                      std::vector<std::string>* warnings = nullptr);

// Artifact readers shared by the report stage and the test suite.
struct SteadyStateArtifact {
    std::string plant;
    Vec u;
    double residual = 0.0;
    int iterations = 0;
    std::vector<double> history;
    bool analytic_available = false;
    double analytic_gap_linf = 0.0;
    double theta = 0.0;
};

struct SpectrumArtifact {
    std::string plant;
    int m_k = 0;
    bool truncated = false;
    Eigen::VectorXcd ritz;
    std::vector<double> residual_estimates;
    int n_unstable = 0;
};

SteadyStateArtifact load_steady_state(const std::string& path);
SpectrumArtifact load_spectrum(const std::string& path);
Dataset load_dataset(const std::string& path);
void save_steady_state(const std::string& path, const SteadyStateArtifact& artifact);

std::string artifact_path(const std::string& run_dir, const std::string& name);

}  // namespace efc
