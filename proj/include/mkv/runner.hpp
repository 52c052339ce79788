#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mkv/diagnostics.hpp"
#include "mkv/errors.hpp"
#include "mkv/scaling.hpp"
#include "mkv/scenario.hpp"

namespace mkv {

/// A module error rethrown with the pipeline stage it escaped from.
class StageError : public Error {
public:
    StageError(const std::string& stage, const std::string& msg)
        : Error("[" + stage + "] " + msg), stage(stage) {}
    std::string stage;
};

struct ExperimentResult {
    ConvergenceReport report;
    HypothesisReport hypotheses;
    bool uniqueness_warning = false;
    bool has_scaling = false;
    ScalingReport scaling;
    // pooled sample densities per simulated system, label "meanfield" or "N<k>"
    std::vector<std::pair<std::string, DensityField>> histograms;
};

/// Full pipeline: validate the potential, solve the self-consistent problem
/// on the scenario grid, solve every requested particle number against a
/// reference re-solved at matching resolution, fill the diagnostics rows,
/// then run the optional simulation and kernel sweep. Deterministic for a
/// fixed scenario, seed and thread count. Errors carry the stage name.
ExperimentResult run_experiment(const Scenario& sc, int threads = 1);

/// Write the requested files into out_dir (created if missing): report.csv
/// and report.json per the format list, scaling.csv after a sweep, one
/// histogram CSV per simulated system, and manifest.json always. Returns the
/// paths written, manifest last. Throws IoError naming the offending path.
std::vector<std::string> emit_report(const ExperimentResult& result, const Scenario& sc,
                                     const std::string& out_dir);

}  // namespace mkv
