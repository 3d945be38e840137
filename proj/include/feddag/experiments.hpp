#pragma once

#include <filesystem>

#include "feddag/harness.hpp"
#include "feddag/io.hpp"
#include "feddag/metrics.hpp"
#include "feddag/synthgen.hpp"

namespace feddag {

enum class SweepKind { VariableCount, SiteCount, PerturbationLevel };

SweepKind sweep_kind_from_string(const std::string& name);
const char* to_string(SweepKind kind);

struct ExperimentSpec {
    SweepKind kind = SweepKind::VariableCount;
    std::vector<double> grid;  // d, K, or p_l values depending on kind
    int replicates = 10;
    std::vector<EstimatorMode> estimators = {EstimatorMode::PFL, EstimatorMode::SIG,
                                             EstimatorMode::AVG,
                                             EstimatorMode::ADMM_HOMOGENEOUS};
    EstimatorConfig base_config;
    // Fixed problem parameters; the swept one is ignored.
    int dim = 30;
    int sites = 10;
    double perturbation_level = 0.1;
    // Total samples: by default 3d for d/p_l sweeps and 256 for K sweeps.
    std::optional<int> n_total;
    FederationOptions federation;
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;

    void validate() const;
};

struct RunScore {
    double error = 0.0;
    double shd = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double fscore = 0.0;
};

// Per-site confusion against each site's own perturbed truth, averaged
// over the K sites.
RunScore score_fit(const FitResult& result, const SynthProblem& problem);

struct SweepSummary {
    // grid value -> estimator -> per-replicate scores
    std::filesystem::path results_csv;
    std::filesystem::path runs_jsonl;
};

// Runs grid x replicates x estimators, writes results.csv (mean/std per
// metric) and runs.jsonl (one record per run, failures included).
SweepSummary run_sweep(const ExperimentSpec& spec);

// Degree / overlap / site-specific reports for one stored fit; when a
// second group of stored fits is given, adds per-edge two-sample
// proportion tests across replicate fits.
struct AnalyzeInputs {
    std::filesystem::path fit_path;                  // single stored fit
    std::vector<std::string> labels;                 // node names, size d
    std::vector<std::filesystem::path> group_a;      // replicate fits (optional)
    std::vector<std::filesystem::path> group_b;      // replicate fits (optional)
    std::filesystem::path out_dir;
    int top_m = 10;
};

void run_analyze(const AnalyzeInputs& inputs);

}  // namespace feddag
