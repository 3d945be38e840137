#pragma once

#include <functional>

#include "feddag/federation.hpp"
#include "feddag/types.hpp"

namespace feddag {

enum class EstimatorMode { PFL, SIG, AVG, ADMM_HOMOGENEOUS };

const char* to_string(EstimatorMode mode);
EstimatorMode estimator_mode_from_string(const std::string& name);

struct EstimatorConfig {
    EstimatorMode mode = EstimatorMode::PFL;
    PenaltyConfig penalties;
    double rho1_init = 1.0;
    double rho2_init = 1.0;
    // The acyclicity penalty needs brute force: at any exact DAG the
    // gradient of h vanishes, so feasibility is reached by ramping rho1
    // hard. The consensus coupling rho2 ramps gently or it crushes the
    // data term long before the constraint is met.
    double gamma1 = 1.25;
    double gamma2 = 1.02;
    // The paper's geometric rho growth is uncapped; gamma = 1.25 over 200
    // iterations reaches ~1e19, so growth stops here and the result is
    // flagged.
    double rho_cap = 1e16;
    // The consensus subproblem is solved by inner proximal-gradient steps
    // until inner_prox_tol relative change, capped at inner_prox_steps. A
    // single step per round leaves the acyclicity constraint unresolved
    // within any practical iteration budget.
    int inner_prox_steps = 300;
    double inner_prox_tol = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
};

struct IterationStats {
    int iteration = 0;
    double primal_residual = 0.0;  // max_k ||W^k - Z^k||_F
    double dual_residual = 0.0;    // rho2 * sum_k ||Z^k_t - Z^k_{t-1}||_F
    double relative_change = 0.0;  // stopping-rule value
    double rho1 = 0.0;
    double rho2 = 0.0;
};

using ProgressCallback = std::function<void(const IterationStats&)>;

struct FitResult {
    std::vector<WeightedAdjacency> z_final;
    std::vector<BinaryGraph> graphs;
    std::vector<double> h_values;
    int iterations_used = 0;
    std::vector<double> primal_residuals;
    std::vector<double> dual_residuals;
    bool converged = false;
    bool rho_capped = false;
    bool prox_converged = true;
};

// |w| >= omega keeps an edge; any remaining directed cycle is then broken
// by repeatedly deleting the smallest-magnitude edge on a cycle
// (lexicographic (row, col) tie-break).
BinaryGraph threshold_graph(const WeightedAdjacency& w, double omega);

// Full NOTEARS-PFL ADMM loop over a connected transport, plus the SIG /
// AVG / homogeneous-ADMM baselines as mode dispatch.
FitResult fit(const std::vector<SiteDataset>& datasets, const EstimatorConfig& config,
              FederationTransport& transport, const ProgressCallback& progress = {});

// Center-side loop when the data lives behind the transport (serve-center).
// AVG needs raw data pooled and is rejected here.
FitResult fit_center(int dim, const EstimatorConfig& config, FederationTransport& transport,
                     const ProgressCallback& progress = {});

}  // namespace feddag
