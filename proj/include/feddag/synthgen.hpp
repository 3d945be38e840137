#pragma once

#include <optional>

#include "feddag/rng.hpp"
#include "feddag/types.hpp"

namespace feddag {

struct SynthConfig {
    int dim = 10;
    int sites = 5;
    double perturbation_level = 0.1;  // p_l in [0, 1]
    // Exactly one of the two sample-count controls is used; n_total is
    // split evenly with the remainder on the first sites.
    std::optional<int> n_total;
    std::optional<int> n_per_site;
    // ER density: explicit edge probability, or expected edge count
    // (default d, the sparse regime).
    std::optional<double> er_edge_prob;
    std::optional<double> er_expected_edges;
    double weight_min = 0.5;
    double weight_max = 2.0;
    double noise_std = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
    double edge_probability() const;
    std::vector<int> site_sample_counts() const;
};

struct SynthProblem {
    BinaryGraph truth;
    std::vector<BinaryGraph> graphs;          // per-site perturbed truths
    std::vector<WeightedAdjacency> weights;
    std::vector<SiteDataset> datasets;
    std::vector<int> realized_perturbations;  // after cycle repair
};

// ER DAG: edges sampled on a random topological order, so acyclicity holds
// by construction.
BinaryGraph gen_er_dag(int dim, double edge_prob, Rng& rng);

struct PerturbResult {
    BinaryGraph graph;
    int selected_positions = 0;
    int realized_changes = 0;  // modifications surviving cycle repair
};

// Appendix-style site perturbation: round(p_l * d(d-1)) off-diagonal
// positions get add / delete / reverse treatment; cycle-creating changes
// are undone newest-first until the graph is a DAG again.
PerturbResult perturb(const BinaryGraph& truth, double perturbation_level, Rng& rng);

// Uniform weights from [-max,-min] u [min,max] on the edges of g.
WeightedAdjacency assign_weights(const BinaryGraph& g, Rng& rng, double weight_min = 0.5,
                                 double weight_max = 2.0);

// Linear SEM sampling in topological order with Gaussian noise.
Matrix sample_sem(const WeightedAdjacency& w, int n, double noise_std, Rng& rng);

SynthProblem gen_problem(const SynthConfig& config);

}  // namespace feddag
