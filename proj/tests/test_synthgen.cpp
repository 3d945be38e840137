#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <feddag/dag_constraint.hpp>
#include <feddag/metrics.hpp>
#include <feddag/synthgen.hpp>

using namespace feddag;

TEST_CASE("er density extremes") {
    Rng rng(81);
    const BinaryGraph empty = gen_er_dag(6, 0.0, rng);
    CHECK(empty.edge_count() == 0);

    const BinaryGraph full = gen_er_dag(6, 1.0, rng);
    CHECK(full.edge_count() == 6 * 5 / 2);
    CHECK(is_acyclic_exact(full));
}

TEST_CASE("er edge count concentrates around its mean") {
    Rng rng(82);
    const int d = 20, seeds = 1000;
    const double p = 0.1;
    const double expected = p * d * (d - 1) / 2.0;  // 19
    double total = 0.0;
    for (int s = 0; s < seeds; ++s) {
        Rng stream = rng.split(static_cast<std::uint64_t>(s));
        total += gen_er_dag(d, p, stream).edge_count();
    }
    const double mean = total / seeds;
    // Binomial(190, 0.1): sd of the sample mean over 1000 draws.
    const double sd = std::sqrt(190 * p * (1 - p) / seeds);
    CHECK(std::abs(mean - expected) < 3.0 * sd);
}

TEST_CASE("perturbation level zero leaves the graph unchanged") {
    Rng rng(83);
    const BinaryGraph truth = gen_er_dag(8, 0.3, rng);
    const PerturbResult res = perturb(truth, 0.0, rng);
    CHECK((res.graph.adj() - truth.adj()).cwiseAbs().maxCoeff() == 0);
    CHECK(res.selected_positions == 0);
}

TEST_CASE("ten percent of a ten-node graph selects nine positions") {
    Rng rng(84);
    const BinaryGraph truth = gen_er_dag(10, 0.2, rng);
    const PerturbResult res = perturb(truth, 0.10, rng);
    CHECK(res.selected_positions == 9);  // 10% of 90 off-diagonal cells
}

TEST_CASE("perturbed graphs are DAGs and stay within the edit budget") {
    Rng rng(85);
    for (int trial = 0; trial < 200; ++trial) {
        Rng stream = rng.split(static_cast<std::uint64_t>(trial));
        const BinaryGraph truth = gen_er_dag(8, 0.25, stream);
        const double level = 0.05 + 0.25 * stream.next_double();
        const PerturbResult res = perturb(truth, level, stream);
        CHECK(is_acyclic_exact(res.graph));
        CHECK(shd(res.graph, truth) <= res.selected_positions);
        CHECK(res.realized_changes <= res.selected_positions);
    }
}

TEST_CASE("weights live in the two-sided band with balanced signs") {
    Rng rng(86);
    BinaryGraph complete(2);
    complete.set_edge(0, 1, true);
    int negative = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const WeightedAdjacency w = assign_weights(complete, rng);
        const double v = w(0, 1);
        CHECK(std::abs(v) >= 0.5);
        CHECK(std::abs(v) <= 2.0);
        negative += v < 0;
    }
    CHECK(std::abs(negative / static_cast<double>(draws) - 0.5) < 0.01);

    const WeightedAdjacency none = assign_weights(BinaryGraph(3), rng);
    CHECK(none.values().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pure-noise SEM has identity covariance") {
    Rng rng(87);
    const int n = 100000, d = 3;
    const Matrix data = sample_sem(WeightedAdjacency::zero(d), n, 1.0, rng);
    const Matrix cov = data.transpose() * data / static_cast<double>(n);
    // Entry sd is about 1/sqrt(n) off-diagonal and sqrt(2/n) on it.
    const double band = 3.0 * std::sqrt(2.0 / n);
    CHECK((cov - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() < band);
}

TEST_CASE("chain SEM regression recovers the weight") {
    Rng rng(88);
    Matrix w = Matrix::Zero(2, 2);
    w(0, 1) = 0.8;
    const Matrix data = sample_sem(WeightedAdjacency(w), 10000, 1.0, rng);
    const double cov01 = (data.col(0).array() * data.col(1).array()).mean();
    const double var0 = data.col(0).array().square().mean();
    CHECK(std::abs(cov01 / var0 - 0.8) < 0.05);
}

TEST_CASE("noise-free roots give all-zero data") {
    Rng rng(89);
    const Matrix data = sample_sem(WeightedAdjacency::zero(4), 50, 0.0, rng);
    CHECK(data.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sample_sem rejects cyclic weights") {
    Matrix w = Matrix::Zero(2, 2);
    w(0, 1) = 1.0;
    w(1, 0) = 1.0;
    Rng rng(90);
    CHECK_THROWS_AS(sample_sem(WeightedAdjacency(w), 10, 1.0, rng), CyclicInput);
}

TEST_CASE("gen_problem splits the total sample count evenly") {
    SynthConfig cfg;
    cfg.dim = 10;
    cfg.sites = 10;
    cfg.perturbation_level = 0.1;
    cfg.n_total = 30;
    cfg.seed = 5;
    const SynthProblem problem = gen_problem(cfg);
    CHECK(problem.datasets.size() == 10);
    for (const auto& ds : problem.datasets) CHECK(ds.n() == 3);
    for (const auto& g : problem.graphs) CHECK(is_acyclic_exact(g));
}

TEST_CASE("zero perturbation clones the truth at every site") {
    SynthConfig cfg;
    cfg.dim = 8;
    cfg.sites = 4;
    cfg.perturbation_level = 0.0;
    cfg.n_per_site = 5;
    cfg.seed = 6;
    const SynthProblem problem = gen_problem(cfg);
    for (const auto& g : problem.graphs)
        CHECK((g.adj() - problem.truth.adj()).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("identical seeds give bit-identical problems") {
    SynthConfig cfg;
    cfg.dim = 7;
    cfg.sites = 3;
    cfg.perturbation_level = 0.15;
    cfg.n_per_site = 12;
    cfg.seed = 99;
    const SynthProblem a = gen_problem(cfg);
    const SynthProblem b = gen_problem(cfg);
    CHECK((a.truth.adj() - b.truth.adj()).cwiseAbs().maxCoeff() == 0);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK((a.weights[k].values() - b.weights[k].values()).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.datasets[k].data() - b.datasets[k].data()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("weight supports equal the perturbed graphs") {
    SynthConfig cfg;
    cfg.dim = 9;
    cfg.sites = 3;
    cfg.perturbation_level = 0.2;
    cfg.n_per_site = 4;
    cfg.seed = 17;
    const SynthProblem problem = gen_problem(cfg);
    for (std::size_t k = 0; k < 3; ++k) {
        for (int i = 0; i < 9; ++i)
            for (int j = 0; j < 9; ++j)
                CHECK((problem.weights[k](i, j) != 0.0) == problem.graphs[k].has_edge(i, j));
    }
}

TEST_CASE("config validation catches contradictions") {
    SynthConfig cfg;
    cfg.n_total = 10;
    cfg.n_per_site = 2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    SynthConfig cfg2;
    CHECK_THROWS_AS(cfg2.validate(), ConfigError);  // neither count set

    SynthConfig cfg3;
    cfg3.n_per_site = 3;
    cfg3.perturbation_level = 1.5;
    CHECK_THROWS_AS(cfg3.validate(), ConfigError);
}
