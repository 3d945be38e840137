#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <feddag/dag_constraint.hpp>
#include <feddag/harness.hpp>
#include <feddag/metrics.hpp>
#include <feddag/synthgen.hpp>

#include "test_util.hpp"

using namespace feddag;

namespace {

std::vector<SiteDataset> chain_problem(int sites, int n_per_site, std::uint64_t seed) {
    // x1 -> x2 -> x3 with weights 1.2 and -0.9.
    Matrix w = Matrix::Zero(3, 3);
    w(0, 1) = 1.2;
    w(1, 2) = -0.9;
    const WeightedAdjacency truth(w);
    Rng rng(seed);
    std::vector<SiteDataset> sites_out;
    for (int k = 0; k < sites; ++k) {
        Rng stream = rng.split(static_cast<std::uint64_t>(k));
        sites_out.emplace_back("site_" + std::to_string(k),
                               sample_sem(truth, n_per_site, 1.0, stream));
    }
    return sites_out;
}

BinaryGraph chain_truth() {
    BinaryGraph g(3);
    g.set_edge(0, 1, true);
    g.set_edge(1, 2, true);
    return g;
}

FederationOptions inproc() {
    FederationOptions opt;
    opt.kind = TransportKind::InProc;
    return opt;
}

}  // namespace

TEST_CASE("threshold keeps edges at or above omega") {
    Matrix w = Matrix::Zero(3, 3);
    w(0, 1) = 0.31;
    w(1, 2) = 0.29;
    const BinaryGraph g = threshold_graph(WeightedAdjacency(w), 0.3);
    CHECK(g.edge_count() == 1);
    CHECK(g.has_edge(0, 1));

    const BinaryGraph empty = threshold_graph(WeightedAdjacency::zero(4), 0.3);
    CHECK(empty.edge_count() == 0);
}

TEST_CASE("threshold repairs a two-cycle deterministically") {
    Matrix w = Matrix::Zero(2, 2);
    w(0, 1) = 0.4;
    w(1, 0) = 0.4;
    const BinaryGraph g = threshold_graph(WeightedAdjacency(w), 0.3);
    // Equal magnitudes: the lexicographically first edge (0,1) is removed.
    CHECK(g.edge_count() == 1);
    CHECK(g.has_edge(1, 0));
    CHECK(is_acyclic_exact(g));
}

TEST_CASE("threshold repair removes the weakest edge on longer cycles") {
    Matrix w = Matrix::Zero(3, 3);
    w(0, 1) = 0.9;
    w(1, 2) = 0.8;
    w(2, 0) = 0.5;
    const BinaryGraph g = threshold_graph(WeightedAdjacency(w), 0.3);
    CHECK(g.edge_count() == 2);
    CHECK_FALSE(g.has_edge(2, 0));
    CHECK(is_acyclic_exact(g));
}

TEST_CASE("chain SEM is recovered exactly by PFL") {
    const auto datasets = chain_problem(2, 500, 7);
    EstimatorConfig config;
    const FitResult result = run_federated_fit(datasets, config, inproc());

    CHECK(result.converged);
    const BinaryGraph truth = chain_truth();
    for (const auto& g : result.graphs) {
        CHECK(shd(g, truth) == 0);
        CHECK(is_acyclic_exact(g));
    }
    for (double h : result.h_values) CHECK(h <= config.penalties.h_tol);
}

TEST_CASE("zero-signal data yields empty graphs") {
    // Degenerate sites: no variation around zero, so the Gram vanishes
    // and the L1 keeps everything at zero. (Constant *nonzero* data is
    // different under the uncentered loss: each column predicts every
    // other exactly, and edges are genuinely supported.)
    Matrix flat = Matrix::Zero(50, 4);
    std::vector<SiteDataset> datasets;
    datasets.emplace_back("site_0", flat);
    datasets.emplace_back("site_1", flat);
    EstimatorConfig config;
    const FitResult result = run_federated_fit(datasets, config, inproc());
    for (const auto& g : result.graphs) CHECK(g.edge_count() == 0);
}

TEST_CASE("SIG equals PFL when the fusion penalty is off") {
    const auto datasets = chain_problem(3, 120, 11);

    EstimatorConfig pfl;
    pfl.mode = EstimatorMode::PFL;
    pfl.penalties.lambda2 = 0.0;
    const FitResult a = run_federated_fit(datasets, pfl, inproc());

    EstimatorConfig sig;
    sig.mode = EstimatorMode::SIG;
    const FitResult b = run_federated_fit(datasets, sig, inproc());

    REQUIRE(a.z_final.size() == b.z_final.size());
    for (std::size_t k = 0; k < a.z_final.size(); ++k)
        CHECK((a.z_final[k].values() - b.z_final[k].values()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("fit is deterministic over the in-process transport") {
    const auto datasets = chain_problem(2, 80, 13);
    EstimatorConfig config;
    const FitResult a = run_federated_fit(datasets, config, inproc());
    const FitResult b = run_federated_fit(datasets, config, inproc());
    REQUIRE(a.z_final.size() == b.z_final.size());
    for (std::size_t k = 0; k < a.z_final.size(); ++k)
        CHECK((a.z_final[k].values() - b.z_final[k].values()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.iterations_used == b.iterations_used);
}

TEST_CASE("penalty traces grow geometrically and are capped") {
    const auto datasets = chain_problem(2, 60, 17);
    EstimatorConfig config;
    config.penalties.admm_max_iter = 12;
    config.penalties.admm_tol = 1e-14;  // force the full twelve rounds

    std::vector<double> rho1s, rho2s;
    const FitResult result =
        run_federated_fit(datasets, config, inproc(), [&](const IterationStats& s) {
            rho1s.push_back(s.rho1);
            rho2s.push_back(s.rho2);
        });
    CHECK(result.iterations_used == 12);
    for (std::size_t t = 1; t < rho1s.size(); ++t) {
        CHECK(rho1s[t] == doctest::Approx(rho1s[t - 1] * config.gamma1).epsilon(1e-12));
        CHECK(rho2s[t] == doctest::Approx(rho2s[t - 1] * config.gamma2).epsilon(1e-12));
    }

    EstimatorConfig capped = config;
    capped.rho_cap = 2.0;
    const FitResult capped_result = run_federated_fit(datasets, capped, inproc());
    CHECK(capped_result.rho_capped);
}

TEST_CASE("primal residual falls before the stopping rule fires") {
    const auto datasets = chain_problem(3, 150, 19);
    EstimatorConfig config;
    const FitResult result = run_federated_fit(datasets, config, inproc());
    CHECK(result.converged);
    CHECK(result.primal_residuals.back() < 1e-3);
}

TEST_CASE("AVG copies one pooled graph to every site") {
    const auto datasets = chain_problem(3, 100, 23);
    EstimatorConfig config;
    config.mode = EstimatorMode::AVG;
    const FitResult result = run_federated_fit(datasets, config, inproc());
    REQUIRE(result.z_final.size() == 3);
    for (std::size_t k = 1; k < 3; ++k)
        CHECK((result.z_final[k].values() - result.z_final[0].values()).cwiseAbs().maxCoeff() ==
              0.0);
    CHECK(shd(result.graphs[0], chain_truth()) == 0);
}

TEST_CASE("homogeneous ADMM keeps one shared consensus") {
    const auto datasets = chain_problem(3, 100, 29);
    EstimatorConfig config;
    config.mode = EstimatorMode::ADMM_HOMOGENEOUS;
    const FitResult result = run_federated_fit(datasets, config, inproc());
    for (std::size_t k = 1; k < 3; ++k)
        CHECK((result.z_final[k].values() - result.z_final[0].values()).cwiseAbs().maxCoeff() ==
              0.0);
    CHECK(shd(result.graphs[0], chain_truth()) == 0);
}

TEST_CASE("estimator mode names round trip") {
    for (EstimatorMode mode : {EstimatorMode::PFL, EstimatorMode::SIG, EstimatorMode::AVG,
                               EstimatorMode::ADMM_HOMOGENEOUS})
        CHECK(estimator_mode_from_string(to_string(mode)) == mode);
    CHECK_THROWS_AS(estimator_mode_from_string("bogus"), ConfigError);
}

TEST_CASE("config validation rejects bad growth factors") {
    EstimatorConfig config;
    config.gamma1 = 1.0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.gamma1 = 1.25;
    config.rho2_init = 0.0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
}
