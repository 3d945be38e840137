#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <feddag/dag_constraint.hpp>
#include <feddag/harness.hpp>
#include <feddag/local_solver.hpp>
#include <feddag/metrics.hpp>
#include <feddag/prox.hpp>
#include <feddag/synthgen.hpp>

namespace py = pybind11;
using namespace feddag;

namespace {

EstimatorConfig config_from_kwargs(const std::string& estimator, double lambda1, double lambda2,
                                   double edge_threshold, int max_iter, double admm_tol,
                                   std::uint64_t seed) {
    EstimatorConfig config;
    config.mode = estimator_mode_from_string(estimator);
    if (lambda1 >= 0) config.penalties.lambda1 = lambda1;
    if (lambda2 >= 0) config.penalties.lambda2 = lambda2;
    if (edge_threshold > 0) config.penalties.edge_threshold = edge_threshold;
    if (max_iter > 0) config.penalties.admm_max_iter = max_iter;
    if (admm_tol > 0) config.penalties.admm_tol = admm_tol;
    config.seed = seed;
    config.validate();
    return config;
}

py::dict fit_result_to_dict(const FitResult& result, const std::vector<std::string>& ids) {
    py::dict out;
    py::list z_final, graphs;
    for (const auto& z : result.z_final) z_final.append(z.values());
    for (const auto& g : result.graphs) graphs.append(g.adj());
    out["site_ids"] = ids;
    out["z_final"] = z_final;
    out["graphs"] = graphs;
    out["h_values"] = result.h_values;
    out["iterations_used"] = result.iterations_used;
    out["converged"] = result.converged;
    out["rho_capped"] = result.rho_capped;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "feddag: federated multi-site DAG structure learning";

    m.def("matrix_exp", &matrix_exp, py::arg("a"),
          "Dense matrix exponential (scaling-and-squaring).");

    m.def(
        "h_and_grad",
        [](const Matrix& w) {
            const HEval eval = h_and_grad(WeightedAdjacency(w));
            return py::make_tuple(eval.value, eval.gradient);
        },
        py::arg("w"), "Acyclicity value tr(exp(W o W)) - d and its gradient.");

    m.def(
        "is_acyclic",
        [](const IntMatrix& adj) { return is_acyclic_exact(BinaryGraph(adj)); },
        py::arg("adj"), "Exact topological-sort acyclicity check of a 0/1 adjacency.");

    m.def(
        "threshold_graph",
        [](const Matrix& w, double omega) {
            return threshold_graph(WeightedAdjacency(w), omega).adj();
        },
        py::arg("w"), py::arg("omega"),
        "|w| >= omega adjacency with deterministic cycle repair.");

    m.def(
        "local_update",
        [](const Matrix& gram, const Matrix& z, const Matrix& beta, double rho2) {
            return local_update({gram, z, beta, rho2}).values();
        },
        py::arg("gram"), py::arg("z"), py::arg("beta"), py::arg("rho2"),
        "Closed-form site update with the zero-diagonal constraint.");

    m.def(
        "prox_l1",
        [](const Matrix& u, double lambda1) {
            return prox_l1(StackedMatrix{u}, lambda1).values;
        },
        py::arg("u"), py::arg("lambda1"), "Elementwise soft-thresholding.");

    m.def(
        "prox_group_fused",
        [](const Matrix& u, double lambda2, double tol, int max_sweeps) {
            return prox_group_fused(StackedMatrix{u}, lambda2, tol, max_sweeps).value.values;
        },
        py::arg("u"), py::arg("lambda2"), py::arg("tol") = 1e-10,
        py::arg("max_sweeps") = 1000,
        "Group-fused-lasso prox over the rows of a K x p stack.");

    m.def(
        "dipa",
        [](const Matrix& u, double lambda1, double lambda2, double tol, int max_iter) {
            return dipa(StackedMatrix{u}, lambda1, lambda2, tol, max_iter).value.values;
        },
        py::arg("u"), py::arg("lambda1"), py::arg("lambda2"), py::arg("tol") = 1e-10,
        py::arg("max_iter") = 500, "Prox of the L1 plus group-fused penalty.");

    m.def(
        "fit",
        [](const std::vector<Matrix>& site_data, const std::string& estimator, double lambda1,
           double lambda2, double edge_threshold, int max_iter, double admm_tol,
           std::uint64_t seed) {
            std::vector<SiteDataset> datasets;
            std::vector<std::string> ids;
            for (std::size_t k = 0; k < site_data.size(); ++k) {
                ids.push_back("site_" + std::to_string(k));
                datasets.emplace_back(ids.back(), site_data[k]);
            }
            const EstimatorConfig config = config_from_kwargs(
                estimator, lambda1, lambda2, edge_threshold, max_iter, admm_tol, seed);
            FederationOptions options;  // in-process federation
            const FitResult result = run_federated_fit(datasets, config, options);
            return fit_result_to_dict(result, ids);
        },
        py::arg("site_data"), py::arg("estimator") = "pfl", py::arg("lambda1") = -1.0,
        py::arg("lambda2") = -1.0, py::arg("edge_threshold") = -1.0, py::arg("max_iter") = -1,
        py::arg("admm_tol") = -1.0, py::arg("seed") = 0,
        py::call_guard<py::gil_scoped_release>(),
        "Run the federated estimator over an in-process transport; one data "
        "matrix per site.");

    m.def(
        "gen_problem",
        [](int d, int sites, double perturbation_level, int n_per_site, int n_total,
           double expected_edges, double noise_std, std::uint64_t seed) {
            SynthConfig cfg;
            cfg.dim = d;
            cfg.sites = sites;
            cfg.perturbation_level = perturbation_level;
            if (n_per_site > 0) cfg.n_per_site = n_per_site;
            if (n_total > 0) cfg.n_total = n_total;
            if (expected_edges > 0) cfg.er_expected_edges = expected_edges;
            cfg.noise_std = noise_std;
            cfg.seed = seed;
            cfg.validate();
            const SynthProblem problem = gen_problem(cfg);
            py::dict out;
            out["truth"] = problem.truth.adj();
            py::list graphs, weights, datasets;
            for (const auto& g : problem.graphs) graphs.append(g.adj());
            for (const auto& w : problem.weights) weights.append(w.values());
            for (const auto& ds : problem.datasets) datasets.append(ds.data());
            out["graphs"] = graphs;
            out["weights"] = weights;
            out["datasets"] = datasets;
            return out;
        },
        py::arg("d"), py::arg("sites"), py::arg("perturbation_level") = 0.1,
        py::arg("n_per_site") = 0, py::arg("n_total") = 0, py::arg("expected_edges") = 0.0,
        py::arg("noise_std") = 1.0, py::arg("seed") = 0,
        "Synthetic multi-site benchmark: ER truth, perturbed site graphs, "
        "linear-SEM samples.");

    m.def(
        "confusion",
        [](const IntMatrix& learned, const IntMatrix& truth) {
            const ConfusionCounts c = confusion(BinaryGraph(learned), BinaryGraph(truth));
            return py::make_tuple(c.tp, c.fp, c.fn, c.tn);
        },
        py::arg("learned"), py::arg("truth"), "(tp, fp, fn, tn) over directed pairs.");

    m.def(
        "edge_metrics",
        [](const IntMatrix& learned, const IntMatrix& truth) {
            const EdgeMetrics e =
                error_precision_recall_f1(confusion(BinaryGraph(learned), BinaryGraph(truth)));
            py::dict out;
            out["error"] = e.error;
            out["precision"] = e.precision;
            out["recall"] = e.recall;
            out["fscore"] = e.fscore;
            return out;
        },
        py::arg("learned"), py::arg("truth"));

    m.def(
        "shd",
        [](const IntMatrix& a, const IntMatrix& b) {
            return shd(BinaryGraph(a), BinaryGraph(b));
        },
        py::arg("learned"), py::arg("truth"), "Structural Hamming distance.");

    m.def("two_sample_proportion_test", &two_sample_proportion_test, py::arg("x1"),
          py::arg("n1"), py::arg("x2"), py::arg("n2"),
          "Two-sided pooled z-test p-value.");
}
