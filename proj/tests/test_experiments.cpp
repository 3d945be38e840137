#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <feddag/experiments.hpp>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

using namespace feddag;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("feddag_exp_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentSpec tiny_spec(const fs::path& out) {
    ExperimentSpec spec;
    spec.kind = SweepKind::VariableCount;
    spec.grid = {5};
    spec.replicates = 2;
    spec.estimators = {EstimatorMode::PFL, EstimatorMode::SIG};
    spec.sites = 2;
    spec.perturbation_level = 0.0;
    spec.n_total = 80;
    spec.base_config.penalties.admm_max_iter = 40;
    spec.out_dir = out;
    spec.seed = 3;
    return spec;
}

// Builds a stored fit whose per-site graphs all contain `edges`.
void write_group_fit(const fs::path& path, int d, const std::vector<std::pair<int, int>>& edges) {
    FitResult result;
    Matrix z = Matrix::Zero(d, d);
    for (auto [i, j] : edges) z(i, j) = 1.0;
    for (int k = 0; k < 2; ++k) {
        result.z_final.emplace_back(z);
        result.graphs.push_back(threshold_graph(WeightedAdjacency(z), 0.5));
        result.h_values.push_back(0.0);
    }
    result.converged = true;
    EstimatorConfig config;
    save_fit_result(path, result, {"site_0", "site_1"}, config);
}

}  // namespace

TEST_CASE("a tiny sweep writes complete and deterministic outputs") {
    const fs::path out_a = temp_dir("sweep_a");
    const SweepSummary first = run_sweep(tiny_spec(out_a));

    // grid x replicates x estimators records, one JSON object per line.
    std::ifstream runs(first.runs_jsonl);
    int lines = 0;
    std::string line;
    int ok = 0;
    while (std::getline(runs, line)) {
        ++lines;
        if (line.find("\"status\":\"ok\"") != std::string::npos) ++ok;
    }
    CHECK(lines == 1 * 2 * 2);
    CHECK(ok == lines);

    const CsvTable results = read_csv(first.results_csv);
    CHECK(results.rows.size() == 2);  // one row per estimator at the single grid point
    CHECK(results.header[0] == "grid_var");

    const fs::path out_b = temp_dir("sweep_b");
    run_sweep(tiny_spec(out_b));
    CHECK(slurp(out_a / "results.csv") == slurp(out_b / "results.csv"));
    CHECK(slurp(out_a / "runs.jsonl") == slurp(out_b / "runs.jsonl"));

    fs::remove_all(out_a);
    fs::remove_all(out_b);
}

TEST_CASE("score_fit averages per-site confusions") {
    SynthConfig cfg;
    cfg.dim = 6;
    cfg.sites = 3;
    cfg.perturbation_level = 0.0;
    cfg.n_per_site = 10;
    cfg.seed = 9;
    const SynthProblem problem = gen_problem(cfg);

    // A fake result that nails every site exactly.
    FitResult result;
    for (int k = 0; k < 3; ++k) {
        result.graphs.push_back(problem.graphs[static_cast<std::size_t>(k)]);
        result.z_final.push_back(problem.weights[static_cast<std::size_t>(k)]);
        result.h_values.push_back(0.0);
    }
    const RunScore score = score_fit(result, problem);
    CHECK(score.error == 0.0);
    CHECK(score.shd == 0.0);
    CHECK(score.fscore == (problem.truth.edge_count() > 0 ? 1.0 : 0.0));
}

TEST_CASE("analyze emits degree, overlap, and site-specific tables") {
    const fs::path dir = temp_dir("analyze");
    write_group_fit(dir / "fit.json", 4, {{0, 1}, {1, 2}});

    AnalyzeInputs inputs;
    inputs.fit_path = dir / "fit.json";
    inputs.labels = {"n0", "n1", "n2", "n3"};
    inputs.out_dir = dir / "report";
    run_analyze(inputs);

    const CsvTable overlap = read_csv(dir / "report" / "overlapping.csv");
    CHECK(overlap.rows.size() == 2);  // identical site graphs: overlap = edge list

    const CsvTable specific = read_csv(dir / "report" / "site_specific.csv");
    CHECK(specific.rows.empty());

    const CsvTable degrees = read_csv(dir / "report" / "degrees.csv");
    CHECK(degrees.rows.size() == 8);  // 2 sites x 4 nodes
    fs::remove_all(dir);
}

TEST_CASE("analyze rejects label count mismatches") {
    const fs::path dir = temp_dir("analyze_labels");
    write_group_fit(dir / "fit.json", 4, {{0, 1}});
    AnalyzeInputs inputs;
    inputs.fit_path = dir / "fit.json";
    inputs.labels = {"a", "b"};
    inputs.out_dir = dir / "report";
    CHECK_THROWS_AS(run_analyze(inputs), LabelMismatch);
    fs::remove_all(dir);
}

TEST_CASE("two-group proportion test flags a group-specific edge") {
    const fs::path dir = temp_dir("groups");
    // Edge (0,1) shows up in 9 of 10 group-A fits and 1 of 10 group-B fits.
    AnalyzeInputs inputs;
    inputs.labels = {"a", "b", "c"};
    inputs.out_dir = dir / "report";
    for (int r = 0; r < 10; ++r) {
        const fs::path pa = dir / ("a_" + std::to_string(r) + ".json");
        const fs::path pb = dir / ("b_" + std::to_string(r) + ".json");
        std::vector<std::pair<int, int>> base{{1, 2}};
        std::vector<std::pair<int, int>> with_edge{{1, 2}, {0, 1}};
        write_group_fit(pa, 3, r < 9 ? with_edge : base);
        write_group_fit(pb, 3, r < 1 ? with_edge : base);
        inputs.group_a.push_back(pa);
        inputs.group_b.push_back(pb);
    }
    inputs.fit_path = inputs.group_a[0];
    run_analyze(inputs);

    const CsvTable tests = read_csv(dir / "report" / "proportion_tests.csv");
    bool found = false;
    for (const auto& row : tests.rows) {
        if (row[0] == "0" && row[1] == "1") {
            found = true;
            CHECK(std::stod(row[8]) < 0.01);
        }
        if (row[0] == "1" && row[1] == "2") {
            CHECK(std::stod(row[8]) == 1.0);  // shared edge: no difference
        }
    }
    CHECK(found);
    fs::remove_all(dir);
}
