#include "feddag/experiments.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace feddag {

namespace fs = std::filesystem;
using nlohmann::json;

SweepKind sweep_kind_from_string(const std::string& name) {
    if (name == "d" || name == "sweep_d") return SweepKind::VariableCount;
    if (name == "K" || name == "k" || name == "sweep_K") return SweepKind::SiteCount;
    if (name == "pl" || name == "p_l" || name == "sweep_pl") return SweepKind::PerturbationLevel;
    throw ConfigError("unknown sweep kind '" + name + "' (want d|K|pl)");
}

const char* to_string(SweepKind kind) {
    switch (kind) {
        case SweepKind::VariableCount: return "d";
        case SweepKind::SiteCount: return "K";
        case SweepKind::PerturbationLevel: return "pl";
    }
    return "?";
}

void ExperimentSpec::validate() const {
    if (grid.empty()) throw ConfigError("sweep: empty grid");
    if (replicates < 1) throw ConfigError("sweep: replicates must be >= 1");
    if (estimators.empty()) throw ConfigError("sweep: no estimators");
    if (out_dir.empty()) throw ConfigError("sweep: no output directory");
    base_config.validate();
}

RunScore score_fit(const FitResult& result, const SynthProblem& problem) {
    RunScore score;
    const std::size_t K = problem.graphs.size();
    for (std::size_t k = 0; k < K; ++k) {
        const ConfusionCounts c = confusion(result.graphs[k], problem.graphs[k]);
        const EdgeMetrics m = error_precision_recall_f1(c);
        score.error += m.error;
        score.precision += m.precision;
        score.recall += m.recall;
        score.fscore += m.fscore;
        score.shd += shd(result.graphs[k], problem.graphs[k]);
    }
    const double kd = static_cast<double>(K);
    score.error /= kd;
    score.precision /= kd;
    score.recall /= kd;
    score.fscore /= kd;
    score.shd /= kd;
    return score;
}

namespace {

SynthConfig problem_config(const ExperimentSpec& spec, double grid_value) {
    SynthConfig cfg;
    cfg.dim = spec.dim;
    cfg.sites = spec.sites;
    cfg.perturbation_level = spec.perturbation_level;
    switch (spec.kind) {
        case SweepKind::VariableCount:
            cfg.dim = static_cast<int>(grid_value);
            break;
        case SweepKind::SiteCount:
            cfg.sites = static_cast<int>(grid_value);
            break;
        case SweepKind::PerturbationLevel:
            cfg.perturbation_level = grid_value;
            break;
    }
    if (spec.n_total) {
        cfg.n_total = *spec.n_total;
    } else if (spec.kind == SweepKind::SiteCount) {
        cfg.n_total = 256;
    } else {
        cfg.n_total = 3 * cfg.dim;  // n_t = 3d
    }
    return cfg;
}

struct Accumulator {
    std::vector<RunScore> scores;

    void add(const RunScore& s) { scores.push_back(s); }

    static std::pair<double, double> mean_std(const std::vector<double>& xs) {
        if (xs.empty()) return {0.0, 0.0};
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var /= static_cast<double>(xs.size());
        return {mean, std::sqrt(var)};
    }
};

}  // namespace

SweepSummary run_sweep(const ExperimentSpec& spec) {
    spec.validate();
    fs::create_directories(spec.out_dir);

    SweepSummary summary;
    summary.results_csv = spec.out_dir / "results.csv";
    summary.runs_jsonl = spec.out_dir / "runs.jsonl";

    std::ofstream runs(summary.runs_jsonl, std::ios::trunc);
    if (!runs) throw ParseError("cannot write " + summary.runs_jsonl.string());

    CsvTable results;
    results.header = {"grid_var",       to_string(spec.kind), "estimator",     "error_mean",
                      "error_std",      "shd_mean",           "shd_std",       "precision_mean",
                      "precision_std",  "fscore_mean",        "fscore_std",    "replicates_ok"};

    Rng root(spec.seed);
    for (std::size_t gi = 0; gi < spec.grid.size(); ++gi) {
        const double grid_value = spec.grid[gi];
        std::map<EstimatorMode, Accumulator> acc;

        for (int rep = 0; rep < spec.replicates; ++rep) {
            SynthConfig cfg = problem_config(spec, grid_value);
            const Rng stream = root.split((static_cast<std::uint64_t>(gi) << 32) |
                                          static_cast<std::uint64_t>(rep));
            cfg.seed = stream.seed() ^ stream.stream();
            const SynthProblem problem = gen_problem(cfg);

            for (EstimatorMode mode : spec.estimators) {
                EstimatorConfig config = spec.base_config;
                config.mode = mode;

                json record;
                record["sweep"] = to_string(spec.kind);
                record["grid_value"] = grid_value;
                record["replicate"] = rep;
                record["estimator"] = to_string(mode);
                record["seed"] = cfg.seed;
                record["dim"] = cfg.dim;
                record["sites"] = cfg.sites;
                record["perturbation_level"] = cfg.perturbation_level;
                try {
                    FederationOptions fed = spec.federation;
                    if (fed.kind == TransportKind::File && fed.exchange_dir.empty())
                        fed.exchange_dir = spec.out_dir / "exchange";
                    const FitResult fit = run_federated_fit(problem.datasets, config, fed);
                    const RunScore score = score_fit(fit, problem);
                    acc[mode].add(score);
                    record["status"] = "ok";
                    record["error"] = score.error;
                    record["shd"] = score.shd;
                    record["precision"] = score.precision;
                    record["recall"] = score.recall;
                    record["fscore"] = score.fscore;
                    record["iterations"] = fit.iterations_used;
                    record["converged"] = fit.converged;
                } catch (const std::exception& e) {
                    record["status"] = "failed";
                    record["error_message"] = e.what();
                }
                runs << record.dump() << '\n';
            }
        }

        for (EstimatorMode mode : spec.estimators) {
            const auto& scores = acc[mode].scores;
            std::vector<double> error, shd_v, precision, fscore;
            for (const auto& s : scores) {
                error.push_back(s.error);
                shd_v.push_back(s.shd);
                precision.push_back(s.precision);
                fscore.push_back(s.fscore);
            }
            const auto [e_m, e_s] = Accumulator::mean_std(error);
            const auto [s_m, s_s] = Accumulator::mean_std(shd_v);
            const auto [p_m, p_s] = Accumulator::mean_std(precision);
            const auto [f_m, f_s] = Accumulator::mean_std(fscore);
            results.rows.push_back({format_double(grid_value), format_double(grid_value),
                                    to_string(mode), format_double(e_m), format_double(e_s),
                                    format_double(s_m), format_double(s_s), format_double(p_m),
                                    format_double(p_s), format_double(f_m), format_double(f_s),
                                    std::to_string(scores.size())});
        }
    }
    write_csv(summary.results_csv, results);
    return summary;
}

namespace {

std::vector<BinaryGraph> graphs_of(const StoredFitResult& stored) {
    std::vector<BinaryGraph> graphs;
    for (const auto& adj : stored.graphs) graphs.emplace_back(adj);
    return graphs;
}

// An edge "appears" in a stored fit when every site's graph contains it
// (the overlap), matching how published connections are counted.
std::set<std::pair<int, int>> overlap_edges(const StoredFitResult& stored) {
    const auto graphs = graphs_of(stored);
    const BinaryGraph overlap = overlapping_connections(graphs);
    std::set<std::pair<int, int>> edges;
    for (int i = 0; i < overlap.dim(); ++i)
        for (int j = 0; j < overlap.dim(); ++j)
            if (overlap.has_edge(i, j)) edges.insert({i, j});
    return edges;
}

}  // namespace

void run_analyze(const AnalyzeInputs& inputs) {
    fs::create_directories(inputs.out_dir);
    const StoredFitResult stored = load_fit_result(inputs.fit_path);
    if (static_cast<int>(inputs.labels.size()) != stored.dim)
        throw LabelMismatch("analyze: " + std::to_string(inputs.labels.size()) +
                            " labels for dim " + std::to_string(stored.dim));
    const auto graphs = graphs_of(stored);

    CsvTable degrees;
    degrees.header = {"site", "node", "label", "out_degree", "in_degree"};
    CsvTable top;
    top.header = {"site", "direction", "rank", "label", "degree"};
    for (std::size_t k = 0; k < graphs.size(); ++k) {
        const DegreeReport rep = connection_degrees(graphs[k], inputs.labels, inputs.top_m);
        for (int v = 0; v < graphs[k].dim(); ++v) {
            degrees.rows.push_back({stored.site_ids[k], std::to_string(v), inputs.labels[v],
                                    std::to_string(rep.out_degree[v]),
                                    std::to_string(rep.in_degree[v])});
        }
        for (std::size_t r = 0; r < rep.top_out.size(); ++r)
            top.rows.push_back({stored.site_ids[k], "out", std::to_string(r + 1),
                                inputs.labels[rep.top_out[r].first],
                                std::to_string(rep.top_out[r].second)});
        for (std::size_t r = 0; r < rep.top_in.size(); ++r)
            top.rows.push_back({stored.site_ids[k], "in", std::to_string(r + 1),
                                inputs.labels[rep.top_in[r].first],
                                std::to_string(rep.top_in[r].second)});
    }
    write_csv(inputs.out_dir / "degrees.csv", degrees);
    write_csv(inputs.out_dir / "top_degrees.csv", top);

    const BinaryGraph overlap = overlapping_connections(graphs);
    CsvTable overlap_csv;
    overlap_csv.header = {"from", "to", "from_label", "to_label"};
    for (int i = 0; i < overlap.dim(); ++i)
        for (int j = 0; j < overlap.dim(); ++j)
            if (overlap.has_edge(i, j))
                overlap_csv.rows.push_back({std::to_string(i), std::to_string(j),
                                            inputs.labels[i], inputs.labels[j]});
    write_csv(inputs.out_dir / "overlapping.csv", overlap_csv);

    CsvTable specific;
    specific.header = {"site", "from", "to", "from_label", "to_label"};
    for (std::size_t k = 0; k < graphs.size(); ++k) {
        const BinaryGraph unique = site_specific_connections(graphs, static_cast<int>(k));
        for (int i = 0; i < unique.dim(); ++i)
            for (int j = 0; j < unique.dim(); ++j)
                if (unique.has_edge(i, j))
                    specific.rows.push_back({stored.site_ids[k], std::to_string(i),
                                             std::to_string(j), inputs.labels[i],
                                             inputs.labels[j]});
    }
    write_csv(inputs.out_dir / "site_specific.csv", specific);

    if (inputs.group_a.empty() || inputs.group_b.empty()) return;

    // Proportion of replicate fits whose overlap contains each edge,
    // group A vs group B.
    std::set<std::pair<int, int>> candidate_edges;
    std::vector<std::set<std::pair<int, int>>> a_edges, b_edges;
    for (const auto& path : inputs.group_a) {
        a_edges.push_back(overlap_edges(load_fit_result(path)));
        candidate_edges.insert(a_edges.back().begin(), a_edges.back().end());
    }
    for (const auto& path : inputs.group_b) {
        b_edges.push_back(overlap_edges(load_fit_result(path)));
        candidate_edges.insert(b_edges.back().begin(), b_edges.back().end());
    }

    CsvTable tests;
    tests.header = {"from", "to",      "from_label", "to_label", "count_a",
                    "n_a",  "count_b", "n_b",        "p_value"};
    for (const auto& [i, j] : candidate_edges) {
        long xa = 0, xb = 0;
        for (const auto& edges : a_edges) xa += edges.count({i, j});
        for (const auto& edges : b_edges) xb += edges.count({i, j});
        const double p = two_sample_proportion_test(xa, static_cast<long>(a_edges.size()), xb,
                                                    static_cast<long>(b_edges.size()));
        tests.rows.push_back({std::to_string(i), std::to_string(j), inputs.labels[i],
                              inputs.labels[j], std::to_string(xa),
                              std::to_string(a_edges.size()), std::to_string(xb),
                              std::to_string(b_edges.size()), format_double(p)});
    }
    write_csv(inputs.out_dir / "proportion_tests.csv", tests);
}

}  // namespace feddag
