#include <CLI11.hpp>
#include <cstdio>
#include <feddag/experiments.hpp>
#include <iostream>

namespace {

using namespace feddag;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNonConvergence = 3;
constexpr int kExitTransport = 4;

struct CommonFitFlags {
    std::string estimator = "pfl";
    std::string transport = "inproc";
    std::string config_path;
    std::string bind_addr;
    std::string exchange_dir;
    std::uint64_t seed = 0;
    double lambda1 = -1;  // negative: keep default
    double lambda2 = -1;
    double edge_threshold = -1;
    int max_iter = -1;
    double timeout_s = 30.0;
    bool quiet = false;
};

void add_fit_flags(CLI::App* cmd, CommonFitFlags& flags) {
    cmd->add_option("--estimator", flags.estimator, "pfl|sig|avg|admm")
        ->capture_default_str();
    cmd->add_option("--transport", flags.transport, "inproc|file|tcp")->capture_default_str();
    cmd->add_option("--config", flags.config_path, "key = value config file");
    cmd->add_option("--bind", flags.bind_addr, "tcp bind address (host:port)");
    cmd->add_option("--exchange-dir", flags.exchange_dir, "file transport directory");
    cmd->add_option("--seed", flags.seed, "random seed")->capture_default_str();
    cmd->add_option("--lambda1", flags.lambda1, "L1 sparsity penalty");
    cmd->add_option("--lambda2", flags.lambda2, "group-fused similarity penalty");
    cmd->add_option("--edge-threshold", flags.edge_threshold, "|weight| cutoff omega");
    cmd->add_option("--max-iter", flags.max_iter, "ADMM iteration cap");
    cmd->add_option("--timeout", flags.timeout_s, "transport timeout in seconds")
        ->capture_default_str();
    cmd->add_flag("--quiet", flags.quiet, "suppress per-iteration progress");
}

// Precedence: flags > config file > built-in defaults.
EstimatorConfig make_config(const CommonFitFlags& flags) {
    EstimatorConfig config;
    config.mode = estimator_mode_from_string(flags.estimator);
    if (!flags.config_path.empty())
        apply_config_file(parse_config_file(flags.config_path), config);
    if (flags.lambda1 >= 0) config.penalties.lambda1 = flags.lambda1;
    if (flags.lambda2 >= 0) config.penalties.lambda2 = flags.lambda2;
    if (flags.edge_threshold >= 0) config.penalties.edge_threshold = flags.edge_threshold;
    if (flags.max_iter > 0) config.penalties.admm_max_iter = flags.max_iter;
    config.seed = flags.seed;
    config.validate();
    return config;
}

FederationOptions make_federation(const CommonFitFlags& flags,
                                  const std::filesystem::path& out_dir) {
    FederationOptions fed;
    fed.kind = transport_kind_from_string(flags.transport);
    fed.bind_addr = flags.bind_addr;
    fed.exchange_dir = flags.exchange_dir.empty() ? out_dir / "exchange"
                                                  : std::filesystem::path(flags.exchange_dir);
    fed.timeout = std::chrono::milliseconds(static_cast<long>(flags.timeout_s * 1000));
    return fed;
}

ProgressCallback progress_printer(bool quiet) {
    if (quiet) return {};
    return [](const IterationStats& s) {
        if (s.iteration % 10 == 0)
            std::fprintf(stderr, "iter %4d  rel %.3e  primal %.3e  rho1 %.2e rho2 %.2e\n",
                         s.iteration, s.relative_change, s.primal_residual, s.rho1, s.rho2);
    };
}

int cmd_gen(int d, int sites, double pl, int n_total, int n_per_site, double expected_edges,
            double edge_prob, double noise_std, std::uint64_t seed, const std::string& out) {
    SynthConfig cfg;
    cfg.dim = d;
    cfg.sites = sites;
    cfg.perturbation_level = pl;
    if (n_total > 0) cfg.n_total = n_total;
    if (n_per_site > 0) cfg.n_per_site = n_per_site;
    if (expected_edges > 0) cfg.er_expected_edges = expected_edges;
    if (edge_prob >= 0) cfg.er_edge_prob = edge_prob;
    cfg.noise_std = noise_std;
    cfg.seed = seed;
    cfg.validate();
    const SynthProblem problem = gen_problem(cfg);
    export_problem(problem, cfg, out);
    std::printf("wrote %d sites (d=%d, %d true edges) to %s\n", cfg.sites, cfg.dim,
                problem.truth.edge_count(), out.c_str());
    return kExitOk;
}

int cmd_fit(const std::string& data_dir, bool standardize, const CommonFitFlags& flags,
            const std::string& out) {
    const std::filesystem::path out_dir(out);
    std::filesystem::create_directories(out_dir);
    const auto datasets = ingest_csv_sites(data_dir, standardize);
    const EstimatorConfig config = make_config(flags);
    const FederationOptions fed = make_federation(flags, out_dir);
    const FitResult result =
        run_federated_fit(datasets, config, fed, progress_printer(flags.quiet));

    std::vector<std::string> ids;
    for (const auto& ds : datasets) ids.push_back(ds.site_id());
    save_fit_result(out_dir / "fit_result.json", result, ids, config);

    std::printf("%s: %d iterations, converged=%s, result in %s\n", to_string(config.mode),
                result.iterations_used, result.converged ? "yes" : "no",
                (out_dir / "fit_result.json").c_str());
    for (std::size_t k = 0; k < result.graphs.size(); ++k)
        std::printf("  %s: %d edges, h=%.2e\n", ids[k].c_str(), result.graphs[k].edge_count(),
                    result.h_values[k]);
    return result.converged ? kExitOk : kExitNonConvergence;
}

int cmd_sweep(const std::string& kind, std::vector<double> grid, int replicates, int d,
              int sites, double pl, int n_total, const std::vector<std::string>& estimators,
              const CommonFitFlags& flags, const std::string& out) {
    ExperimentSpec spec;
    spec.kind = sweep_kind_from_string(kind);
    if (!grid.empty()) spec.grid = std::move(grid);
    else if (spec.kind == SweepKind::VariableCount) spec.grid = {10, 20, 30, 40};
    else if (spec.kind == SweepKind::SiteCount) spec.grid = {2, 4, 8, 16};
    else spec.grid = {0.05, 0.10, 0.15, 0.20, 0.30};
    spec.replicates = replicates;
    spec.dim = d;
    spec.sites = sites;
    spec.perturbation_level = pl;
    if (n_total > 0) spec.n_total = n_total;
    spec.estimators.clear();
    for (const auto& name : estimators)
        spec.estimators.push_back(estimator_mode_from_string(name));
    spec.base_config = make_config(flags);
    spec.federation = make_federation(flags, out);
    spec.out_dir = out;
    spec.seed = flags.seed;
    const SweepSummary summary = run_sweep(spec);
    std::printf("sweep done: %s, %s\n", summary.results_csv.c_str(),
                summary.runs_jsonl.c_str());
    return kExitOk;
}

int cmd_analyze(const std::string& fit_path, const std::string& labels_path,
                const std::vector<std::string>& group_a, const std::vector<std::string>& group_b,
                int top_m, const std::string& out) {
    AnalyzeInputs inputs;
    inputs.fit_path = fit_path;
    inputs.labels = read_labels(labels_path);
    for (const auto& p : group_a) inputs.group_a.emplace_back(p);
    for (const auto& p : group_b) inputs.group_b.emplace_back(p);
    inputs.top_m = top_m;
    inputs.out_dir = out;
    run_analyze(inputs);
    std::printf("analysis written to %s\n", out.c_str());
    return kExitOk;
}

int cmd_serve_site(const std::string& data_csv, std::string site_id,
                   const std::string& transport, const std::string& connect_addr,
                   const std::string& exchange_dir, bool standardize, double timeout_s) {
    Matrix data = read_numeric_csv(data_csv, nullptr);
    if (standardize) {
        for (Eigen::Index c = 0; c < data.cols(); ++c) {
            const double mean = data.col(c).mean();
            data.col(c).array() -= mean;
            const double var = data.col(c).squaredNorm() / static_cast<double>(data.rows());
            if (var > 1e-30) data.col(c) /= std::sqrt(var);
        }
    }
    if (site_id.empty()) site_id = std::filesystem::path(data_csv).stem().string();
    const SiteDataset dataset(site_id, std::move(data));
    const auto timeout = std::chrono::milliseconds(static_cast<long>(timeout_s * 1000));

    if (transport == "tcp") {
        const std::string addr = connect_addr.empty() ? default_bind_addr() : connect_addr;
        TcpSiteChannel channel(addr, dataset.site_id(), timeout);
        std::fprintf(stderr, "site '%s' connected to %s\n", dataset.site_id().c_str(),
                     addr.c_str());
        run_site_worker(dataset, channel);
    } else if (transport == "file") {
        if (exchange_dir.empty()) throw ConfigError("file transport needs --exchange-dir");
        FileSiteChannel channel(exchange_dir, dataset.site_id(), timeout);
        run_site_worker(dataset, channel);
    } else {
        throw ConfigError("serve-site supports --transport tcp|file");
    }
    std::fprintf(stderr, "site '%s' finished\n", dataset.site_id().c_str());
    return kExitOk;
}

int cmd_serve_center(std::vector<std::string> site_ids, int dim, const CommonFitFlags& flags,
                     const std::string& out) {
    if (site_ids.empty()) throw ConfigError("serve-center needs --site-ids");
    const std::filesystem::path out_dir(out);
    std::filesystem::create_directories(out_dir);
    const EstimatorConfig config = make_config(flags);
    const auto timeout = std::chrono::milliseconds(static_cast<long>(flags.timeout_s * 1000));

    std::unique_ptr<FederationTransport> transport;
    if (flags.transport == "tcp") {
        const std::string addr = flags.bind_addr.empty() ? default_bind_addr() : flags.bind_addr;
        auto tcp = std::make_unique<TcpTransport>(addr, site_ids, timeout);
        std::fprintf(stderr, "center listening on port %u\n", tcp->port());
        tcp->accept_sites();
        transport = std::move(tcp);
    } else if (flags.transport == "file") {
        if (flags.exchange_dir.empty()) throw ConfigError("file transport needs --exchange-dir");
        transport = std::make_unique<FileTransport>(flags.exchange_dir, site_ids, timeout);
    } else {
        throw ConfigError("serve-center supports --transport tcp|file");
    }

    const FitResult result =
        fit_center(dim, config, *transport, progress_printer(flags.quiet));
    save_fit_result(out_dir / "fit_result.json", result, site_ids, config);
    std::printf("%s: %d iterations, converged=%s, result in %s\n", to_string(config.mode),
                result.iterations_used, result.converged ? "yes" : "no",
                (out_dir / "fit_result.json").c_str());
    return result.converged ? kExitOk : kExitNonConvergence;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"feddag: federated multi-site DAG structure learning"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic multi-site benchmark");
    int gen_d = 10, gen_sites = 5, gen_n_total = 0, gen_n_per_site = 0;
    double gen_pl = 0.1, gen_expected_edges = 0, gen_edge_prob = -1, gen_noise = 1.0;
    std::uint64_t gen_seed = 0;
    std::string gen_out = "synth";
    gen->add_option("--d", gen_d, "variables")->capture_default_str();
    gen->add_option("--sites,--K", gen_sites, "site count")->capture_default_str();
    gen->add_option("--pl", gen_pl, "perturbation level in [0,1]")->capture_default_str();
    gen->add_option("--n-total", gen_n_total, "total samples, split evenly");
    gen->add_option("--n-per-site", gen_n_per_site, "samples per site");
    gen->add_option("--expected-edges", gen_expected_edges, "ER expected edge count");
    gen->add_option("--edge-prob", gen_edge_prob, "ER edge probability");
    gen->add_option("--noise-std", gen_noise, "SEM noise std")->capture_default_str();
    gen->add_option("--seed", gen_seed, "random seed")->capture_default_str();
    gen->add_option("--out", gen_out, "output directory")->capture_default_str();

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "fit estimators on a directory of site CSVs");
    std::string fit_data, fit_out = "fit_out";
    bool fit_standardize = false;
    CommonFitFlags fit_flags;
    fit_cmd->add_option("--data", fit_data, "directory of site_*.csv")->required();
    fit_cmd->add_flag("--standardize", fit_standardize, "zero-mean/unit-variance per column");
    fit_cmd->add_option("--out", fit_out, "output directory")->capture_default_str();
    add_fit_flags(fit_cmd, fit_flags);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "replicate benchmark sweeps");
    std::string sweep_kind = "d", sweep_out = "sweep_out";
    std::vector<double> sweep_grid;
    std::vector<std::string> sweep_estimators{"pfl", "sig", "avg", "admm"};
    int sweep_reps = 10, sweep_d = 30, sweep_sites = 10, sweep_n_total = 0;
    double sweep_pl = 0.1;
    CommonFitFlags sweep_flags;
    sweep->add_option("--kind", sweep_kind, "d|K|pl")->capture_default_str();
    sweep->add_option("--grid", sweep_grid, "grid values (default: desk-scale grid)");
    sweep->add_option("--replicates", sweep_reps, "replicates per grid point")
        ->capture_default_str();
    sweep->add_option("--d", sweep_d, "fixed d when not swept")->capture_default_str();
    sweep->add_option("--sites,--K", sweep_sites, "fixed K when not swept")
        ->capture_default_str();
    sweep->add_option("--pl", sweep_pl, "fixed perturbation level when not swept")
        ->capture_default_str();
    sweep->add_option("--n-total", sweep_n_total, "fixed total samples (default 3d / 256)");
    sweep->add_option("--estimators", sweep_estimators, "estimators to compare")
        ->capture_default_str();
    sweep->add_option("--out", sweep_out, "output directory")->capture_default_str();
    add_fit_flags(sweep, sweep_flags);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "graph analyses of a stored fit");
    std::string an_fit, an_labels, an_out = "analysis";
    std::vector<std::string> an_group_a, an_group_b;
    int an_top = 10;
    analyze->add_option("--fit", an_fit, "fit_result.json")->required();
    analyze->add_option("--labels", an_labels, "node label file, one per line")->required();
    analyze->add_option("--group-a", an_group_a, "replicate fits, group A");
    analyze->add_option("--group-b", an_group_b, "replicate fits, group B");
    analyze->add_option("--top", an_top, "top-m degree report")->capture_default_str();
    analyze->add_option("--out", an_out, "output directory")->capture_default_str();

    // serve-site
    auto* serve_site = app.add_subcommand("serve-site", "run one site worker");
    std::string ss_data, ss_id, ss_transport = "tcp", ss_connect, ss_dir;
    bool ss_standardize = false;
    double ss_timeout = 300.0;
    serve_site->add_option("--data", ss_data, "site CSV file")->required();
    serve_site->add_option("--site-id", ss_id, "site id (default: file stem)");
    serve_site->add_option("--transport", ss_transport, "tcp|file")->capture_default_str();
    serve_site->add_option("--connect", ss_connect, "center address (tcp)");
    serve_site->add_option("--exchange-dir", ss_dir, "shared directory (file)");
    serve_site->add_flag("--standardize", ss_standardize, "standardize columns");
    serve_site->add_option("--timeout", ss_timeout, "receive timeout in seconds")
        ->capture_default_str();

    // serve-center
    auto* serve_center =
        app.add_subcommand("serve-center", "run the center against remote sites");
    std::vector<std::string> sc_site_ids;
    int sc_dim = 0;
    std::string sc_out = "center_out";
    CommonFitFlags sc_flags;
    sc_flags.transport = "tcp";
    sc_flags.timeout_s = 300.0;
    serve_center->add_option("--site-ids", sc_site_ids, "expected site ids, in order")
        ->required();
    serve_center->add_option("--dim", sc_dim, "variable count d")->required();
    serve_center->add_option("--out", sc_out, "output directory")->capture_default_str();
    add_fit_flags(serve_center, sc_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen(gen_d, gen_sites, gen_pl, gen_n_total, gen_n_per_site,
                           gen_expected_edges, gen_edge_prob, gen_noise, gen_seed, gen_out);
        if (fit_cmd->parsed()) return cmd_fit(fit_data, fit_standardize, fit_flags, fit_out);
        if (sweep->parsed())
            return cmd_sweep(sweep_kind, sweep_grid, sweep_reps, sweep_d, sweep_sites, sweep_pl,
                             sweep_n_total, sweep_estimators, sweep_flags, sweep_out);
        if (analyze->parsed())
            return cmd_analyze(an_fit, an_labels, an_group_a, an_group_b, an_top, an_out);
        if (serve_site->parsed())
            return cmd_serve_site(ss_data, ss_id, ss_transport, ss_connect, ss_dir,
                                  ss_standardize, ss_timeout);
        if (serve_center->parsed())
            return cmd_serve_center(sc_site_ids, sc_dim, sc_flags, sc_out);
    } catch (const TransportFailure& e) {
        std::fprintf(stderr, "transport failure: %s\n", e.what());
        return kExitTransport;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return kExitConfig;
    } catch (const DimensionMismatch& e) {
        std::fprintf(stderr, "dimension mismatch: %s\n", e.what());
        return kExitConfig;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return kExitOk;
}
