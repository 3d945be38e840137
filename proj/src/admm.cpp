#include "feddag/admm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "feddag/consensus.hpp"
#include "feddag/dag_constraint.hpp"
#include "feddag/transports.hpp"

namespace feddag {

const char* to_string(EstimatorMode mode) {
    switch (mode) {
        case EstimatorMode::PFL: return "pfl";
        case EstimatorMode::SIG: return "sig";
        case EstimatorMode::AVG: return "avg";
        case EstimatorMode::ADMM_HOMOGENEOUS: return "admm";
    }
    return "?";
}

EstimatorMode estimator_mode_from_string(const std::string& name) {
    if (name == "pfl") return EstimatorMode::PFL;
    if (name == "sig") return EstimatorMode::SIG;
    if (name == "avg") return EstimatorMode::AVG;
    if (name == "admm") return EstimatorMode::ADMM_HOMOGENEOUS;
    throw ConfigError("unknown estimator '" + name + "' (want pfl|sig|avg|admm)");
}

void EstimatorConfig::validate() const {
    penalties.validate();
    if (rho1_init <= 0 || rho2_init <= 0) throw ConfigError("rho inits must be > 0");
    if (gamma1 <= 1 || gamma2 <= 1) throw ConfigError("gamma growth factors must be > 1");
    if (rho_cap < rho1_init || rho_cap < rho2_init) throw ConfigError("rho_cap below rho init");
    if (inner_prox_steps < 1) throw ConfigError("inner_prox_steps must be >= 1");
    if (inner_prox_tol <= 0) throw ConfigError("inner_prox_tol must be > 0");
}

namespace {

// Edges inside a nontrivial strongly connected component are exactly the
// edges lying on some directed cycle.
std::vector<int> scc_ids(const IntMatrix& adj) {
    const int d = static_cast<int>(adj.rows());
    std::vector<int> index(d, -1), lowlink(d, 0), component(d, -1);
    std::vector<bool> on_stack(d, false);
    std::vector<int> stack;
    int next_index = 0, next_component = 0;

    struct Frame {
        int v;
        int next_child;
    };
    for (int root = 0; root < d; ++root) {
        if (index[root] != -1) continue;
        std::vector<Frame> call_stack{{root, 0}};
        index[root] = lowlink[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!call_stack.empty()) {
            auto& frame = call_stack.back();
            const int v = frame.v;
            bool descended = false;
            while (frame.next_child < d) {
                const int w = frame.next_child++;
                if (adj(v, w) == 0) continue;
                if (index[w] == -1) {
                    index[w] = lowlink[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    call_stack.push_back({w, 0});
                    descended = true;
                    break;
                }
                if (on_stack[w]) lowlink[v] = std::min(lowlink[v], index[w]);
            }
            if (descended) continue;
            if (lowlink[v] == index[v]) {
                for (;;) {
                    const int w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    component[w] = next_component;
                    if (w == v) break;
                }
                ++next_component;
            }
            call_stack.pop_back();
            if (!call_stack.empty()) {
                const int parent = call_stack.back().v;
                lowlink[parent] = std::min(lowlink[parent], lowlink[v]);
            }
        }
    }
    return component;
}

}  // namespace

BinaryGraph threshold_graph(const WeightedAdjacency& w, double omega) {
    if (omega <= 0) throw ConfigError("threshold_graph: omega must be > 0");
    const int d = w.dim();
    IntMatrix adj = IntMatrix::Zero(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j && std::abs(w(i, j)) >= omega) adj(i, j) = 1;

    for (;;) {
        const std::vector<int> comp = scc_ids(adj);
        std::vector<int> comp_size(d, 0);
        for (int v = 0; v < d; ++v) ++comp_size[comp[v]];

        int best_i = -1, best_j = -1;
        double best_weight = 0.0;
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                if (adj(i, j) == 0 || comp[i] != comp[j] || comp_size[comp[i]] < 2) continue;
                const double mag = std::abs(w(i, j));
                if (best_i == -1 || mag < best_weight ||
                    (mag == best_weight && (i < best_i || (i == best_i && j < best_j)))) {
                    best_i = i;
                    best_j = j;
                    best_weight = mag;
                }
            }
        }
        if (best_i == -1) break;
        adj(best_i, best_j) = 0;
    }
    return BinaryGraph(std::move(adj));
}

namespace {

// Consensus feasibility required before the stopping rule may fire; an
// iterate can settle long before W and Z actually agree.
constexpr double kPrimalGate = 1e-3;

struct CenterState {
    AdmmState admm;
    std::vector<bool> active;  // SIG freezes sites one by one
    double warm_c = 0.0;
    std::vector<double> warm_c_per_site;  // SIG keeps an independent C per site
};

FitResult run_center_loop(int dim, const EstimatorConfig& config,
                          FederationTransport& transport, const ProgressCallback& progress) {
    const int K = transport.site_count();
    const PenaltyConfig& pen = config.penalties;

    CenterState st;
    st.admm.site_count = K;
    st.admm.z.assign(K, Matrix::Zero(dim, dim));
    st.admm.alpha.assign(K, 0.0);
    st.admm.beta.assign(K, Matrix::Zero(dim, dim));
    st.admm.rho1 = config.rho1_init;
    st.admm.rho2 = config.rho2_init;
    st.admm.gamma1 = config.gamma1;
    st.admm.gamma2 = config.gamma2;
    st.active.assign(K, true);
    st.warm_c_per_site.assign(K, 0.0);

    FitResult result;
    const bool homogeneous = config.mode == EstimatorMode::ADMM_HOMOGENEOUS;
    // Without the fusion penalty the joint problem decouples by site, so
    // SIG and a lambda2 = 0 run share the independent per-site path (and
    // per-site stopping).
    const bool sig = config.mode == EstimatorMode::SIG ||
                     (!homogeneous && pen.lambda2 == 0.0);

    bool stopped = false;
    double settle = 1.0;  // last relative change; loosens the prox early on
    std::uint32_t t = 0;
    while (t < static_cast<std::uint32_t>(pen.admm_max_iter)) {
        ++t;
        st.admm.iteration = static_cast<int>(t);
        // Solving the consensus subproblem far below the outer movement
        // is wasted work; tighten as the iterate settles.
        const double dipa_tol_t = std::clamp(1e-4 * settle, pen.dipa_tol, 1e-6);
        const double inner_tol_t = std::clamp(1e-3 * settle, config.inner_prox_tol, 1e-4);
        const int inner_cap_t =
            settle > 1e-3 ? std::min(50, config.inner_prox_steps) : config.inner_prox_steps;

        std::vector<BroadcastPayload> down(K);
        for (int k = 0; k < K; ++k)
            down[k] = BroadcastPayload{st.admm.z[k], st.admm.beta[k], st.admm.rho2};
        transport.broadcast(t, down);

        std::vector<RoundMessage> replies = transport.gather(t);
        std::vector<Matrix> w(K);
        for (int k = 0; k < K; ++k) {
            if (replies[k].dim != static_cast<std::uint32_t>(dim))
                throw ProtocolViolation("reply with wrong dim from site '" +
                                        replies[k].site_id + "'");
            if (!replies[k].payload.allFinite())
                throw NonFinite("non-finite W from site '" + replies[k].site_id + "'");
            w[k] = std::move(replies[k].payload);
        }

        const std::vector<Matrix> z_old = st.admm.z;

        if (sig) {
            // Independent single-site problems: per-site prox-gradient with
            // lambda2 = 0, skipping sites whose own stopping rule fired.
            for (int k = 0; k < K; ++k) {
                if (!st.active[static_cast<std::size_t>(k)]) continue;
                GlobalStepInput in;
                in.z_prev = {st.admm.z[k]};
                in.w_new = {w[k]};
                in.alpha = {st.admm.alpha[k]};
                in.beta = {st.admm.beta[k]};
                in.rho1 = st.admm.rho1;
                in.rho2 = st.admm.rho2;
                in.lambda1 = pen.lambda1;
                in.lambda2 = 0.0;
                in.dipa_tol = dipa_tol_t;
                in.dipa_max_iter = pen.dipa_max_iter;
                in.step_constant = st.warm_c_per_site[static_cast<std::size_t>(k)];
                in.inner_steps = inner_cap_t;
                in.inner_tol = inner_tol_t;
                GlobalStepResult step = global_update(in);
                st.admm.z[k] = std::move(step.z_new[0]);
                st.warm_c_per_site[static_cast<std::size_t>(k)] = step.step_constant;
                result.prox_converged = result.prox_converged && step.prox_converged;
            }
        } else {
            GlobalStepInput in;
            in.z_prev = st.admm.z;
            in.w_new = w;
            in.alpha = st.admm.alpha;
            in.beta = st.admm.beta;
            in.rho1 = st.admm.rho1;
            in.rho2 = st.admm.rho2;
            in.lambda1 = pen.lambda1;
            in.lambda2 = homogeneous ? 0.0 : pen.lambda2;
            in.dipa_tol = dipa_tol_t;
            in.dipa_max_iter = pen.dipa_max_iter;
            in.step_constant = st.warm_c;
            in.inner_steps = inner_cap_t;
            in.inner_tol = inner_tol_t;
            in.shared_consensus = homogeneous;
            GlobalStepResult step = global_update(in);
            st.admm.z = std::move(step.z_new);
            st.warm_c = step.step_constant;
            result.prox_converged = result.prox_converged && step.prox_converged;
        }

        // Dual update (Eq. 20 order: duals, then penalty growth, then the
        // stopping check).
        std::vector<double> h_now(K, 0.0);
        for (int k = 0; k < K; ++k) {
            if (sig && !st.active[static_cast<std::size_t>(k)]) continue;
            const double h = h_and_grad(st.admm.z[k]).value;
            h_now[static_cast<std::size_t>(k)] = h;
            st.admm.beta[k] += st.admm.rho2 * (w[k] - st.admm.z[k]);
            // The constraint gradient vanishes on exact DAGs, so the
            // multiplier never settles; once a site is feasible, further
            // accumulation only injects drift.
            if (h > pen.h_tol) st.admm.alpha[k] += st.admm.rho1 * h;
        }

        const double new_rho1 = st.admm.rho1 * st.admm.gamma1;
        const double new_rho2 = st.admm.rho2 * st.admm.gamma2;
        if (new_rho1 > config.rho_cap || new_rho2 > config.rho_cap) result.rho_capped = true;
        st.admm.rho1 = std::min(new_rho1, config.rho_cap);
        st.admm.rho2 = std::min(new_rho2, config.rho_cap);

        IterationStats stats;
        stats.iteration = static_cast<int>(t);
        stats.rho1 = st.admm.rho1;
        stats.rho2 = st.admm.rho2;
        double change_sum = 0.0;
        double h_max = 0.0;
        for (int k = 0; k < K; ++k) {
            stats.primal_residual =
                std::max(stats.primal_residual, (w[k] - st.admm.z[k]).norm());
            const double denom = std::max(st.admm.z[k].norm(), 1e-12);
            const double rel = (st.admm.z[k] - z_old[k]).norm() / denom;
            change_sum += rel;
            h_max = std::max(h_max, h_now[static_cast<std::size_t>(k)]);
            stats.dual_residual += st.admm.rho2 * (st.admm.z[k] - z_old[k]).norm();
            // A site is done when its own iterate settles AND its
            // constraint and consensus are met; settling alone can precede
            // feasibility.
            if (sig && st.active[static_cast<std::size_t>(k)] && rel < pen.admm_tol &&
                h_now[static_cast<std::size_t>(k)] <= pen.h_tol &&
                (w[k] - st.admm.z[k]).norm() <= kPrimalGate)
                st.active[static_cast<std::size_t>(k)] = false;
        }
        stats.relative_change = change_sum;
        settle = std::max(change_sum, 1e-12);
        result.primal_residuals.push_back(stats.primal_residual);
        result.dual_residuals.push_back(stats.dual_residual);
        if (progress) progress(stats);

        if (sig) {
            stopped = std::none_of(st.active.begin(), st.active.end(), [](bool a) { return a; });
        } else {
            stopped = change_sum < pen.admm_tol && h_max <= pen.h_tol &&
                      stats.primal_residual <= kPrimalGate;
        }
        if (stopped) break;
    }
    transport.terminate();

    result.iterations_used = static_cast<int>(t);
    double max_h = 0.0;
    for (int k = 0; k < K; ++k) {
        result.z_final.emplace_back(st.admm.z[k]);
        const double h = h_and_grad(st.admm.z[k]).value;
        result.h_values.push_back(h);
        max_h = std::max(max_h, h);
        result.graphs.push_back(threshold_graph(result.z_final.back(), pen.edge_threshold));
    }
    result.converged = stopped && max_h <= pen.h_tol;
    return result;
}

FitResult run_pooled_baseline(const std::vector<SiteDataset>& datasets,
                              const EstimatorConfig& config, const ProgressCallback& progress) {
    int total = 0, dim = datasets[0].dim();
    for (const auto& ds : datasets) total += ds.n();
    Matrix pooled(total, dim);
    int row = 0;
    for (const auto& ds : datasets) {
        pooled.middleRows(row, ds.n()) = ds.data();
        row += ds.n();
    }
    std::vector<SiteDataset> pooled_sites;
    pooled_sites.emplace_back("pooled", std::move(pooled));

    EstimatorConfig sub = config;
    sub.mode = EstimatorMode::PFL;  // K = 1: fusion is vacuous

    InProcTransport transport({"pooled"});
    std::exception_ptr site_error;
    std::thread worker([&] {
        try {
            run_site_worker(pooled_sites[0], transport.site_channel(0));
        } catch (...) {
            site_error = std::current_exception();
        }
    });
    FitResult single;
    try {
        single = fit_center(dim, sub, transport, progress);
    } catch (...) {
        transport.terminate();
        worker.join();
        throw;
    }
    worker.join();
    if (site_error) std::rethrow_exception(site_error);

    FitResult out = single;
    const std::size_t K = datasets.size();
    out.z_final.assign(K, single.z_final[0]);
    out.graphs.assign(K, single.graphs[0]);
    out.h_values.assign(K, single.h_values[0]);
    return out;
}

}  // namespace

FitResult fit_center(int dim, const EstimatorConfig& config, FederationTransport& transport,
                     const ProgressCallback& progress) {
    config.validate();
    if (config.mode == EstimatorMode::AVG)
        throw ConfigError("AVG pools raw data and cannot run behind a transport");
    if (transport.site_count() < 1) throw EmptyDataset("fit_center: no sites registered");
    return run_center_loop(dim, config, transport, progress);
}

FitResult fit(const std::vector<SiteDataset>& datasets, const EstimatorConfig& config,
              FederationTransport& transport, const ProgressCallback& progress) {
    config.validate();
    const ProblemDescriptor desc = validate_problem(datasets);
    if (config.mode == EstimatorMode::AVG) {
        // Centralized baseline: pools raw rows, so it runs beside the
        // transport rather than through it. Release any waiting workers.
        FitResult result = run_pooled_baseline(datasets, config, progress);
        transport.terminate();
        return result;
    }
    if (transport.site_count() != desc.site_count)
        throw DimensionMismatch("fit: transport has " + std::to_string(transport.site_count()) +
                                " sites, datasets have " + std::to_string(desc.site_count));
    return run_center_loop(desc.dim, config, transport, progress);
}

}  // namespace feddag
