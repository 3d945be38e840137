#include "feddag/synthgen.hpp"

#include <cmath>
#include <numeric>

#include "feddag/dag_constraint.hpp"

namespace feddag {

void SynthConfig::validate() const {
    if (dim < 2) throw ConfigError("synth: dim must be >= 2");
    if (sites < 1) throw ConfigError("synth: sites must be >= 1");
    if (perturbation_level < 0 || perturbation_level > 1)
        throw ConfigError("synth: perturbation level must be in [0, 1]");
    if (n_total.has_value() == n_per_site.has_value())
        throw ConfigError("synth: set exactly one of n_total / n_per_site");
    if (n_total && *n_total < sites) throw ConfigError("synth: n_total < sites");
    if (n_per_site && *n_per_site < 1) throw ConfigError("synth: n_per_site must be >= 1");
    if (er_edge_prob && er_expected_edges)
        throw ConfigError("synth: set at most one ER density control");
    if (er_edge_prob && (*er_edge_prob < 0 || *er_edge_prob > 1))
        throw ConfigError("synth: er_edge_prob must be in [0, 1]");
    if (weight_min <= 0 || weight_max < weight_min)
        throw ConfigError("synth: need 0 < weight_min <= weight_max");
    if (noise_std < 0) throw ConfigError("synth: noise_std must be >= 0");
}

double SynthConfig::edge_probability() const {
    if (er_edge_prob) return *er_edge_prob;
    const double pairs = dim * (dim - 1) / 2.0;
    const double expected = er_expected_edges ? *er_expected_edges : static_cast<double>(dim);
    return std::min(1.0, expected / pairs);
}

std::vector<int> SynthConfig::site_sample_counts() const {
    std::vector<int> counts(static_cast<std::size_t>(sites));
    if (n_per_site) {
        std::fill(counts.begin(), counts.end(), *n_per_site);
        return counts;
    }
    const int base = *n_total / sites;
    const int remainder = *n_total % sites;
    for (int k = 0; k < sites; ++k) counts[static_cast<std::size_t>(k)] = base + (k < remainder);
    return counts;
}

BinaryGraph gen_er_dag(int dim, double edge_prob, Rng& rng) {
    if (edge_prob < 0 || edge_prob > 1) throw ConfigError("gen_er_dag: bad edge probability");
    // Random topological order; edges only run forward along it.
    std::vector<std::size_t> order = rng.sample_without_replacement(
        static_cast<std::size_t>(dim), static_cast<std::size_t>(dim));
    IntMatrix adj = IntMatrix::Zero(dim, dim);
    for (int a = 0; a < dim; ++a) {
        for (int b = a + 1; b < dim; ++b) {
            if (rng.next_double() < edge_prob)
                adj(static_cast<int>(order[static_cast<std::size_t>(a)]),
                    static_cast<int>(order[static_cast<std::size_t>(b)])) = 1;
        }
    }
    return BinaryGraph(std::move(adj));
}

namespace {

struct Modification {
    int i, j;
    enum Kind { Add, Delete, Reverse } kind;
};

}  // namespace

PerturbResult perturb(const BinaryGraph& truth, double perturbation_level, Rng& rng) {
    if (perturbation_level < 0 || perturbation_level > 1)
        throw ConfigError("perturb: level must be in [0, 1]");
    const int d = truth.dim();
    const int n_offdiag = d * (d - 1);
    const int n_select =
        static_cast<int>(std::floor(perturbation_level * n_offdiag + 0.5));  // round half up

    std::vector<std::size_t> positions = rng.sample_without_replacement(
        static_cast<std::size_t>(n_offdiag), static_cast<std::size_t>(n_select));

    // The add / delete / reverse rule tests the original truth entries;
    // every selected position yields one modification.
    std::vector<Modification> mods;
    for (std::size_t pos : positions) {
        // Enumerate off-diagonal cells row-major, skipping the diagonal.
        const int row = static_cast<int>(pos) / (d - 1);
        int col = static_cast<int>(pos) % (d - 1);
        if (col >= row) ++col;

        if (!truth.has_edge(row, col)) {
            mods.push_back({row, col, Modification::Add});
        } else if (rng.next_double() < 0.5) {
            mods.push_back({row, col, Modification::Delete});
        } else {
            mods.push_back({row, col, Modification::Reverse});
        }
    }

    auto build = [&](std::size_t keep) {
        IntMatrix adj = truth.adj();
        for (std::size_t m = 0; m < mods.size(); ++m) {
            const auto& mod = mods[m];
            // Deletions always apply; they cannot create cycles.
            if (mod.kind == Modification::Delete) {
                adj(mod.i, mod.j) = 0;
            } else if (m < keep) {
                if (mod.kind == Modification::Add) {
                    adj(mod.i, mod.j) = 1;
                } else {
                    adj(mod.i, mod.j) = 0;
                    adj(mod.j, mod.i) = 1;
                }
            }
        }
        return adj;
    };

    // Drop cycle-creating adds/reversals newest-first until acyclic.
    std::size_t keep = mods.size();
    IntMatrix adj = build(keep);
    while (!is_acyclic_exact(BinaryGraph(adj))) {
        --keep;
        adj = build(keep);
    }

    int realized = 0;
    for (std::size_t m = 0; m < mods.size(); ++m)
        if (mods[m].kind == Modification::Delete || m < keep) ++realized;

    PerturbResult out{BinaryGraph(std::move(adj)), n_select, realized};
    return out;
}

WeightedAdjacency assign_weights(const BinaryGraph& g, Rng& rng, double weight_min,
                                 double weight_max) {
    if (!is_acyclic_exact(g)) throw CyclicInput("assign_weights: graph has a cycle");
    const int d = g.dim();
    Matrix w = Matrix::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            if (!g.has_edge(i, j)) continue;
            const double magnitude = weight_min + (weight_max - weight_min) * rng.next_double();
            const double sign = rng.next_double() < 0.5 ? -1.0 : 1.0;
            w(i, j) = sign * magnitude;
        }
    }
    return WeightedAdjacency(std::move(w));
}

Matrix sample_sem(const WeightedAdjacency& w, int n, double noise_std, Rng& rng) {
    const int d = w.dim();
    if (n < 1) throw ConfigError("sample_sem: n must be >= 1");

    // Topological order of the support.
    IntMatrix support = IntMatrix::Zero(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (w(i, j) != 0.0) support(i, j) = 1;
    BinaryGraph g(support);
    if (!is_acyclic_exact(g)) throw CyclicInput("sample_sem: weight matrix has a cycle");

    std::vector<int> indegree(static_cast<std::size_t>(d), 0);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) indegree[static_cast<std::size_t>(j)] += support(i, j);
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(d));
    std::vector<int> ready;
    for (int j = d - 1; j >= 0; --j)
        if (indegree[static_cast<std::size_t>(j)] == 0) ready.push_back(j);
    while (!ready.empty()) {
        const int u = ready.back();
        ready.pop_back();
        order.push_back(u);
        for (int v = 0; v < d; ++v)
            if (support(u, v) && --indegree[static_cast<std::size_t>(v)] == 0)
                ready.push_back(v);
    }

    Matrix data(n, d);
    for (int s = 0; s < n; ++s)
        for (int j = 0; j < d; ++j) data(s, j) = noise_std * rng.next_normal();
    for (int v : order) {
        // Parents already filled: x_v = X w_col_v + z_v.
        Eigen::VectorXd contribution = data * w.values().col(v);
        data.col(v) += contribution;
    }
    return data;
}

SynthProblem gen_problem(const SynthConfig& config) {
    config.validate();
    Rng root(config.seed);

    Rng truth_rng = root.split(0);
    const BinaryGraph truth = gen_er_dag(config.dim, config.edge_probability(), truth_rng);

    const std::vector<int> counts = config.site_sample_counts();
    SynthProblem problem{truth, {}, {}, {}, {}};
    for (int k = 0; k < config.sites; ++k) {
        Rng site_rng = root.split(static_cast<std::uint64_t>(k) + 1);
        PerturbResult perturbed = perturb(truth, config.perturbation_level, site_rng);
        WeightedAdjacency w =
            assign_weights(perturbed.graph, site_rng, config.weight_min, config.weight_max);
        Matrix data = sample_sem(w, counts[static_cast<std::size_t>(k)], config.noise_std,
                                 site_rng);
        problem.graphs.push_back(std::move(perturbed.graph));
        problem.weights.push_back(std::move(w));
        problem.datasets.emplace_back("site_" + std::to_string(k), std::move(data));
        problem.realized_perturbations.push_back(perturbed.realized_changes);
    }
    return problem;
}

}  // namespace feddag
