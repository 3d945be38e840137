#include "feddag/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace feddag {

ConfusionCounts confusion(const BinaryGraph& learned, const BinaryGraph& truth) {
    if (learned.dim() != truth.dim())
        throw DimensionMismatch("confusion: graphs differ in dimension");
    ConfusionCounts c;
    const int d = learned.dim();
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            if (i == j) continue;
            const bool in_learned = learned.has_edge(i, j);
            const bool in_truth = truth.has_edge(i, j);
            if (in_learned && in_truth) ++c.tp;
            else if (in_learned) ++c.fp;
            else if (in_truth) ++c.fn;
            else ++c.tn;
        }
    }
    return c;
}

EdgeMetrics error_precision_recall_f1(const ConfusionCounts& c) {
    if (c.total() <= 0) throw DimensionMismatch("error_precision_recall_f1: empty counts");
    EdgeMetrics m;
    m.error = static_cast<double>(c.fp + c.fn) / static_cast<double>(c.total());
    m.precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
    m.recall = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
    const double pr = m.precision + m.recall;
    m.fscore = pr > 0 ? 2.0 * m.precision * m.recall / pr : 0.0;
    return m;
}

int shd(const BinaryGraph& learned, const BinaryGraph& truth) {
    if (learned.dim() != truth.dim()) throw DimensionMismatch("shd: graphs differ in dimension");
    int dist = 0;
    const int d = learned.dim();
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            const bool l_fwd = learned.has_edge(i, j), l_bwd = learned.has_edge(j, i);
            const bool t_fwd = truth.has_edge(i, j), t_bwd = truth.has_edge(j, i);
            const bool l_any = l_fwd || l_bwd, t_any = t_fwd || t_bwd;
            if (l_any != t_any) {
                ++dist;  // add or delete
            } else if (l_any && (l_fwd != t_fwd || l_bwd != t_bwd)) {
                ++dist;  // reverse
            }
        }
    }
    return dist;
}

DegreeReport connection_degrees(const BinaryGraph& g, const std::vector<std::string>& labels,
                                int top_m) {
    const int d = g.dim();
    if (static_cast<int>(labels.size()) != d)
        throw LabelMismatch("connection_degrees: " + std::to_string(labels.size()) +
                            " labels for " + std::to_string(d) + " nodes");
    DegreeReport rep;
    rep.out_degree.assign(static_cast<std::size_t>(d), 0);
    rep.in_degree.assign(static_cast<std::size_t>(d), 0);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            if (!g.has_edge(i, j)) continue;
            ++rep.out_degree[static_cast<std::size_t>(i)];
            ++rep.in_degree[static_cast<std::size_t>(j)];
        }
    }
    auto ranked = [&](const std::vector<int>& deg) {
        std::vector<std::pair<int, int>> order;
        for (int v = 0; v < d; ++v) order.emplace_back(v, deg[static_cast<std::size_t>(v)]);
        std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        order.resize(static_cast<std::size_t>(std::min(top_m, d)));
        return order;
    };
    rep.top_out = ranked(rep.out_degree);
    rep.top_in = ranked(rep.in_degree);
    return rep;
}

BinaryGraph overlapping_connections(const std::vector<BinaryGraph>& graphs) {
    if (graphs.empty()) throw EmptyDataset("overlapping_connections: no graphs");
    const int d = graphs[0].dim();
    IntMatrix shared = graphs[0].adj();
    for (std::size_t k = 1; k < graphs.size(); ++k) {
        if (graphs[k].dim() != d)
            throw DimensionMismatch("overlapping_connections: graphs differ in dimension");
        shared = shared.cwiseProduct(graphs[k].adj());
    }
    return BinaryGraph(std::move(shared));
}

BinaryGraph site_specific_connections(const std::vector<BinaryGraph>& graphs, int k) {
    if (graphs.empty()) throw EmptyDataset("site_specific_connections: no graphs");
    if (k < 0 || k >= static_cast<int>(graphs.size()))
        throw IndexOutOfRange("site_specific_connections: bad site index");
    const int d = graphs[0].dim();
    IntMatrix unique = graphs[static_cast<std::size_t>(k)].adj();
    for (std::size_t other = 0; other < graphs.size(); ++other) {
        if (static_cast<int>(other) == k) continue;
        if (graphs[other].dim() != d)
            throw DimensionMismatch("site_specific_connections: graphs differ in dimension");
        unique = unique.cwiseProduct(IntMatrix::Ones(d, d) - graphs[other].adj());
    }
    return BinaryGraph(std::move(unique));
}

double normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }

double two_sample_proportion_test(long x1, long n1, long x2, long n2) {
    if (n1 < 1 || n2 < 1 || x1 < 0 || x2 < 0 || x1 > n1 || x2 > n2)
        throw IndexOutOfRange("two_sample_proportion_test: need 0 <= x <= n, n >= 1");
    const double pooled = static_cast<double>(x1 + x2) / static_cast<double>(n1 + n2);
    if (pooled <= 0.0 || pooled >= 1.0) return 1.0;  // degenerate: no evidence either way
    const double p1 = static_cast<double>(x1) / n1;
    const double p2 = static_cast<double>(x2) / n2;
    const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
    const double z = (p1 - p2) / se;
    return 2.0 * (1.0 - normal_cdf(std::abs(z)));
}

}  // namespace feddag
