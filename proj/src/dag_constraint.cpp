#include "feddag/dag_constraint.hpp"

#include <cmath>
#include <vector>

namespace feddag {

Matrix matrix_exp(const Matrix& a) {
    if (a.rows() != a.cols()) throw ShapeMismatch("matrix_exp: matrix must be square");
    if (!a.allFinite()) throw NonFinite("matrix_exp: non-finite entries");

    const int d = static_cast<int>(a.rows());
    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();

    // Scale so the series argument has 1-norm <= 0.5, then square back.
    int squarings = 0;
    if (norm1 > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
    }
    const Matrix b = a / std::exp2(squarings);

    // Taylor series; with ||B|| <= 0.5 the terms decay faster than 2^-k,
    // so stopping at 1e-14 relative leaves the squared result well inside
    // the 1e-10 contract.
    Matrix result = Matrix::Identity(d, d);
    Matrix term = Matrix::Identity(d, d);
    for (int k = 1; k <= 30; ++k) {
        term = (term * b / static_cast<double>(k)).eval();
        result += term;
        if (term.cwiseAbs().maxCoeff() < 1e-14 * result.cwiseAbs().maxCoeff()) break;
    }

    for (int s = 0; s < squarings; ++s) result = (result * result).eval();
    return result;
}

HEval h_and_grad(const Matrix& w) {
    if (!w.allFinite()) throw NonFinite("h_and_grad: non-finite entries");
    const int d = static_cast<int>(w.rows());
    const Matrix e = matrix_exp(w.cwiseProduct(w));
    HEval out;
    out.value = e.trace() - static_cast<double>(d);
    out.gradient = e.transpose().cwiseProduct(2.0 * w);
    out.gradient.diagonal().setZero();
    return out;
}

HEval h_and_grad(const WeightedAdjacency& w) { return h_and_grad(w.values()); }

bool is_acyclic_exact(const BinaryGraph& g) {
    const int d = g.dim();
    std::vector<int> indegree(d, 0);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i)
            if (g.has_edge(i, j)) ++indegree[j];

    std::vector<int> queue;
    queue.reserve(d);
    for (int j = 0; j < d; ++j)
        if (indegree[j] == 0) queue.push_back(j);

    int removed = 0;
    while (!queue.empty()) {
        const int u = queue.back();
        queue.pop_back();
        ++removed;
        for (int v = 0; v < d; ++v) {
            if (g.has_edge(u, v) && --indegree[v] == 0) queue.push_back(v);
        }
    }
    return removed == d;
}

}  // namespace feddag
