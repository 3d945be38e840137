#pragma once

#include "feddag/types.hpp"

namespace feddag {

// e^A by scaling-and-squaring with a truncated Taylor kernel. Relative
// error <= 1e-10 for ||A||_1 <= 10, which covers every matrix the solvers
// produce.
Matrix matrix_exp(const Matrix& a);

struct HEval {
    double value = 0.0;  // tr(e^{W o W}) - d
    Matrix gradient;     // (e^{W o W})^T o 2W, zero diagonal
};

HEval h_and_grad(const WeightedAdjacency& w);

// Convenience overload for internal callers that already hold a plain
// zero-diagonal matrix.
HEval h_and_grad(const Matrix& w);

// Exact acyclicity oracle (Kahn's topological sort).
bool is_acyclic_exact(const BinaryGraph& g);

}  // namespace feddag
