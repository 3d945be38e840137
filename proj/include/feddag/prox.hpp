#pragma once

#include <vector>

#include "feddag/types.hpp"

namespace feddag {

// K x d^2 stack; row k is the row-major flattening of site k's matrix.
struct StackedMatrix {
    Matrix values;

    int rows() const { return static_cast<int>(values.rows()); }
    int cols() const { return static_cast<int>(values.cols()); }
};

StackedMatrix transform(const std::vector<Matrix>& matrices);
std::vector<Matrix> inverse_transform(const StackedMatrix& stack, int dim);

// Elementwise soft-thresholding: sign(u) * max(|u| - lambda1, 0).
StackedMatrix prox_l1(const StackedMatrix& u, double lambda1);

struct ProxResult {
    StackedMatrix value;
    bool converged = true;
    int iterations = 0;
};

// argmin_Z 1/2 ||Z - U||_F^2 + lambda2 * sum_k ||Z_{k+1,.} - Z_{k,.}||_2,
// solved by block-coordinate descent on the row differences. NonConvergence
// is reported via the flag, never thrown. warm_differences, when given,
// seeds the (K-1) x d^2 difference matrix and receives the solution, which
// makes repeated calls on nearby inputs cheap.
ProxResult prox_group_fused(const StackedMatrix& u, double lambda2, double tol = 1e-9,
                            int max_sweeps = 500, Matrix* warm_differences = nullptr);

// Dykstra-like iterative proximal algorithm: the prox of the L1 plus
// group-fused penalty at u. warm_differences seeds and receives the inner
// BCD state, which makes repeated calls on nearby inputs cheap.
ProxResult dipa(const StackedMatrix& u, double lambda1, double lambda2, double tol,
                int max_iter, Matrix* warm_differences = nullptr);

}  // namespace feddag
