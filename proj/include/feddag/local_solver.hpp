#pragma once

#include <Eigen/Cholesky>

#include "feddag/types.hpp"

namespace feddag {

struct LocalUpdateInput {
    const Matrix& gram;    // U^k
    const Matrix& z_prev;  // consensus Z^k from the previous round
    const Matrix& beta;    // equality dual
    double rho2 = 1.0;
};

// Unconstrained closed form W = (U + rho2 I)^{-1} (rho2 Z - beta + U); the
// stationary point of the site objective when the diagonal is free.
Matrix local_update_raw(const LocalUpdateInput& input);

// Site update with the no-self-loop constraint imposed inside the solve:
// column j is solved over the d-1 variables excluding j. Solving free and
// zeroing afterwards leaves a diagonal transient that distorts the
// off-diagonal weights badly while rho ramps.
WeightedAdjacency local_update(const LocalUpdateInput& input);

// Per-site solver that caches the factorization of U + rho2 I (one
// (d-1)-sized Cholesky per column, plus the full one for the raw form);
// the factors only change when rho2 does.
class LocalSolver {
  public:
    explicit LocalSolver(Matrix gram);

    Matrix solve_raw(const Matrix& z_prev, const Matrix& beta, double rho2);
    WeightedAdjacency solve(const Matrix& z_prev, const Matrix& beta, double rho2);

    const Matrix& gram() const { return gram_; }

  private:
    void refactor(double rho2);
    void refactor_columns(double rho2);

    Matrix gram_;
    double cached_rho2_ = -1.0;
    Eigen::LLT<Matrix> llt_;
    double cached_col_rho2_ = -1.0;
    std::vector<Eigen::LLT<Matrix>> column_llt_;
};

}  // namespace feddag
