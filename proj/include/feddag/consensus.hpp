#pragma once

#include <vector>

#include "feddag/types.hpp"

namespace feddag {

// Gradient of the smooth augmented-Lagrangian part with respect to one Z^k:
//   alpha * grad_h(Z) + rho1 * h(Z) * grad_h(Z) - beta + rho2 * (Z - W),
// diagonal zeroed.
Matrix smooth_gradient(const Matrix& z, const Matrix& w, double alpha, const Matrix& beta,
                       double rho1, double rho2);

// Value of that smooth part, summed over sites (used by the backtracking
// line search and by descent tests).
double smooth_objective(const std::vector<Matrix>& z, const std::vector<Matrix>& w,
                        const std::vector<double>& alpha, const std::vector<Matrix>& beta,
                        double rho1, double rho2);

struct GlobalStepInput {
    std::vector<Matrix> z_prev;
    std::vector<Matrix> w_new;
    std::vector<double> alpha;
    std::vector<Matrix> beta;
    double rho1 = 1.0;
    double rho2 = 1.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double dipa_tol = 1e-8;
    int dipa_max_iter = 500;
    // Warm-started majorizer constant; 0 means start from the
    // rho2 + rho1 + max_k alpha_k floor.
    double step_constant = 0.0;
    // The inner proximal-gradient loop runs until the relative change per
    // step drops below inner_tol, up to inner_steps steps.
    int inner_steps = 1;
    double inner_tol = 1e-6;
    // Homogeneous consensus: average the descent points and apply one
    // shared prox, so all sites receive the same Z.
    bool shared_consensus = false;
};

struct GlobalStepResult {
    std::vector<Matrix> z_new;
    double step_constant = 0.0;  // accepted C, feed back as warm start
    bool prox_converged = true;
};

// One (or more) proximal-gradient steps on the consensus matrices, with C
// chosen by doubling until the quadratic majorizer dominates the smooth
// objective at the candidate point.
GlobalStepResult global_update(const GlobalStepInput& input);

}  // namespace feddag
