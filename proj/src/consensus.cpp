#include "feddag/consensus.hpp"

#include <cmath>

#include "feddag/dag_constraint.hpp"
#include "feddag/prox.hpp"

namespace feddag {

Matrix smooth_gradient(const Matrix& z, const Matrix& w, double alpha, const Matrix& beta,
                       double rho1, double rho2) {
    const HEval h = h_and_grad(z);
    Matrix grad = (alpha + rho1 * h.value) * h.gradient - beta + rho2 * (z - w);
    grad.diagonal().setZero();
    if (!grad.allFinite())
        throw NonFinite("smooth_gradient: overflow (rho schedule too aggressive?)");
    return grad;
}

double smooth_objective(const std::vector<Matrix>& z, const std::vector<Matrix>& w,
                        const std::vector<double>& alpha, const std::vector<Matrix>& beta,
                        double rho1, double rho2) {
    double total = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double h = h_and_grad(z[k]).value;
        const Matrix diff = w[k] - z[k];
        total += alpha[k] * h + 0.5 * rho1 * h * h + beta[k].cwiseProduct(diff).sum() +
                 0.5 * rho2 * diff.squaredNorm();
    }
    return total;
}

namespace {

struct Candidate {
    std::vector<Matrix> z;
    std::vector<HEval> evals;
    bool prox_converged = true;
};

struct ProxWarm {
    Matrix differences;  // BCD state shared across steps and retries
};

// The h terms, which need the matrix exponential, are shared between the
// objective and the gradient; everything here works off precomputed HEvals.
double objective_from_evals(const GlobalStepInput& in, const std::vector<Matrix>& z,
                            const std::vector<HEval>& evals) {
    double total = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double h = evals[k].value;
        const Matrix diff = in.w_new[k] - z[k];
        total += in.alpha[k] * h + 0.5 * in.rho1 * h * h +
                 in.beta[k].cwiseProduct(diff).sum() + 0.5 * in.rho2 * diff.squaredNorm();
    }
    return total;
}

std::vector<Matrix> gradients_from_evals(const GlobalStepInput& in,
                                         const std::vector<Matrix>& z,
                                         const std::vector<HEval>& evals) {
    std::vector<Matrix> grads(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) {
        Matrix g = (in.alpha[k] + in.rho1 * evals[k].value) * evals[k].gradient - in.beta[k] +
                   in.rho2 * (z[k] - in.w_new[k]);
        g.diagonal().setZero();
        if (!g.allFinite())
            throw NonFinite("global_update: gradient overflow (rho schedule too aggressive?)");
        grads[k] = std::move(g);
    }
    return grads;
}

std::vector<HEval> evals_of(const std::vector<Matrix>& z) {
    std::vector<HEval> evals;
    evals.reserve(z.size());
    for (const auto& m : z) evals.push_back(h_and_grad(m));
    return evals;
}

Candidate prox_step(const GlobalStepInput& in, const std::vector<Matrix>& z,
                    const std::vector<Matrix>& grads, double c, ProxWarm& warm) {
    const std::size_t K = z.size();
    const int d = static_cast<int>(z[0].rows());

    std::vector<Matrix> descent(K);
    for (std::size_t k = 0; k < K; ++k) descent[k] = z[k] - grads[k] / c;

    Candidate cand;
    if (in.shared_consensus) {
        Matrix mean = Matrix::Zero(d, d);
        for (const auto& u : descent) mean += u;
        mean /= static_cast<double>(K);
        StackedMatrix stacked = transform({mean});
        Matrix shared = inverse_transform(prox_l1(stacked, in.lambda1 / c), d)[0];
        shared.diagonal().setZero();
        cand.z.assign(K, shared);
        return cand;
    }

    StackedMatrix stacked = transform(descent);
    ProxResult prox = dipa(stacked, in.lambda1 / c, in.lambda2 / c, in.dipa_tol,
                           in.dipa_max_iter, &warm.differences);
    cand.prox_converged = prox.converged;
    cand.z = inverse_transform(prox.value, d);
    for (auto& zk : cand.z) zk.diagonal().setZero();
    return cand;
}

}  // namespace

GlobalStepResult global_update(const GlobalStepInput& input) {
    const std::size_t K = input.z_prev.size();
    if (K == 0 || input.w_new.size() != K || input.alpha.size() != K ||
        input.beta.size() != K)
        throw ShapeMismatch("global_update: inconsistent site counts");

    double max_alpha = 0.0;
    for (double a : input.alpha) max_alpha = std::max(max_alpha, a);
    const double c_floor = input.rho2 + input.rho1 + max_alpha;

    GlobalStepResult result;
    result.step_constant = input.step_constant > 0.0 ? input.step_constant : c_floor;

    std::vector<Matrix> z = input.z_prev;
    std::vector<HEval> evals = evals_of(z);
    ProxWarm warm;
    const int inner = std::max(1, input.inner_steps);
    bool try_shrink = true;
    for (int step = 0; step < inner; ++step) {
        const std::vector<Matrix> grads = gradients_from_evals(input, z, evals);
        const double f_prev = objective_from_evals(input, z, evals);

        // Warm-start C from the previous step and probe a shrink only
        // while shrinking keeps being accepted; backtracking restores the
        // majorizer property when it was cut too far.
        const bool shrink = step > 0 && try_shrink;
        double c = std::max(shrink ? result.step_constant / 2.0 : result.step_constant, 1e-12);
        int tries = 0;
        bool accepted = false;
        for (int attempt = 0; attempt < 80 && !accepted; ++attempt) {
            ++tries;
            Candidate cand = prox_step(input, z, grads, c, warm);
            cand.evals = evals_of(cand.z);

            double linear = 0.0;
            double quad = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const Matrix diff = cand.z[k] - z[k];
                linear += grads[k].cwiseProduct(diff).sum();
                quad += diff.squaredNorm();
            }
            const double majorizer = f_prev + linear + 0.5 * c * quad;
            const double f_new = objective_from_evals(input, cand.z, cand.evals);
            if (f_new <= majorizer + 1e-10 * (1.0 + std::abs(majorizer))) {
                double change = 0.0, scale = 0.0;
                for (std::size_t k = 0; k < K; ++k) {
                    change += (cand.z[k] - z[k]).norm();
                    scale += cand.z[k].norm();
                }
                z = std::move(cand.z);
                evals = std::move(cand.evals);
                result.prox_converged = result.prox_converged && cand.prox_converged;
                result.step_constant = c;
                accepted = true;
                if (change < input.inner_tol * std::max(scale, 1e-12)) step = inner;  // done
            } else {
                c *= 2.0;
            }
        }
        if (!accepted)
            throw NonFinite("global_update: backtracking failed to find a valid step");
        try_shrink = !shrink || tries == 1;  // shrinking got rejected: pause probing
    }

    result.z_new = std::move(z);
    return result;
}

}  // namespace feddag
