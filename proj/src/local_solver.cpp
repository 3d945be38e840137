#include "feddag/local_solver.hpp"

#include <sstream>

namespace feddag {

namespace {

void check_shapes(const Matrix& gram, const Matrix& z_prev, const Matrix& beta, double rho2) {
    const auto d = gram.rows();
    if (gram.cols() != d || z_prev.rows() != d || z_prev.cols() != d || beta.rows() != d ||
        beta.cols() != d) {
        std::ostringstream os;
        os << "local_update: inconsistent shapes (gram " << gram.rows() << "x" << gram.cols()
           << ", z " << z_prev.rows() << "x" << z_prev.cols() << ", beta " << beta.rows() << "x"
           << beta.cols() << ")";
        throw ShapeMismatch(os.str());
    }
    if (rho2 <= 0.0) throw SingularSystem("local_update: rho2 must be > 0");
}

Matrix drop_row_col(const Matrix& m, Eigen::Index skip, double ridge) {
    const auto d = m.rows();
    Matrix out(d - 1, d - 1);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
        if (i == skip) continue;
        Eigen::Index c = 0;
        for (Eigen::Index j = 0; j < d; ++j) {
            if (j == skip) continue;
            out(r, c) = m(i, j) + (i == j ? ridge : 0.0);
            ++c;
        }
        ++r;
    }
    return out;
}

}  // namespace

Matrix local_update_raw(const LocalUpdateInput& input) {
    check_shapes(input.gram, input.z_prev, input.beta, input.rho2);
    const auto d = input.gram.rows();
    Matrix system = input.gram + input.rho2 * Matrix::Identity(d, d);
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() != Eigen::Success)
        throw SingularSystem("local_update: Cholesky failed (gram not PSD or rho2 <= 0)");
    const Matrix rhs = input.rho2 * input.z_prev - input.beta + input.gram;
    return llt.solve(rhs);
}

WeightedAdjacency local_update(const LocalUpdateInput& input) {
    LocalSolver solver(input.gram);
    return solver.solve(input.z_prev, input.beta, input.rho2);
}

LocalSolver::LocalSolver(Matrix gram) : gram_(std::move(gram)) {
    if (gram_.rows() != gram_.cols()) throw ShapeMismatch("LocalSolver: gram must be square");
}

void LocalSolver::refactor(double rho2) {
    if (rho2 <= 0.0) throw SingularSystem("LocalSolver: rho2 must be > 0");
    const auto d = gram_.rows();
    llt_.compute(gram_ + rho2 * Matrix::Identity(d, d));
    if (llt_.info() != Eigen::Success)
        throw SingularSystem("LocalSolver: Cholesky failed (gram not PSD or rho2 <= 0)");
    cached_rho2_ = rho2;
}

void LocalSolver::refactor_columns(double rho2) {
    if (rho2 <= 0.0) throw SingularSystem("LocalSolver: rho2 must be > 0");
    const auto d = gram_.rows();
    column_llt_.resize(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) {
        column_llt_[static_cast<std::size_t>(j)].compute(drop_row_col(gram_, j, rho2));
        if (column_llt_[static_cast<std::size_t>(j)].info() != Eigen::Success)
            throw SingularSystem("LocalSolver: Cholesky failed (gram not PSD or rho2 <= 0)");
    }
    cached_col_rho2_ = rho2;
}

Matrix LocalSolver::solve_raw(const Matrix& z_prev, const Matrix& beta, double rho2) {
    check_shapes(gram_, z_prev, beta, rho2);
    if (rho2 != cached_rho2_) refactor(rho2);
    const Matrix rhs = rho2 * z_prev - beta + gram_;
    return llt_.solve(rhs);
}

WeightedAdjacency LocalSolver::solve(const Matrix& z_prev, const Matrix& beta, double rho2) {
    check_shapes(gram_, z_prev, beta, rho2);
    if (rho2 != cached_col_rho2_) refactor_columns(rho2);
    const auto d = gram_.rows();
    const Matrix rhs_full = rho2 * z_prev - beta + gram_;
    Matrix w = Matrix::Zero(d, d);
    Eigen::VectorXd rhs(d - 1);
    for (Eigen::Index j = 0; j < d; ++j) {
        Eigen::Index r = 0;
        for (Eigen::Index i = 0; i < d; ++i) {
            if (i == j) continue;
            rhs(r++) = rhs_full(i, j);
        }
        const Eigen::VectorXd sol = column_llt_[static_cast<std::size_t>(j)].solve(rhs);
        r = 0;
        for (Eigen::Index i = 0; i < d; ++i) {
            if (i == j) continue;
            w(i, j) = sol(r++);
        }
    }
    return WeightedAdjacency(std::move(w));
}

}  // namespace feddag
