#include "feddag/prox.hpp"

#include <cmath>
#include <sstream>

namespace feddag {

StackedMatrix transform(const std::vector<Matrix>& matrices) {
    if (matrices.empty()) throw ShapeMismatch("transform: no matrices");
    const auto rows = matrices[0].rows();
    const auto cols = matrices[0].cols();
    StackedMatrix stack;
    stack.values.resize(static_cast<Eigen::Index>(matrices.size()), rows * cols);
    for (std::size_t k = 0; k < matrices.size(); ++k) {
        const Matrix& m = matrices[k];
        if (m.rows() != rows || m.cols() != cols) {
            std::ostringstream os;
            os << "transform: matrix " << k << " is " << m.rows() << "x" << m.cols()
               << ", expected " << rows << "x" << cols;
            throw ShapeMismatch(os.str());
        }
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j)
                stack.values(static_cast<Eigen::Index>(k), i * cols + j) = m(i, j);
    }
    return stack;
}

std::vector<Matrix> inverse_transform(const StackedMatrix& stack, int dim) {
    if (stack.cols() != dim * dim) {
        std::ostringstream os;
        os << "inverse_transform: " << stack.cols() << " columns, expected " << dim * dim;
        throw ShapeMismatch(os.str());
    }
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(stack.rows()));
    for (int k = 0; k < stack.rows(); ++k) {
        Matrix m(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) m(i, j) = stack.values(k, i * dim + j);
        out.push_back(std::move(m));
    }
    return out;
}

StackedMatrix prox_l1(const StackedMatrix& u, double lambda1) {
    if (lambda1 < 0) throw ConfigError("prox_l1: lambda1 must be >= 0");
    StackedMatrix out;
    out.values = u.values.unaryExpr([lambda1](double v) {
        const double mag = std::abs(v) - lambda1;
        return mag > 0.0 ? (v > 0.0 ? mag : -mag) : 0.0;
    });
    return out;
}

ProxResult prox_group_fused(const StackedMatrix& u, double lambda2, double tol,
                            int max_sweeps, Matrix* warm_differences) {
    if (lambda2 < 0) throw ConfigError("prox_group_fused: lambda2 must be >= 0");
    const int K = u.rows();
    const int p = u.cols();

    ProxResult res;
    if (K <= 1 || lambda2 == 0.0) {
        res.value = u;
        return res;
    }

    // Difference reformulation: Z_{k,.} = a + sum_{i<k} A_{i,.} with
    // A = D Z, then A solves a group lasso on column-centered data.
    // R has R(i,j) = 1 for i > j; r_j below is its centered j-th column.
    Eigen::VectorXd colmean_u = u.values.colwise().mean();
    Matrix u_cen = u.values.rowwise() - colmean_u.transpose();

    std::vector<Eigen::VectorXd> r(static_cast<std::size_t>(K - 1));
    std::vector<double> r_sq(static_cast<std::size_t>(K - 1));
    for (int j = 0; j < K - 1; ++j) {
        Eigen::VectorXd col = Eigen::VectorXd::Zero(K);
        for (int i = j + 1; i < K; ++i) col(i) = 1.0;
        col.array() -= col.mean();
        r[static_cast<std::size_t>(j)] = col;
        r_sq[static_cast<std::size_t>(j)] = col.squaredNorm();
    }

    Matrix a = Matrix::Zero(K - 1, p);
    if (warm_differences && warm_differences->rows() == K - 1 && warm_differences->cols() == p)
        a = *warm_differences;
    Matrix residual = u_cen;  // u_cen - R_cen * A, maintained incrementally
    for (int k = 0; k < K - 1; ++k)
        residual.noalias() -= r[static_cast<std::size_t>(k)] * a.row(k);

    int sweep = 0;
    bool converged = false;
    for (; sweep < max_sweeps; ++sweep) {
        double max_rel_change = 0.0;
        for (int k = 0; k < K - 1; ++k) {
            const auto& rk = r[static_cast<std::size_t>(k)];
            const Eigen::RowVectorXd c =
                rk.transpose() * residual + r_sq[static_cast<std::size_t>(k)] * a.row(k);
            const double cnorm = c.norm();
            Eigen::RowVectorXd new_row;
            if (cnorm <= lambda2) {
                new_row = Eigen::RowVectorXd::Zero(p);
            } else {
                new_row = ((cnorm - lambda2) / (r_sq[static_cast<std::size_t>(k)] * cnorm)) * c;
            }
            const Eigen::RowVectorXd delta = a.row(k) - new_row;
            const double change = delta.norm();
            if (change > 0.0) {
                residual.noalias() += rk * delta;
                max_rel_change =
                    std::max(max_rel_change, change / std::max(1.0, new_row.norm()));
                a.row(k) = new_row;
            }
        }
        if (max_rel_change < tol) {
            converged = true;
            ++sweep;
            break;
        }
    }

    // Reconstruct: intercept is the column mean of U - R A, so the output
    // keeps the same per-column mean as the input.
    Matrix ra = Matrix::Zero(K, p);
    for (int k = 1; k < K; ++k) ra.row(k) = ra.row(k - 1) + a.row(k - 1);
    Eigen::RowVectorXd intercept = (u.values - ra).colwise().mean();
    res.value.values = ra.rowwise() + intercept;
    res.converged = converged;
    res.iterations = sweep;
    if (warm_differences) *warm_differences = std::move(a);
    return res;
}

ProxResult dipa(const StackedMatrix& u, double lambda1, double lambda2, double tol,
                int max_iter, Matrix* warm_differences) {
    if (tol <= 0) throw ConfigError("dipa: tol must be > 0");
    if (max_iter < 1) throw ConfigError("dipa: max_iter must be >= 1");

    // Inner prox runs tighter than the outer loop so Dykstra sees an
    // effectively exact operator.
    const double inner_tol = tol / 10.0;

    Matrix a = u.values;
    Matrix m = Matrix::Zero(a.rows(), a.cols());
    Matrix q = Matrix::Zero(a.rows(), a.cols());
    Matrix local_warm;  // BCD differences, carried across Dykstra iterations
    Matrix* warm = warm_differences ? warm_differences : &local_warm;

    ProxResult res;
    res.converged = false;
    bool inner_ok = true;

    int n = 0;
    for (; n < max_iter; ++n) {
        StackedMatrix vin{a + m};
        ProxResult v = prox_group_fused(vin, lambda2, inner_tol, 1000, warm);
        inner_ok = inner_ok && v.converged;
        m = vin.values - v.value.values;
        StackedMatrix ain{v.value.values + q};
        Matrix a_next = prox_l1(ain, lambda1).values;
        q = ain.values - a_next;
        const double change = (a_next - a).norm();
        a = std::move(a_next);
        if (change < tol) {
            res.converged = true;
            ++n;
            break;
        }
    }

    res.value.values = std::move(a);
    res.converged = res.converged && inner_ok;
    res.iterations = n;
    return res;
}

}  // namespace feddag
