#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <feddag/prox.hpp>

#include "test_util.hpp"

using namespace feddag;

namespace {

// Objective of the joint prox problem:
//   1/2 ||Z - U||_F^2 + l1 ||Z||_1 + l2 sum_k ||Z_{k+1,.} - Z_{k,.}||_2
double objective(const Matrix& z, const Matrix& u, double l1, double l2) {
    double val = 0.5 * (z - u).squaredNorm() + l1 * z.cwiseAbs().sum();
    for (int k = 0; k + 1 < z.rows(); ++k) val += l2 * (z.row(k + 1) - z.row(k)).norm();
    return val;
}

// Independent oracle: subgradient descent with diminishing steps, keeping
// the best iterate. Slow but it only sees the objective.
Matrix subgradient_oracle(const Matrix& u, double l1, double l2, int iterations) {
    Matrix z = u;
    Matrix best = z;
    double best_val = objective(z, u, l1, l2);
    for (int it = 1; it <= iterations; ++it) {
        Matrix g = z - u;
        for (Eigen::Index r = 0; r < z.rows(); ++r)
            for (Eigen::Index c = 0; c < z.cols(); ++c)
                g(r, c) += l1 * (z(r, c) > 0 ? 1.0 : (z(r, c) < 0 ? -1.0 : 0.0));
        for (int k = 0; k + 1 < z.rows(); ++k) {
            const Eigen::RowVectorXd diff = z.row(k + 1) - z.row(k);
            const double norm = diff.norm();
            if (norm > 1e-12) {
                g.row(k + 1) += l2 * diff / norm;
                g.row(k) -= l2 * diff / norm;
            }
        }
        z -= (1.0 / std::sqrt(static_cast<double>(it) + 100.0)) * g;
        const double val = objective(z, u, l1, l2);
        if (val < best_val) {
            best_val = val;
            best = z;
        }
    }
    return best;
}

StackedMatrix stack_of(const Matrix& m) { return StackedMatrix{m}; }

}  // namespace

TEST_CASE("transform flattens row-major and inverts exactly") {
    Matrix m(2, 2);
    m << 1, 2, 3, 4;
    const StackedMatrix s = transform({m});
    CHECK(s.rows() == 1);
    CHECK(s.cols() == 4);
    CHECK(s.values(0, 0) == 1);
    CHECK(s.values(0, 1) == 2);
    CHECK(s.values(0, 2) == 3);
    CHECK(s.values(0, 3) == 4);

    const auto back = inverse_transform(s, 2);
    CHECK(back.size() == 1);
    CHECK((back[0] - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("transform keeps site order with distinct entries") {
    Matrix a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 5, 6, 7, 8;
    const StackedMatrix s = transform({a, b});
    CHECK(s.rows() == 2);
    for (int j = 0; j < 4; ++j) {
        CHECK(s.values(0, j) == 1 + j);
        CHECK(s.values(1, j) == 5 + j);
    }
}

TEST_CASE("round trip through transform is bit-exact") {
    Rng rng(31);
    const Matrix raw = test::random_matrix(rng, 3, 9, 2.0);
    const auto mats = inverse_transform(stack_of(raw), 3);
    const StackedMatrix again = transform(mats);
    CHECK((again.values - raw).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("inverse_transform rejects incompatible widths") {
    CHECK_THROWS_AS(inverse_transform(stack_of(Matrix::Zero(1, 5)), 2), ShapeMismatch);
}

TEST_CASE("soft thresholding basics") {
    Matrix u(1, 3);
    u << 2.5, -0.5, 0.0;
    const StackedMatrix out = prox_l1(stack_of(u), 1.0);
    CHECK(out.values(0, 0) == doctest::Approx(1.5));
    CHECK(out.values(0, 1) == 0.0);
    CHECK(out.values(0, 2) == 0.0);

    const StackedMatrix id = prox_l1(stack_of(u), 0.0);
    CHECK((id.values - u).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("soft thresholding is odd, monotone, and 1-Lipschitz") {
    Rng rng(32);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix u = test::random_matrix(rng, 2, 5, 3.0);
        const Matrix v = test::random_matrix(rng, 2, 5, 3.0);
        const double lambda = rng.next_double();
        const Matrix pu = prox_l1(stack_of(u), lambda).values;
        const Matrix pv = prox_l1(stack_of(v), lambda).values;
        const Matrix pn = prox_l1(stack_of(Matrix(-u)), lambda).values;
        CHECK((pn + pu).cwiseAbs().maxCoeff() == 0.0);
        CHECK((pu - pv).cwiseAbs().maxCoeff() <= (u - v).cwiseAbs().maxCoeff() + 1e-15);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 5; ++j)
                if (u(i, j) >= v(i, j)) CHECK(pu(i, j) >= pv(i, j) - 1e-15);
    }
}

TEST_CASE("group fused prox is the identity for K=1 or lambda2=0") {
    Rng rng(33);
    const Matrix u = test::random_matrix(rng, 1, 4);
    CHECK((prox_group_fused(stack_of(u), 0.7).value.values - u).cwiseAbs().maxCoeff() == 0.0);

    const Matrix u2 = test::random_matrix(rng, 3, 4);
    CHECK((prox_group_fused(stack_of(u2), 0.0).value.values - u2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two rows fuse to their mean once lambda2 is large enough") {
    Rng rng(34);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix u = test::random_matrix(rng, 2, 3, 2.0);
        const double gap = (u.row(0) - u.row(1)).norm();
        const double lambda2 = 0.5 * gap * (1.0 + rng.next_double());
        const Matrix z = prox_group_fused(stack_of(u), lambda2).value.values;
        const Eigen::RowVectorXd mean = (u.row(0) + u.row(1)) / 2.0;
        CHECK((z.row(0) - mean).norm() < 1e-9);
        CHECK((z.row(1) - mean).norm() < 1e-9);
    }
}

TEST_CASE("below the fusion threshold each row moves by lambda2") {
    // K = 2 closed form: both rows step lambda2 toward each other along
    // the difference direction.
    Matrix u(2, 1);
    u << 2.0, -1.0;
    const double lambda2 = 0.6;
    const Matrix z = prox_group_fused(stack_of(u), lambda2).value.values;
    CHECK(z(0, 0) == doctest::Approx(2.0 - lambda2).epsilon(1e-9));
    CHECK(z(1, 0) == doctest::Approx(-1.0 + lambda2).epsilon(1e-9));
}

TEST_CASE("group fused prox satisfies the subgradient optimality condition") {
    Rng rng(35);
    for (int trial = 0; trial < 20; ++trial) {
        const int K = 2 + static_cast<int>(rng.next_below(3));
        const Matrix u = test::random_matrix(rng, K, 4, 2.0);
        const double lambda2 = 0.1 + rng.next_double();
        const Matrix z = prox_group_fused(stack_of(u), lambda2, 1e-12, 5000).value.values;

        // Dual feasibility: s_k = cumulative rows of (Z - U) / lambda2 must
        // have norm <= 1, with equality-direction match on unfused pairs.
        Eigen::RowVectorXd cumulative = Eigen::RowVectorXd::Zero(4);
        for (int k = 0; k + 1 < K; ++k) {
            cumulative += (z.row(k) - u.row(k));
            const Eigen::RowVectorXd s = cumulative / lambda2;
            CHECK(s.norm() <= 1.0 + 1e-6);
            const Eigen::RowVectorXd diff = z.row(k + 1) - z.row(k);
            if (diff.norm() > 1e-7) {
                const Eigen::RowVectorXd dir = diff / diff.norm();
                CHECK((s - dir).norm() < 1e-6);
            }
        }
    }
}

TEST_CASE("group fused prox matches the subgradient oracle") {
    Rng rng(36);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix u = test::random_matrix(rng, 3, 2, 2.0);
        const double lambda2 = 0.3;
        const Matrix z = prox_group_fused(stack_of(u), lambda2, 1e-12, 5000).value.values;
        const Matrix oracle = subgradient_oracle(u, 0.0, lambda2, 100000);
        CHECK(objective(z, u, 0.0, lambda2) <= objective(oracle, u, 0.0, lambda2) + 1e-5);
    }
}

TEST_CASE("dipa with both penalties zero returns the input immediately") {
    Rng rng(37);
    const Matrix u = test::random_matrix(rng, 3, 4);
    const ProxResult res = dipa(stack_of(u), 0.0, 0.0, 1e-10, 100);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
    CHECK((res.value.values - u).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dipa collapses to soft thresholding when lambda2 is zero") {
    Rng rng(38);
    const Matrix u = test::random_matrix(rng, 2, 6, 2.0);
    const ProxResult res = dipa(stack_of(u), 1.0, 0.0, 1e-12, 100);
    const Matrix expected = prox_l1(stack_of(u), 1.0).values;
    CHECK((res.value.values - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dipa matches a grid oracle on the 2x1 problem") {
    Matrix u(2, 1);
    u << 2.0, -1.0;
    const double l1 = 0.2, l2 = 0.5;
    const ProxResult res = dipa(stack_of(u), l1, l2, 1e-10, 500);

    // Brute force over a fine grid with local refinement.
    double best_a = 0, best_b = 0, best_val = 1e100;
    double lo_a = -3, hi_a = 3, lo_b = -3, hi_b = 3;
    for (int pass = 0; pass < 4; ++pass) {
        const int steps = 200;
        double pass_a = best_a, pass_b = best_b;
        for (int i = 0; i <= steps; ++i) {
            for (int j = 0; j <= steps; ++j) {
                const double a = lo_a + (hi_a - lo_a) * i / steps;
                const double b = lo_b + (hi_b - lo_b) * j / steps;
                const double val = 0.5 * ((a - 2.0) * (a - 2.0) + (b + 1.0) * (b + 1.0)) +
                                   l1 * (std::abs(a) + std::abs(b)) + l2 * std::abs(b - a);
                if (val < best_val) {
                    best_val = val;
                    pass_a = a;
                    pass_b = b;
                }
            }
        }
        best_a = pass_a;
        best_b = pass_b;
        const double width_a = (hi_a - lo_a) / steps, width_b = (hi_b - lo_b) / steps;
        lo_a = best_a - 2 * width_a;
        hi_a = best_a + 2 * width_a;
        lo_b = best_b - 2 * width_b;
        hi_b = best_b + 2 * width_b;
    }
    CHECK(std::abs(res.value.values(0, 0) - best_a) < 1e-3);
    CHECK(std::abs(res.value.values(1, 0) - best_b) < 1e-3);
}

TEST_CASE("dipa minimizes below the input and the single proxes") {
    Rng rng(39);
    for (int trial = 0; trial < 10; ++trial) {
        const int K = 2 + static_cast<int>(rng.next_below(3));
        const Matrix u = test::random_matrix(rng, K, 3, 2.0);
        const double l1 = 0.2 * rng.next_double();
        const double l2 = 0.5 * rng.next_double();
        const ProxResult res = dipa(stack_of(u), l1, l2, 1e-10, 500);
        const double f = objective(res.value.values, u, l1, l2);
        CHECK(f <= objective(u, u, l1, l2) + 1e-9);
        CHECK(f <= objective(prox_l1(stack_of(u), l1).values, u, l1, l2) + 1e-9);
        CHECK(f <= objective(prox_group_fused(stack_of(u), l2, 1e-12, 5000).value.values, u,
                             l1, l2) +
                       1e-9);
    }
}

TEST_CASE("dipa iterates converge on random instances") {
    Rng rng(40);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix u = test::random_matrix(rng, 4, 4, 2.0);
        const ProxResult res = dipa(stack_of(u), 0.3, 0.4, 1e-9, 500);
        CHECK(res.converged);
        CHECK(res.iterations < 500);
    }
}
