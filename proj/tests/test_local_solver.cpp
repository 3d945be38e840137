#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <feddag/local_solver.hpp>

#include "test_util.hpp"

using namespace feddag;

namespace {

// Appendix-form gradient of the site objective at W.
Matrix site_gradient(const Matrix& u, const Matrix& w, const Matrix& z, const Matrix& beta,
                     double rho2) {
    return (u + rho2 * Matrix::Identity(u.rows(), u.cols())) * w - u + beta - rho2 * z;
}

// Independent minimizer: plain gradient descent on the site objective.
Matrix gradient_descent_oracle(const Matrix& u, const Matrix& z, const Matrix& beta,
                               double rho2, int iterations) {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(u);
    const double step = 1.0 / (eig.eigenvalues().maxCoeff() + rho2);
    Matrix w = Matrix::Zero(u.rows(), u.cols());
    for (int it = 0; it < iterations; ++it) w -= step * site_gradient(u, w, z, beta, rho2);
    return w;
}

}  // namespace

TEST_CASE("empty-signal site returns the consensus matrix") {
    Rng rng(41);
    const Matrix z = test::random_zero_diag(rng, 4);
    const Matrix u = Matrix::Zero(4, 4);
    const Matrix beta = Matrix::Zero(4, 4);
    const Matrix w = local_update_raw({u, z, beta, 1.0});
    CHECK((w - z).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("identity gram with zero consensus zeroes out after diagonal removal") {
    const Matrix u = Matrix::Identity(2, 2);
    const Matrix z = Matrix::Zero(2, 2);
    const Matrix beta = Matrix::Zero(2, 2);

    const Matrix raw = local_update_raw({u, z, beta, 1.0});
    CHECK((raw - 0.5 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);

    const WeightedAdjacency w = local_update({u, z, beta, 1.0});
    CHECK(w.values().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("closed form matches the gradient-descent oracle") {
    Rng rng(42);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix u = test::random_spd(rng, 4);
        const Matrix z = test::random_zero_diag(rng, 4);
        const Matrix beta = test::random_matrix(rng, 4, 4, 0.5);
        const Matrix w = local_update_raw({u, z, beta, 2.0});
        const Matrix oracle = gradient_descent_oracle(u, z, beta, 2.0, 20000);
        CHECK((w - oracle).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("linear system residual is tiny") {
    Rng rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 3 + static_cast<int>(rng.next_below(5));
        const Matrix u = test::random_spd(rng, d);
        const Matrix z = test::random_zero_diag(rng, d);
        const Matrix beta = test::random_matrix(rng, d, d, 0.5);
        const double rho2 = 0.5 + 2.0 * rng.next_double();
        const Matrix w = local_update_raw({u, z, beta, rho2});
        const Matrix rhs = rho2 * z - beta + u;
        const Matrix system = u + rho2 * Matrix::Identity(d, d);
        CHECK((system * w - rhs).norm() <= 1e-8 * rhs.norm());
    }
}

TEST_CASE("stationarity of the raw solution") {
    Rng rng(44);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 3 + static_cast<int>(rng.next_below(4));
        const Matrix u = test::random_spd(rng, d);
        const Matrix z = test::random_zero_diag(rng, d);
        const Matrix beta = test::random_matrix(rng, d, d, 0.5);
        const double rho2 = 0.5 + rng.next_double();
        const Matrix w = local_update_raw({u, z, beta, rho2});
        CHECK(site_gradient(u, w, z, beta, rho2).cwiseAbs().maxCoeff() <= 1e-7);
    }
}

TEST_CASE("large rho2 pins W to Z") {
    Rng rng(45);
    const Matrix u = test::random_spd(rng, 5);
    const Matrix z = test::random_zero_diag(rng, 5);
    const Matrix beta = test::random_matrix(rng, 5, 5, 0.5);
    double previous = 1e100;
    for (double rho2 : {1e2, 1e4, 1e6}) {
        const Matrix w = local_update_raw({u, z, beta, rho2});
        const double gap = (w - z).norm();
        CHECK(gap < previous);
        previous = gap;
    }
    CHECK(previous < 1e-4);
}

TEST_CASE("solver cache agrees with the one-shot solve across rho changes") {
    Rng rng(46);
    const Matrix u = test::random_spd(rng, 4);
    LocalSolver solver(u);
    for (double rho2 : {1.0, 1.0, 2.5, 2.5, 1.0}) {
        const Matrix z = test::random_zero_diag(rng, 4);
        const Matrix beta = test::random_matrix(rng, 4, 4, 0.5);
        const Matrix cached = solver.solve_raw(z, beta, rho2);
        const Matrix fresh = local_update_raw({u, z, beta, rho2});
        CHECK((cached - fresh).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("invalid rho2 raises SingularSystem") {
    const Matrix u = Matrix::Identity(3, 3);
    const Matrix z = Matrix::Zero(3, 3);
    CHECK_THROWS_AS(local_update_raw({u, z, z, 0.0}), SingularSystem);
    CHECK_THROWS_AS(local_update_raw({u, z, z, -1.0}), SingularSystem);
}

TEST_CASE("constrained update is stationary on the reduced system") {
    Rng rng(47);
    for (int trial = 0; trial < 10; ++trial) {
        const int d = 4 + static_cast<int>(rng.next_below(3));
        const Matrix u = test::random_spd(rng, d);
        const Matrix z = test::random_zero_diag(rng, d);
        const Matrix beta = test::random_matrix(rng, d, d, 0.5);
        const double rho2 = 0.5 + rng.next_double();
        const WeightedAdjacency w = local_update({u, z, beta, rho2});

        CHECK(w.values().diagonal().cwiseAbs().maxCoeff() == 0.0);
        const Matrix system = u + rho2 * Matrix::Identity(d, d);
        const Matrix rhs = rho2 * z - beta + u;
        const Matrix residual = system * w.values() - rhs;
        // Off-diagonal rows of each column must be satisfied exactly; the
        // diagonal row is where the constraint absorbs the mismatch.
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i)
                if (i != j) CHECK(std::abs(residual(i, j)) < 1e-9);
    }
}

TEST_CASE("constrained update equals the free solve when the diagonal is uncoupled") {
    // A diagonal gram decouples the columns, so both forms agree off the
    // diagonal.
    Rng rng(48);
    Matrix u = Matrix::Zero(4, 4);
    u.diagonal() << 1.0, 2.0, 0.5, 1.5;
    const Matrix z = test::random_zero_diag(rng, 4);
    const Matrix beta = test::random_matrix(rng, 4, 4, 0.5);
    const Matrix raw = local_update_raw({u, z, beta, 1.3});
    const WeightedAdjacency constrained = local_update({u, z, beta, 1.3});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (i != j)
                CHECK(constrained(i, j) == doctest::Approx(raw(i, j)).epsilon(1e-12));
}
