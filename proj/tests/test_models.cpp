#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "stabcp/models.hpp"
#include "stabcp/rng.hpp"

#include "oracles.hpp"

using namespace stabcp;

TEST_CASE("robust loss is quadratic inside the knee and linear outside") {
    const double eps = 1.5;
    CHECK(huber_loss(eps, 2.0, 2.0) == 0.0);
    CHECK(huber_loss(eps, 3.0, 2.0) == doctest::Approx(0.5));            // r = 1
    CHECK(huber_loss(eps, 2.0, 3.0) == doctest::Approx(0.5));            // symmetric
    CHECK(huber_loss(eps, 5.0, 0.0) == doctest::Approx(1.5 * 5.0 - 1.125));
    // Both branches meet at the knee.
    CHECK(huber_loss(eps, eps, 0.0) == doctest::Approx(0.5 * eps * eps));
    CHECK_THROWS_AS(huber_loss(0.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("robust loss derivative matches finite differences and is bounded by the knee") {
    const double eps = 0.8;
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        const double y = 2.0 * rng.normal();
        const double z = 2.0 * rng.normal();
        const double h = 1e-6;
        const double fd = (huber_loss(eps, y, z + h) - huber_loss(eps, y, z - h)) / (2.0 * h);
        CHECK(huber_dz(eps, y, z) == doctest::Approx(fd).epsilon(1e-5));
        CHECK(std::abs(huber_dz(eps, y, z)) <= eps + 1e-15);
    }
    CHECK(huber_dz(eps, 1.0, 0.5) == doctest::Approx(-0.5));
    CHECK(huber_dz(eps, 5.0, 0.0) == doctest::Approx(-eps));
    CHECK(huber_dz(eps, -5.0, 0.0) == doctest::Approx(eps));
}

TEST_CASE("the per-point profile of a linear predictor uses row norms throughout") {
    Eigen::MatrixXd F(2, 2), T(1, 2);
    F << 3.0, 4.0, 0.0, 5.0;
    T << 1.0, 0.0;
    const double eps = 2.0, gamma = 1.5, lam = 4.0;
    const LipschitzProfile p = linear_huber_profile(F, T, eps, gamma, lam);
    CHECK(p.nu[0] == doctest::Approx(5.0));
    CHECK(p.nu[1] == doctest::Approx(5.0));
    CHECK(p.rho[0] == doctest::Approx(10.0));
    CHECK(p.rho_bar == doctest::Approx(10.0));
    CHECK(p.phi[1] == doctest::Approx(25.0));
    CHECK(p.test_nu[0] == doctest::Approx(1.0));
    CHECK(p.test_rho[0] == doctest::Approx(2.0));
    CHECK(p.test_phi[0] == doctest::Approx(1.0));
    CHECK(p.gamma == gamma);
    CHECK(p.lambda_sc == lam);

    Eigen::MatrixXd bad(1, 3);
    bad.setZero();
    CHECK_THROWS_AS(linear_huber_profile(F, bad, eps, gamma, lam), std::invalid_argument);
}

TEST_CASE("kernel values follow their closed forms and the Gram block matches pairwise evaluation") {
    Rng rng(17);
    const Eigen::MatrixXd A = rng.normal_matrix(4, 3);
    const Eigen::MatrixXd B = rng.normal_matrix(5, 3);

    KernelSpec lin{KernelKind::Linear, 0.1, 1.0, 2};
    KernelSpec rbf{KernelKind::Rbf, 0.7, 1.0, 2};
    KernelSpec poly{KernelKind::Polynomial, 0.1, 0.5, 3};

    const Eigen::RowVectorXd a = A.row(0), b = B.row(0);
    CHECK(kernel_value(lin, a, b) == doctest::Approx(a.dot(b)));
    CHECK(kernel_value(rbf, a, a) == doctest::Approx(1.0));
    CHECK(kernel_value(rbf, a, b) ==
          doctest::Approx(std::exp(-(a - b).squaredNorm() / (2.0 * 0.7 * 0.7))));
    CHECK(kernel_value(poly, a, b) == doctest::Approx(std::pow(a.dot(b) + 0.5, 3)));

    for (const auto& spec : {lin, rbf, poly}) {
        const Eigen::MatrixXd K = kernel_matrix(spec, A, B);
        REQUIRE(K.rows() == 4);
        REQUIRE(K.cols() == 5);
        for (Eigen::Index i = 0; i < 4; ++i)
            for (Eigen::Index j = 0; j < 5; ++j) {
                const Eigen::RowVectorXd ai = A.row(i), bj = B.row(j);
                CHECK(K(i, j) == doctest::Approx(kernel_value(spec, ai, bj)).epsilon(1e-12));
            }
    }

    KernelSpec bad_sigma{KernelKind::Rbf, 0.0, 1.0, 2};
    CHECK_THROWS_AS(kernel_value(bad_sigma, a, b), std::invalid_argument);
    KernelSpec bad_degree{KernelKind::Polynomial, 0.1, 1.0, 0};
    CHECK_THROWS_AS(kernel_matrix(bad_degree, A, B), std::invalid_argument);
}

TEST_CASE("network parameter counts follow the layer layout") {
    MlpShape shape;
    shape.inputs = 3;
    shape.hidden = {4, 2};
    CHECK(shape.parameter_count() == 3 * 4 + 4 + 4 * 2 + 2 + 2 + 1);

    MlpShape linear_net;
    linear_net.inputs = 5;
    CHECK(linear_net.parameter_count() == 6);

    MlpShape bad;
    bad.inputs = 0;
    CHECK_THROWS_AS(bad.parameter_count(), std::invalid_argument);
}

TEST_CASE("network initialization is seed-deterministic with zero biases") {
    MlpShape shape;
    shape.inputs = 4;
    shape.hidden = {3};
    const Eigen::VectorXd t1 = mlp_init(shape, 99);
    const Eigen::VectorXd t2 = mlp_init(shape, 99);
    const Eigen::VectorXd t3 = mlp_init(shape, 100);
    CHECK((t1 - t2).norm() == 0.0);
    CHECK((t1 - t3).norm() != 0.0);
    REQUIRE(t1.size() == shape.parameter_count());
    // Layout: W0 (4*3), b0 (3), W1 (3*1), b1 (1); weight magnitudes stay under 1/sqrt(fan_in).
    for (Eigen::Index k = 0; k < 12; ++k) CHECK(std::abs(t1[k]) <= 1.0 / 2.0);
    for (Eigen::Index k = 12; k < 15; ++k) CHECK(t1[k] == 0.0);
    for (Eigen::Index k = 15; k < 18; ++k) CHECK(std::abs(t1[k]) <= 1.0 / std::sqrt(3.0));
    CHECK(t1[18] == 0.0);
}

TEST_CASE("a network without hidden layers is exactly affine") {
    MlpShape shape;
    shape.inputs = 2;
    Eigen::VectorXd theta(3);
    theta << 0.5, -2.0, 0.25;  // w1, w2, bias
    Eigen::RowVectorXd x(2);
    x << 3.0, 1.0;
    CHECK(mlp_forward(shape, theta, x) == doctest::Approx(0.5 * 3.0 - 2.0 * 1.0 + 0.25));
}

TEST_CASE("a one-hidden-unit network composes the sigmoid by hand") {
    MlpShape shape;
    shape.inputs = 1;
    shape.hidden = {1};
    Eigen::VectorXd theta(4);
    theta << 2.0, -0.5, 3.0, 0.125;  // W0, b0, W1, b1
    Eigen::RowVectorXd x(1);
    x << 0.75;
    const double hidden = 1.0 / (1.0 + std::exp(-(2.0 * 0.75 - 0.5)));
    CHECK(mlp_forward(shape, theta, x) == doctest::Approx(3.0 * hidden + 0.125).epsilon(1e-12));

    Eigen::MatrixXd X(2, 1);
    X << 0.75, -1.5;
    const Eigen::VectorXd batch = mlp_forward(shape, theta, X);
    Eigen::RowVectorXd x2(1);
    x2 << -1.5;
    CHECK(batch[0] == mlp_forward(shape, theta, x));
    CHECK(batch[1] == mlp_forward(shape, theta, x2));
}

TEST_CASE("backpropagated loss gradients match central finite differences") {
    MlpShape shape;
    shape.inputs = 3;
    shape.hidden = {4, 3};
    const Eigen::VectorXd theta = mlp_init(shape, 21);
    Rng rng(22);
    for (int t = 0; t < 10; ++t) {
        const Eigen::RowVectorXd x = rng.normal_matrix(1, 3);
        // Mix of targets inside and outside the knee.
        const double y = (t % 2 == 0) ? 0.1 * rng.normal() : 5.0 + rng.normal();
        const double eps = 1.0;
        const Eigen::VectorXd g = mlp_loss_gradient(shape, theta, x, y, eps);
        const Eigen::VectorXd fd = testutil::fd_gradient(
            [&](const Eigen::VectorXd& th) { return huber_loss(eps, y, mlp_forward(shape, th, x)); },
            theta, 1e-6);
        REQUIRE(g.size() == fd.size());
        const double denom = std::max(1.0, fd.norm());
        CHECK((g - fd).norm() / denom < 1e-6);
    }
}
