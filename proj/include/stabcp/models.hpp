#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "stabcp/core.hpp"

namespace stabcp {

// Huber loss in the prediction z, knee at |y - z| = epsilon.
// Quadratic branch r^2/2, linear branch epsilon*|r| - epsilon^2/2.
double huber_loss(double epsilon, double y, double z);
// d/dz of huber_loss: -r on the quadratic branch, -epsilon*sign(r) outside.
double huber_dz(double epsilon, double y, double z);

// Per-point curvature and gradient bounds of the Huber loss composed with
// a linear predictor. These feed the closed-form stability bounds:
//   nu_i  = ||x_i||          (prediction sensitivity in theta)
//   rho_i = epsilon*||x_i||  (loss gradient bound)
//   phi_i = ||x_i||^2        (loss gradient smoothness)
// lambda_sc is the strong-convexity constant of the penalty, 2*omega for
// omega*||theta||^2. Rows of test_F describe the prediction points.
struct LipschitzProfile {
    double gamma = 1.0;
    Eigen::VectorXd nu;
    Eigen::VectorXd rho;
    Eigen::VectorXd phi;
    double rho_bar = 0.0;
    Eigen::VectorXd test_nu;
    Eigen::VectorXd test_rho;
    Eigen::VectorXd test_phi;
    double lambda_sc = 0.0;
};

LipschitzProfile linear_huber_profile(const Eigen::MatrixXd& train_F, const Eigen::MatrixXd& test_F,
                                      double epsilon, double gamma, double lambda_sc);

// ---------------------------------------------------------------------------
// Kernels. Kernelized training maps each point to its row of kernel values
// against the training set and reuses the linear machinery on those rows.

enum class KernelKind { Linear, Rbf, Polynomial };

struct KernelSpec {
    KernelKind kind = KernelKind::Rbf;
    double sigma = 0.1;   // Rbf bandwidth
    double offset = 1.0;  // Polynomial additive constant
    int degree = 2;       // Polynomial degree
};

double kernel_value(const KernelSpec& spec, const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b);
// Gram block K(A, B), rows of A against rows of B.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// ---------------------------------------------------------------------------
// Small fully-connected network: sigmoid hidden layers, identity output.
// Weights live in one flat parameter vector so stochastic training and
// finite-difference checks can treat the model as f(x; theta).

struct MlpShape {
    Eigen::Index inputs = 0;
    std::vector<Eigen::Index> hidden;  // widths of hidden layers

    Eigen::Index parameter_count() const;
};

// Uniform weights on [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
Eigen::VectorXd mlp_init(const MlpShape& shape, std::uint64_t seed);

double mlp_forward(const MlpShape& shape, const Eigen::VectorXd& theta, const Eigen::RowVectorXd& x);
Eigen::VectorXd mlp_forward(const MlpShape& shape, const Eigen::VectorXd& theta, const Eigen::MatrixXd& X);

// Gradient of huber_loss(epsilon, y, f(x; theta)) in theta, via backprop.
Eigen::VectorXd mlp_loss_gradient(const MlpShape& shape, const Eigen::VectorXd& theta,
                                  const Eigen::RowVectorXd& x, double y, double epsilon);

}  // namespace stabcp
