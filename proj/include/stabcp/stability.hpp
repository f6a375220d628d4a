#pragma once

#include <functional>

#include <Eigen/Dense>

#include "stabcp/models.hpp"

namespace stabcp {

// Worst-case score perturbation when one training point is added
// (leave-one-out direction) or swapped (replace-one direction), for test
// point j. tau_train[i] bounds the shift of the i-th calibration score,
// tau_test bounds the shift of the test score.
enum class BoundSide { LeaveOneOut, ReplaceOne };

struct StabilityBounds {
    Eigen::VectorXd tau_train;
    double tau_test = 0.0;
    BoundSide side = BoundSide::LeaveOneOut;
    bool heuristic = false;  // set when the bound is approximate, not proven
};

// Regularized loss minimization with an lambda_sc-strongly-convex penalty:
//   tau_loo_i = 2*gamma*nu_i*(rho_test + rho_bar) / (lambda_sc*(n+1))
//   tau_ro_i  = 4*gamma*nu_i*rho_test / (lambda_sc*(n+1))
StabilityBounds rlm_bounds_loo(const LipschitzProfile& p, Eigen::Index j);
StabilityBounds rlm_bounds_ro(const LipschitzProfile& p, Eigen::Index j);

// Stochastic gradient descent with random reshuffling, R epochs at step
// eta. Convex losses with eta <= 2/max(phi): tau_loo_i = R*eta*gamma*nu_i*rho_test,
// tau_ro = 2*tau_loo.
StabilityBounds sgd_bounds_convex_loo(const LipschitzProfile& p, int epochs, double eta, Eigen::Index j);
StabilityBounds sgd_bounds_convex_ro(const LipschitzProfile& p, int epochs, double eta, Eigen::Index j);

// Smooth nonconvex losses: the epoch factor R is replaced by
// sum_{r=1..R} kappa^r with kappa = prod_i (1 + eta*phi_i), evaluated in
// log space. Overflow raises NumericError.
StabilityBounds sgd_bounds_nonconvex_loo(const LipschitzProfile& p, int epochs, double eta, Eigen::Index j);
StabilityBounds sgd_bounds_nonconvex_ro(const LipschitzProfile& p, int epochs, double eta, Eigen::Index j);

// Rough guide for networks trained by SGD: tau_loo_i ~ R*eta*gamma*||x_i||*||x_test||.
// Not a proven bound; results carry heuristic = true.
StabilityBounds approx_nn_bounds_loo(const Eigen::MatrixXd& train_X, const Eigen::MatrixXd& test_X,
                                     int epochs, double eta, double gamma, Eigen::Index j);
StabilityBounds approx_nn_bounds_ro(const Eigen::MatrixXd& train_X, const Eigen::MatrixXd& test_X,
                                    int epochs, double eta, double gamma, Eigen::Index j);

// Bagging with resample size m_bag out of n (with replacement), prediction
// range bound w. Derandomized ensemble (B -> infinity):
//   tau = (gamma*w/2) * sqrt(p/(1-p)),  p = 1 - (1 - 1/n)^m_bag.
double bagging_bound_derandomized(double gamma, double w, Eigen::Index n, Eigen::Index m_bag);

// Finite ensemble of B bags, valid for each point with probability at
// least 1 - delta: adds gamma*w*sqrt((2/B)*log(4/delta)).
double bagging_bound_probabilistic(double gamma, double w, Eigen::Index n, Eigen::Index m_bag,
                                   Eigen::Index bags, double delta);

// Per-test-point bound factory handed to the conformal routines. ro may be
// empty when a trainer has no replace-one bound (bagging).
struct StabilityModel {
    std::function<StabilityBounds(Eigen::Index)> loo;
    std::function<StabilityBounds(Eigen::Index)> ro;
};

}  // namespace stabcp
