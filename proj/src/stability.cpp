#include "stabcp/stability.hpp"

#include <cmath>
#include <stdexcept>

#include "stabcp/errors.hpp"

namespace stabcp {

namespace {

void check_test_index(const LipschitzProfile& p, Eigen::Index j) {
    if (j < 0 || j >= p.test_nu.size()) throw std::invalid_argument("stability bounds: test index out of range");
}

void check_sgd_precondition(const LipschitzProfile& p, int epochs, double eta, Eigen::Index j) {
    if (epochs < 1) throw std::invalid_argument("sgd bounds: epochs must be at least 1");
    if (eta <= 0.0) throw std::invalid_argument("sgd bounds: eta must be positive");
    double phi_max = p.phi.size() ? p.phi.maxCoeff() : 0.0;
    phi_max = std::max(phi_max, p.test_phi[j]);
    if (phi_max > 0.0 && eta > 2.0 / phi_max)
        throw NumericError("sgd bounds: step size " + std::to_string(eta) +
                           " exceeds 2/max(phi) = " + std::to_string(2.0 / phi_max));
}

}  // namespace

StabilityBounds rlm_bounds_loo(const LipschitzProfile& p, Eigen::Index j) {
    check_test_index(p, j);
    if (p.lambda_sc <= 0.0) throw std::invalid_argument("rlm bounds: lambda_sc must be positive");
    const double n1 = static_cast<double>(p.nu.size() + 1);
    const double c = 2.0 * p.gamma * (p.test_rho[j] + p.rho_bar) / (p.lambda_sc * n1);
    StabilityBounds b;
    b.tau_train = c * p.nu;
    b.tau_test = c * p.test_nu[j];
    return b;
}

StabilityBounds rlm_bounds_ro(const LipschitzProfile& p, Eigen::Index j) {
    check_test_index(p, j);
    if (p.lambda_sc <= 0.0) throw std::invalid_argument("rlm bounds: lambda_sc must be positive");
    const double n1 = static_cast<double>(p.nu.size() + 1);
    const double c = 4.0 * p.gamma * p.test_rho[j] / (p.lambda_sc * n1);
    StabilityBounds b;
    b.tau_train = c * p.nu;
    b.tau_test = c * p.test_nu[j];
    b.side = BoundSide::ReplaceOne;
    return b;
}

StabilityBounds sgd_bounds_convex_loo(const LipschitzProfile& p, int epochs, double eta, Eigen::Index j) {
    check_test_index(p, j);
    check_sgd_precondition(p, epochs, eta, j);
    const double c = static_cast<double>(epochs) * eta * p.gamma * p.test_rho[j];
    StabilityBounds b;
    b.tau_train = c * p.nu;
    b.tau_test = c * p.test_nu[j];
    return b;
}

StabilityBounds sgd_bounds_convex_ro(const LipschitzProfile& p, int epochs, double eta, Eigen::Index j) {
    StabilityBounds b = sgd_bounds_convex_loo(p, epochs, eta, j);
    b.tau_train *= 2.0;
    b.tau_test *= 2.0;
    b.side = BoundSide::ReplaceOne;
    return b;
}

namespace {

// sum_{r=1..R} kappa^r with kappa = prod_i (1 + eta*phi_i), log-space guarded.
double epoch_amplification(const LipschitzProfile& p, int epochs, double eta) {
    double log_kappa = 0.0;
    for (Eigen::Index i = 0; i < p.phi.size(); ++i) {
        if (p.phi[i] < 0.0) throw std::invalid_argument("sgd bounds: phi must be nonnegative");
        log_kappa += std::log1p(eta * p.phi[i]);
    }
    if (log_kappa == 0.0) return static_cast<double>(epochs);
    // Largest term is kappa^R; refuse once it cannot be represented.
    if (static_cast<double>(epochs) * log_kappa > 700.0)
        throw NumericError("sgd nonconvex bound overflows: R*log(kappa) = " +
                           std::to_string(static_cast<double>(epochs) * log_kappa));
    const double kappa = std::exp(log_kappa);
    double sum = 0.0, pow_r = 1.0;
    for (int r = 1; r <= epochs; ++r) {
        pow_r *= kappa;
        sum += pow_r;
        if (std::isinf(sum)) throw NumericError("sgd nonconvex bound overflows in the epoch sum");
    }
    return sum;
}

}  // namespace

StabilityBounds sgd_bounds_nonconvex_loo(const LipschitzProfile& p, int epochs, double eta, Eigen::Index j) {
    check_test_index(p, j);
    if (epochs < 1) throw std::invalid_argument("sgd bounds: epochs must be at least 1");
    if (eta <= 0.0) throw std::invalid_argument("sgd bounds: eta must be positive");
    const double amp = epoch_amplification(p, epochs, eta);
    const double c = amp * eta * p.gamma * p.test_rho[j];
    StabilityBounds b;
    b.tau_train = c * p.nu;
    b.tau_test = c * p.test_nu[j];
    return b;
}

StabilityBounds sgd_bounds_nonconvex_ro(const LipschitzProfile& p, int epochs, double eta, Eigen::Index j) {
    StabilityBounds b = sgd_bounds_nonconvex_loo(p, epochs, eta, j);
    b.tau_train *= 2.0;
    b.tau_test *= 2.0;
    b.side = BoundSide::ReplaceOne;
    return b;
}

StabilityBounds approx_nn_bounds_loo(const Eigen::MatrixXd& train_X, const Eigen::MatrixXd& test_X,
                                     int epochs, double eta, double gamma, Eigen::Index j) {
    if (j < 0 || j >= test_X.rows()) throw std::invalid_argument("approx nn bounds: test index out of range");
    if (epochs < 1) throw std::invalid_argument("approx nn bounds: epochs must be at least 1");
    if (eta <= 0.0) throw std::invalid_argument("approx nn bounds: eta must be positive");
    const double tn = test_X.row(j).norm();
    const double c = static_cast<double>(epochs) * eta * gamma * tn;
    StabilityBounds b;
    b.tau_train = c * train_X.rowwise().norm();
    b.tau_test = c * tn;
    b.heuristic = true;
    return b;
}

StabilityBounds approx_nn_bounds_ro(const Eigen::MatrixXd& train_X, const Eigen::MatrixXd& test_X,
                                    int epochs, double eta, double gamma, Eigen::Index j) {
    StabilityBounds b = approx_nn_bounds_loo(train_X, test_X, epochs, eta, gamma, j);
    b.tau_train *= 2.0;
    b.tau_test *= 2.0;
    b.side = BoundSide::ReplaceOne;
    return b;
}

namespace {

// p = 1 - (1 - 1/n)^m and its complement, computed without cancellation.
std::pair<double, double> inclusion_probability(Eigen::Index n, Eigen::Index m_bag) {
    if (n <= 1) throw std::invalid_argument("bagging bound: n must exceed 1");
    if (m_bag < 1) throw std::invalid_argument("bagging bound: m_bag must be at least 1");
    const double log_q = static_cast<double>(m_bag) * std::log1p(-1.0 / static_cast<double>(n));
    const double q = std::exp(log_q);
    const double p = -std::expm1(log_q);
    return {p, q};
}

}  // namespace

double bagging_bound_derandomized(double gamma, double w, Eigen::Index n, Eigen::Index m_bag) {
    if (w < 0.0) throw std::invalid_argument("bagging bound: w must be nonnegative");
    const auto [p, q] = inclusion_probability(n, m_bag);
    return 0.5 * gamma * w * std::sqrt(p / q);
}

double bagging_bound_probabilistic(double gamma, double w, Eigen::Index n, Eigen::Index m_bag,
                                   Eigen::Index bags, double delta) {
    if (w < 0.0) throw std::invalid_argument("bagging bound: w must be nonnegative");
    if (bags < 1) throw std::invalid_argument("bagging bound: bags must be at least 1");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("bagging bound: delta must lie in (0, 1)");
    const auto [p, q] = inclusion_probability(n, m_bag);
    const double hoeffding = std::sqrt(2.0 / static_cast<double>(bags) * std::log(4.0 / delta));
    return gamma * w * (0.5 * std::sqrt(p / q) + hoeffding);
}

}  // namespace stabcp
