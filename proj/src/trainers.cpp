#include "stabcp/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "stabcp/errors.hpp"
#include "stabcp/rng.hpp"

namespace stabcp {

double predict_one(const Predictor& f, const Eigen::RowVectorXd& x) {
    return f(x)(0);
}

// --- solvers -------------------------------------------------------------

Eigen::VectorXd fit_rlm(const Eigen::MatrixXd& F, const Eigen::VectorXd& y, double epsilon,
                        const RlmConfig& cfg, const Eigen::MatrixXd* penalty) {
    const Eigen::Index n = F.rows();
    const Eigen::Index d = F.cols();
    if (y.size() != n) throw DataError("fit_rlm: feature rows and responses disagree");
    if (n == 0) throw DataError("fit_rlm: empty training set");
    if (penalty && (penalty->rows() != d || penalty->cols() != d))
        throw DataError("fit_rlm: penalty matrix shape mismatch");
    if (cfg.omega <= 0.0) throw NumericError("fit_rlm: penalty weight must be positive");

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd g(n), grad(d);
    for (long it = 0; it < cfg.max_iters; ++it) {
        const Eigen::VectorXd z = F * theta;
        for (Eigen::Index i = 0; i < n; ++i) g(i) = huber_dz(epsilon, y(i), z(i));
        grad = F.transpose() * g / static_cast<double>(n);
        if (penalty) {
            grad.noalias() += 2.0 * cfg.omega * (*penalty * theta);
        } else {
            grad += 2.0 * cfg.omega * theta;
        }
        const double gnorm = grad.norm();
        if (!std::isfinite(gnorm)) throw NumericError("fit_rlm: gradient diverged; lower the learning rate");
        if (gnorm <= cfg.grad_tol) return theta;
        theta -= cfg.learning_rate * grad;
    }
    throw NumericError("fit_rlm: no convergence within " + std::to_string(cfg.max_iters) +
                       " iterations (grad_tol=" + std::to_string(cfg.grad_tol) + ")");
}

Eigen::VectorXd fit_sgd(const Eigen::MatrixXd& F, const Eigen::VectorXd& y, double epsilon,
                        const SgdConfig& cfg, const Eigen::VectorXd& theta0) {
    const Eigen::Index n = F.rows();
    const Eigen::Index d = F.cols();
    if (y.size() != n) throw DataError("fit_sgd: feature rows and responses disagree");
    if (n == 0) throw DataError("fit_sgd: empty training set");
    Eigen::VectorXd theta = theta0.size() ? theta0 : Eigen::VectorXd::Zero(d);
    if (theta.size() != d) throw DataError("fit_sgd: starting point has wrong dimension");

    for (int r = 0; r < cfg.epochs; ++r) {
        const auto order = keyed_permutation(cfg.permutation_seed, static_cast<std::uint64_t>(r), n);
        for (const Eigen::Index i : order) {
            const double z = F.row(i).dot(theta);
            theta -= cfg.learning_rate * huber_dz(epsilon, y(i), z) * F.row(i).transpose();
        }
    }
    if (!theta.allFinite()) throw NumericError("fit_sgd: parameters diverged; lower the learning rate");
    return theta;
}

Eigen::VectorXd fit_sgd_mlp(const MlpShape& shape, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            double epsilon, const SgdConfig& cfg, const Eigen::VectorXd& theta0) {
    const Eigen::Index n = X.rows();
    if (y.size() != n) throw DataError("fit_sgd_mlp: feature rows and responses disagree");
    if (n == 0) throw DataError("fit_sgd_mlp: empty training set");
    if (X.cols() != shape.inputs) throw DataError("fit_sgd_mlp: feature width disagrees with the network");
    if (theta0.size() != shape.parameter_count())
        throw DataError("fit_sgd_mlp: starting point has wrong dimension");

    Eigen::VectorXd theta = theta0;
    for (int r = 0; r < cfg.epochs; ++r) {
        const auto order = keyed_permutation(cfg.permutation_seed, static_cast<std::uint64_t>(r), n);
        for (const Eigen::Index i : order) {
            theta -= cfg.learning_rate * mlp_loss_gradient(shape, theta, X.row(i), y(i), epsilon);
        }
    }
    if (!theta.allFinite()) throw NumericError("fit_sgd_mlp: parameters diverged; lower the learning rate");
    return theta;
}

CoupledFit fit_sgd_coupled_loo(const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                               const Eigen::RowVectorXd& aug_x, double aug_y, double epsilon,
                               const SgdConfig& cfg, const Eigen::VectorXd& theta0) {
    const Eigen::Index n = F.rows();
    Eigen::MatrixXd Fa(n + 1, F.cols());
    Fa.topRows(n) = F;
    Fa.row(n) = aug_x;
    Eigen::VectorXd ya(n + 1);
    ya.head(n) = y;
    ya(n) = aug_y;
    // Permutation keys are per-index, independent of the set size, so the two
    // runs visit the shared points in the same relative order every epoch.
    CoupledFit out;
    out.with_augmented = fit_sgd(Fa, ya, epsilon, cfg, theta0);
    out.without_augmented = fit_sgd(F, y, epsilon, cfg, theta0);
    return out;
}

// --- regression trees ------------------------------------------------------

double RegressionTree::predict(const Eigen::RowVectorXd& x) const {
    int k = 0;
    while (nodes[k].feature >= 0) {
        const TreeNode& nd = nodes[k];
        k = (x(nd.feature) <= nd.threshold) ? nd.left : nd.right;
    }
    return nodes[k].value;
}

namespace {

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double sse = std::numeric_limits<double>::infinity();
};

double subset_mean(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows) {
    double s = 0.0;
    for (const Eigen::Index r : rows) s += y(r);
    return s / static_cast<double>(rows.size());
}

SplitChoice best_split(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const std::vector<Eigen::Index>& rows) {
    const std::size_t k = rows.size();
    SplitChoice best;
    double sy = 0.0, syy = 0.0;
    for (const Eigen::Index r : rows) {
        sy += y(r);
        syy += y(r) * y(r);
    }
    const double parent_sse = syy - sy * sy / static_cast<double>(k);
    best.sse = parent_sse;

    std::vector<Eigen::Index> order(rows);
    for (int f = 0; f < X.cols(); ++f) {
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            if (X(a, f) != X(b, f)) return X(a, f) < X(b, f);
            return a < b;
        });
        double lsy = 0.0, lsyy = 0.0;
        for (std::size_t t = 1; t < k; ++t) {
            const double yv = y(order[t - 1]);
            lsy += yv;
            lsyy += yv * yv;
            const double a = X(order[t - 1], f);
            const double b = X(order[t], f);
            if (a == b) continue;
            const double lt = static_cast<double>(t);
            const double rt = static_cast<double>(k - t);
            const double sse = (lsyy - lsy * lsy / lt) + ((syy - lsyy) - (sy - lsy) * (sy - lsy) / rt);
            if (sse < best.sse) {  // strict: ties keep the lowest feature, then threshold
                double thr = a + (b - a) / 2.0;
                if (!(thr < b)) thr = a;  // rounding guard: right side must stay nonempty
                best.found = true;
                best.feature = f;
                best.threshold = thr;
                best.sse = sse;
            }
        }
    }
    return best;
}

int build_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<Eigen::Index> rows,
               int depth, int max_depth, std::vector<TreeNode>& nodes) {
    const int self = static_cast<int>(nodes.size());
    nodes.emplace_back();
    if (depth >= max_depth || rows.size() < 2) {
        nodes[self].value = subset_mean(y, rows);
        return self;
    }
    const SplitChoice split = best_split(X, y, rows);
    if (!split.found) {
        nodes[self].value = subset_mean(y, rows);
        return self;
    }
    std::vector<Eigen::Index> left, right;
    for (const Eigen::Index r : rows) {
        (X(r, split.feature) <= split.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = build_tree(X, y, std::move(left), depth + 1, max_depth, nodes);
    const int r = build_tree(X, y, std::move(right), depth + 1, max_depth, nodes);
    nodes[self].feature = split.feature;
    nodes[self].threshold = split.threshold;
    nodes[self].left = l;
    nodes[self].right = r;
    return self;
}

}  // namespace

RegressionTree fit_regression_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const std::vector<Eigen::Index>& rows, int max_depth) {
    if (rows.empty()) throw DataError("fit_regression_tree: empty row set");
    if (max_depth < 0) throw DataError("fit_regression_tree: negative depth");
    RegressionTree tree;
    build_tree(X, y, rows, 0, max_depth, tree.nodes);
    return tree;
}

// --- trainers --------------------------------------------------------------

Predictor Trainer::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
    if (counter_) counter_->add(1);
    return do_fit(X, y);
}

Predictor RlmTrainer::do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
    Eigen::VectorXd theta = fit_rlm(X, y, epsilon_, cfg_);
    return [theta = std::move(theta)](const Eigen::MatrixXd& M) -> Eigen::VectorXd { return M * theta; };
}

StabilityModel RlmTrainer::stability(const Eigen::MatrixXd& X, const Eigen::VectorXd&,
                                     const Eigen::MatrixXd& test_X, double gamma) const {
    LipschitzProfile p = linear_huber_profile(X, test_X, epsilon_, gamma, 2.0 * cfg_.omega);
    StabilityModel m;
    m.loo = [p](Eigen::Index j) { return rlm_bounds_loo(p, j); };
    m.ro = [p](Eigen::Index j) { return rlm_bounds_ro(p, j); };
    return m;
}

Predictor SgdTrainer::do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
    Eigen::VectorXd theta = fit_sgd(X, y, epsilon_, cfg_);
    return [theta = std::move(theta)](const Eigen::MatrixXd& M) -> Eigen::VectorXd { return M * theta; };
}

StabilityModel SgdTrainer::stability(const Eigen::MatrixXd& X, const Eigen::VectorXd&,
                                     const Eigen::MatrixXd& test_X, double gamma) const {
    LipschitzProfile p = linear_huber_profile(X, test_X, epsilon_, gamma, 0.0);
    StabilityModel m;
    const int epochs = cfg_.epochs;
    const double eta = cfg_.learning_rate;
    m.loo = [p, epochs, eta](Eigen::Index j) { return sgd_bounds_convex_loo(p, epochs, eta, j); };
    m.ro = [p, epochs, eta](Eigen::Index j) { return sgd_bounds_convex_ro(p, epochs, eta, j); };
    return m;
}

namespace {

// Smallest Gram eigenvalue scales the strong convexity of the kernelized
// penalty; a singular Gram matrix leaves the bounds undefined.
double gram_min_eigenvalue(const Eigen::MatrixXd& K) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("kernel Gram eigenvalue computation failed");
    return es.eigenvalues().minCoeff();
}

}  // namespace

Predictor KernelRlmTrainer::do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
    Eigen::MatrixXd K = kernel_matrix(kernel_, X, X);
    Eigen::VectorXd theta = fit_rlm(K, y, epsilon_, cfg_, &K);
    return [spec = kernel_, base = Eigen::MatrixXd(X),
            theta = std::move(theta)](const Eigen::MatrixXd& M) -> Eigen::VectorXd {
        return kernel_matrix(spec, M, base) * theta;
    };
}

StabilityModel KernelRlmTrainer::stability(const Eigen::MatrixXd& X, const Eigen::VectorXd&,
                                           const Eigen::MatrixXd& test_X, double gamma) const {
    const Eigen::MatrixXd K = kernel_matrix(kernel_, X, X);
    const double lmin = gram_min_eigenvalue(K);
    if (lmin <= 1e-10)
        throw NumericError("kernel Gram matrix is numerically singular (min eigenvalue " +
                           std::to_string(lmin) + "); stability bounds are unavailable");
    const Eigen::MatrixXd Kt = kernel_matrix(kernel_, test_X, X);
    LipschitzProfile p = linear_huber_profile(K, Kt, epsilon_, gamma, 2.0 * cfg_.omega * lmin);
    StabilityModel m;
    m.loo = [p](Eigen::Index j) { return rlm_bounds_loo(p, j); };
    m.ro = [p](Eigen::Index j) { return rlm_bounds_ro(p, j); };
    return m;
}

Predictor KernelSgdTrainer::do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
    const Eigen::MatrixXd K = kernel_matrix(kernel_, X, X);
    Eigen::VectorXd theta = fit_sgd(K, y, epsilon_, cfg_);
    return [spec = kernel_, base = Eigen::MatrixXd(X),
            theta = std::move(theta)](const Eigen::MatrixXd& M) -> Eigen::VectorXd {
        return kernel_matrix(spec, M, base) * theta;
    };
}

StabilityModel KernelSgdTrainer::stability(const Eigen::MatrixXd& X, const Eigen::VectorXd&,
                                           const Eigen::MatrixXd& test_X, double gamma) const {
    const Eigen::MatrixXd K = kernel_matrix(kernel_, X, X);
    const Eigen::MatrixXd Kt = kernel_matrix(kernel_, test_X, X);
    LipschitzProfile p = linear_huber_profile(K, Kt, epsilon_, gamma, 0.0);
    StabilityModel m;
    const int epochs = cfg_.epochs;
    const double eta = cfg_.learning_rate;
    m.loo = [p, epochs, eta](Eigen::Index j) { return sgd_bounds_convex_loo(p, epochs, eta, j); };
    m.ro = [p, epochs, eta](Eigen::Index j) { return sgd_bounds_convex_ro(p, epochs, eta, j); };
    return m;
}

Predictor MlpSgdTrainer::do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
    MlpShape shape{X.cols(), hidden_};
    const Eigen::VectorXd theta0 = mlp_init(shape, init_seed_);
    Eigen::VectorXd theta = fit_sgd_mlp(shape, X, y, epsilon_, cfg_, theta0);
    return [shape, theta = std::move(theta)](const Eigen::MatrixXd& M) -> Eigen::VectorXd {
        return mlp_forward(shape, theta, M);
    };
}

StabilityModel MlpSgdTrainer::stability(const Eigen::MatrixXd& X, const Eigen::VectorXd&,
                                        const Eigen::MatrixXd& test_X, double gamma) const {
    StabilityModel m;
    const int epochs = cfg_.epochs;
    const double eta = cfg_.learning_rate;
    Eigen::MatrixXd Xc = X, Tc = test_X;
    m.loo = [Xc, Tc, epochs, eta, gamma](Eigen::Index j) {
        return approx_nn_bounds_loo(Xc, Tc, epochs, eta, gamma, j);
    };
    m.ro = [Xc, Tc, epochs, eta, gamma](Eigen::Index j) {
        return approx_nn_bounds_ro(Xc, Tc, epochs, eta, gamma, j);
    };
    return m;
}

Predictor BaggingTrainer::do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
    const Eigen::Index n = X.rows();
    if (n == 0) throw DataError("bagging: empty training set");
    if (y.size() != n) throw DataError("bagging: feature rows and responses disagree");
    if (cfg_.bags <= 0) throw DataError("bagging: need at least one bag");
    const Eigen::Index m_bag = cfg_.bag_size > 0 ? cfg_.bag_size : n;

    auto trees = std::make_shared<std::vector<RegressionTree>>();
    trees->reserve(static_cast<std::size_t>(cfg_.bags));
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(m_bag));
    for (Eigen::Index b = 0; b < cfg_.bags; ++b) {
        Rng rng(derive_seed(cfg_.seed, static_cast<std::uint64_t>(b)));
        for (auto& r : rows) r = static_cast<Eigen::Index>(rng.integer(static_cast<std::uint64_t>(n)));
        trees->push_back(fit_regression_tree(X, y, rows, cfg_.max_depth));
    }
    return [trees](const Eigen::MatrixXd& M) -> Eigen::VectorXd {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(M.rows());
        for (const auto& t : *trees)
            for (Eigen::Index i = 0; i < M.rows(); ++i) out(i) += t.predict(M.row(i));
        return out / static_cast<double>(trees->size());
    };
}

StabilityModel BaggingTrainer::stability(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                         const Eigen::MatrixXd&, double gamma) const {
    const Eigen::Index n = X.rows();
    if (y.size() != n || n == 0) throw DataError("bagging: bad training set for stability bounds");
    const Eigen::Index m_bag = cfg_.bag_size > 0 ? cfg_.bag_size : n;
    const double w = y.maxCoeff() - y.minCoeff();
    const double tau = cfg_.delta
                           ? bagging_bound_probabilistic(gamma, w, n, m_bag, cfg_.bags, *cfg_.delta)
                           : bagging_bound_derandomized(gamma, w, n, m_bag);
    StabilityModel m;
    m.loo = [tau, n](Eigen::Index) {
        StabilityBounds b;
        b.tau_train = Eigen::VectorXd::Constant(n, tau);
        b.tau_test = tau;
        return b;
    };
    return m;
}

}  // namespace stabcp
