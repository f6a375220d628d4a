#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "stabcp/models.hpp"
#include "stabcp/stability.hpp"

namespace stabcp {

// Thread-safe tally of model fits; conformal methods are specified by how
// many fits they spend, so the harness watches deltas of this counter.
class FitCounter {
public:
    void add(std::int64_t k = 1) noexcept { n_.fetch_add(k, std::memory_order_relaxed); }
    std::int64_t count() const noexcept { return n_.load(std::memory_order_relaxed); }
    void reset() noexcept { n_.store(0, std::memory_order_relaxed); }

private:
    std::atomic<std::int64_t> n_{0};
};

// A fitted model: batch prediction over rows.
using Predictor = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

double predict_one(const Predictor& f, const Eigen::RowVectorXd& x);

// --- solvers -------------------------------------------------------------

struct RlmConfig {
    double omega = 1.0;          // penalty weight, omega*||theta||^2 (strong convexity 2*omega)
    double learning_rate = 0.01;
    double grad_tol = 1e-8;
    long max_iters = 500000;
};

struct SgdConfig {
    int epochs = 15;
    double learning_rate = 1e-3;
    std::uint64_t permutation_seed = 0;  // keyed reshuffling stream, shared across coupled refits
};

// Full-batch gradient descent on (1/N)*sum huber + omega*theta'M theta from
// theta = 0, stopping when ||grad|| <= grad_tol. M defaults to identity;
// kernel training passes the Gram matrix. Non-convergence raises NumericError.
Eigen::VectorXd fit_rlm(const Eigen::MatrixXd& F, const Eigen::VectorXd& y, double epsilon,
                        const RlmConfig& cfg, const Eigen::MatrixXd* penalty = nullptr);

// One pass per epoch in keyed-permutation order, theta -= eta * grad of the
// pointwise Huber loss. Starts at theta0 (zeros when empty).
Eigen::VectorXd fit_sgd(const Eigen::MatrixXd& F, const Eigen::VectorXd& y, double epsilon,
                        const SgdConfig& cfg, const Eigen::VectorXd& theta0 = {});

Eigen::VectorXd fit_sgd_mlp(const MlpShape& shape, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            double epsilon, const SgdConfig& cfg, const Eigen::VectorXd& theta0);

// Trains on (X, y) + one appended point and on (X, y) alone, with the
// appended point's visits spliced into the same permutation stream: epoch
// orders of the two runs agree after deleting the appended index. This is
// the coupling under which the leave-one-out SGD bound holds exactly.
struct CoupledFit {
    Eigen::VectorXd with_augmented;
    Eigen::VectorXd without_augmented;
};
CoupledFit fit_sgd_coupled_loo(const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                               const Eigen::RowVectorXd& aug_x, double aug_y, double epsilon,
                               const SgdConfig& cfg, const Eigen::VectorXd& theta0 = {});

// --- regression trees & bagging ------------------------------------------

// Axis-aligned regression tree: splits minimize summed squared error,
// thresholds fall on midpoints between consecutive distinct values, leaves
// predict the mean. Ties go to the lowest feature index, then threshold.
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    double predict(const Eigen::RowVectorXd& x) const;
};

RegressionTree fit_regression_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const std::vector<Eigen::Index>& rows, int max_depth);

struct BaggingConfig {
    Eigen::Index bags = 100;
    Eigen::Index bag_size = 0;  // 0 means the training size n
    int max_depth = 3;
    std::uint64_t seed = 0;
    // When set, stability uses the finite-B probabilistic bound at this
    // failure level instead of the derandomized one.
    std::optional<double> delta;
};

// --- trainers --------------------------------------------------------------

// A trainer couples a fitting procedure with the stability bounds proven
// for it. fit() increments the attached counter once per call.
class Trainer {
public:
    virtual ~Trainer() = default;

    Predictor fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const;

    // Bound factory for the given training set and test points. gamma is
    // the score family's Lipschitz constant.
    virtual StabilityModel stability(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                     const Eigen::MatrixXd& test_X, double gamma) const = 0;

    void set_counter(FitCounter* c) const noexcept { counter_ = c; }
    FitCounter* counter() const noexcept { return counter_; }

private:
    virtual Predictor do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const = 0;
    mutable FitCounter* counter_ = nullptr;
};

class RlmTrainer final : public Trainer {
public:
    RlmTrainer(double epsilon, RlmConfig cfg) : epsilon_(epsilon), cfg_(cfg) {}
    StabilityModel stability(const Eigen::MatrixXd&, const Eigen::VectorXd&, const Eigen::MatrixXd&,
                             double gamma) const override;
    const RlmConfig& config() const noexcept { return cfg_; }
    double epsilon() const noexcept { return epsilon_; }

private:
    Predictor do_fit(const Eigen::MatrixXd&, const Eigen::VectorXd&) const override;
    double epsilon_;
    RlmConfig cfg_;
};

class SgdTrainer final : public Trainer {
public:
    SgdTrainer(double epsilon, SgdConfig cfg) : epsilon_(epsilon), cfg_(cfg) {}
    StabilityModel stability(const Eigen::MatrixXd&, const Eigen::VectorXd&, const Eigen::MatrixXd&,
                             double gamma) const override;
    const SgdConfig& config() const noexcept { return cfg_; }
    double epsilon() const noexcept { return epsilon_; }

private:
    Predictor do_fit(const Eigen::MatrixXd&, const Eigen::VectorXd&) const override;
    double epsilon_;
    SgdConfig cfg_;
};

class KernelRlmTrainer final : public Trainer {
public:
    KernelRlmTrainer(KernelSpec kernel, double epsilon, RlmConfig cfg)
        : kernel_(kernel), epsilon_(epsilon), cfg_(cfg) {}
    StabilityModel stability(const Eigen::MatrixXd&, const Eigen::VectorXd&, const Eigen::MatrixXd&,
                             double gamma) const override;

private:
    Predictor do_fit(const Eigen::MatrixXd&, const Eigen::VectorXd&) const override;
    KernelSpec kernel_;
    double epsilon_;
    RlmConfig cfg_;
};

class KernelSgdTrainer final : public Trainer {
public:
    KernelSgdTrainer(KernelSpec kernel, double epsilon, SgdConfig cfg)
        : kernel_(kernel), epsilon_(epsilon), cfg_(cfg) {}
    StabilityModel stability(const Eigen::MatrixXd&, const Eigen::VectorXd&, const Eigen::MatrixXd&,
                             double gamma) const override;

private:
    Predictor do_fit(const Eigen::MatrixXd&, const Eigen::VectorXd&) const override;
    KernelSpec kernel_;
    double epsilon_;
    SgdConfig cfg_;
};

class MlpSgdTrainer final : public Trainer {
public:
    MlpSgdTrainer(std::vector<Eigen::Index> hidden, double epsilon, SgdConfig cfg, std::uint64_t init_seed)
        : hidden_(std::move(hidden)), epsilon_(epsilon), cfg_(cfg), init_seed_(init_seed) {}
    // Heuristic bounds; results carry heuristic = true.
    StabilityModel stability(const Eigen::MatrixXd&, const Eigen::VectorXd&, const Eigen::MatrixXd&,
                             double gamma) const override;

private:
    Predictor do_fit(const Eigen::MatrixXd&, const Eigen::VectorXd&) const override;
    std::vector<Eigen::Index> hidden_;
    double epsilon_;
    SgdConfig cfg_;
    std::uint64_t init_seed_;
};

class BaggingTrainer final : public Trainer {
public:
    explicit BaggingTrainer(BaggingConfig cfg) : cfg_(cfg) {}
    // Leave-one-out bounds only; the replace-one slot is empty.
    StabilityModel stability(const Eigen::MatrixXd&, const Eigen::VectorXd&, const Eigen::MatrixXd&,
                             double gamma) const override;
    const BaggingConfig& config() const noexcept { return cfg_; }

private:
    Predictor do_fit(const Eigen::MatrixXd&, const Eigen::VectorXd&) const override;
    BaggingConfig cfg_;
};

}  // namespace stabcp
