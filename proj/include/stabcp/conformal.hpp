#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "stabcp/core.hpp"
#include "stabcp/trainers.hpp"

namespace stabcp {

struct PredictionInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const noexcept { return lo <= v && v <= hi; }
    double length() const noexcept { return hi - lo; }
};

// Possibly disconnected prediction set, kept as disjoint parts in
// ascending order. Coverage accounting uses the parts; the hull is the
// single interval spanning them.
struct IntervalUnion {
    std::vector<PredictionInterval> parts;
    bool contains(double v) const noexcept;
    double total_length() const noexcept;
    bool empty() const noexcept { return parts.empty(); }
    PredictionInterval hull() const;  // throws on an empty set
};

// Inverts "score(kind, y, center) <= bound" into the set of responses y.
// Absolute residuals give a symmetric interval; signed families give a
// one-sided interval with an infinite lower end.
PredictionInterval interval_from_score_bound(ScoreKind kind, double center, double bound);

// One fit on the n training points; per test point the calibration scores
// are inflated by the leave-one-out stability bounds and the threshold by
// the test-side bound.
std::vector<PredictionInterval> loo_stabcp(const Trainer& trainer, const Eigen::MatrixXd& X,
                                           const Eigen::VectorXd& y, const Eigen::MatrixXd& test_X,
                                           double alpha, ScoreKind kind);

// One base fit to produce the guessed responses (unless given), then one
// augmented refit per test point; scores are inflated by the replace-one
// bounds. m+1 fits for m test points (m when guesses are supplied).
// guesses_out, when non-null, receives the guesses actually used.
std::vector<PredictionInterval> ro_stabcp(const Trainer& trainer, const Eigen::MatrixXd& X,
                                          const Eigen::VectorXd& y, const Eigen::MatrixXd& test_X,
                                          double alpha, ScoreKind kind,
                                          const Eigen::VectorXd* guesses = nullptr,
                                          Eigen::VectorXd* guesses_out = nullptr);

// Sample split: fit on the first ceil(fraction*n) points of a keyed
// shuffle, calibrate on the rest. One fit total.
struct SplitResult {
    std::vector<PredictionInterval> intervals;
    std::vector<Eigen::Index> train_rows;
    std::vector<Eigen::Index> calib_rows;
};
SplitResult split_cp(const Trainer& trainer, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const Eigen::MatrixXd& test_X, double alpha, ScoreKind kind,
                     double train_fraction = 0.7, std::uint64_t seed = 0);

// Exhaustive refit over a response grid: a grid value is kept when its
// test score is at most the conformal quantile of the augmented training
// scores. points fits per grid per test point.
struct GridSpec {
    double lo = 0.0;
    double hi = 0.0;
    Eigen::Index points = 200;
};
GridSpec default_grid(const Eigen::VectorXd& y, Eigen::Index points = 200);

std::vector<IntervalUnion> full_cp(const Trainer& trainer, const Eigen::MatrixXd& X,
                                   const Eigen::VectorXd& y, const Eigen::MatrixXd& test_X,
                                   double alpha, ScoreKind kind,
                                   const std::optional<GridSpec>& grid = std::nullopt);

// Reference method that augments with the actual test response and takes
// the plain quantile of all n+1 scores. m fits; needs test_y, so it is a
// benchmark-only method.
std::vector<PredictionInterval> oracle_cp(const Trainer& trainer, const Eigen::MatrixXd& X,
                                          const Eigen::VectorXd& y, const Eigen::MatrixXd& test_X,
                                          const Eigen::VectorXd& test_y, double alpha, ScoreKind kind);

// Majority vote over n_splits independent sample splits run at alpha/2:
// keeps the responses covered by more than half of the split intervals.
// n_splits fits.
std::vector<IntervalUnion> mm_split_cp(const Trainer& trainer, const Eigen::MatrixXd& X,
                                       const Eigen::VectorXd& y, const Eigen::MatrixXd& test_X,
                                       double alpha, ScoreKind kind, int n_splits = 30,
                                       double train_fraction = 0.7, std::uint64_t seed = 0);

// Method selector and shared knobs for driving the routines above
// uniformly from the harness.
enum class CpMethod { Oracle, Full, Split, RoStab, LooStab, MmSplit };

struct CpConfig {
    double alpha = 0.1;
    CpMethod method = CpMethod::LooStab;
    std::optional<GridSpec> grid;  // Full only; defaults from the responses
    double split_fraction = 0.7;   // Split / MmSplit
    int n_splits = 30;             // MmSplit
    std::uint64_t split_seed = 0;  // Split / MmSplit
};

// Runs the selected method and normalizes every output to one prediction
// set per test point. test_y is required by Oracle and ignored otherwise.
std::vector<IntervalUnion> run_conformal(const Trainer& trainer, const Eigen::MatrixXd& X,
                                         const Eigen::VectorXd& y, const Eigen::MatrixXd& test_X,
                                         const CpConfig& cfg, ScoreKind kind,
                                         const Eigen::VectorXd* test_y = nullptr);

}  // namespace stabcp
