#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "stabcp/core.hpp"
#include "stabcp/stability.hpp"
#include "stabcp/trainers.hpp"

namespace stabcp {

// Screening asks, per test point j, whether the unseen response exceeds a
// cutoff c_j; rejections claim it does, and the selection controls the
// false discovery rate at level q.
struct ScreeningConfig {
    double q = 0.1;
    Eigen::VectorXd thresholds;  // c_j; empty means all zeros
    ScoreKind score_kind = ScoreKind::SignedResidual;
    // Count with "<=" instead of "<" (and reject likewise) for
    // sensitivity analysis; the printed-form procedure uses strict "<".
    bool nonstrict = false;
    double split_fraction = 0.7;  // split baseline only
    std::uint64_t split_seed = 0; // split baseline's own stream
};

enum class ScreeningMethod {
    CfBh,     // sample-split p-values
    RoCfBh,   // replace-one refits, replace-one bound inflation
    LooCfBh,  // single fit, leave-one-out bound inflation
};

struct ScreeningResult {
    Eigen::VectorXd p_values;
    int k_star = 0;
    std::vector<Eigen::Index> rejected;
    std::optional<double> fdp;    // needs the actual test responses
    std::optional<double> power;  // needs the actual test responses
    bool power_vacuous = false;   // no exceedance existed; power reported as 1.0
};

// p_j = (#{i : S_i < s_j} + 1) / (n_calib + 1), strict "<" unless nonstrict.
Eigen::VectorXd split_pvalues(const Eigen::VectorXd& calib_scores, const Eigen::VectorXd& test_scores,
                              bool nonstrict = false);

// Single stability-inflated p-value:
//   (#{i : S_i - tau_i < s + tau_test} + 1) / (n + 1).
double stability_pvalue(const Eigen::VectorXd& train_scores, double test_score,
                        const StabilityBounds& bounds, bool nonstrict = false);

// All m p-values from one shared fit; bounds[j] must be leave-one-out.
Eigen::VectorXd loo_pvalues(const Eigen::VectorXd& train_scores, const Eigen::VectorXd& test_scores,
                            const std::vector<StabilityBounds>& bounds, bool nonstrict = false);

// Same formula on per-test refit scores (row j of refit_scores comes from
// the model refit with candidate j); bounds[j] must be replace-one.
Eigen::VectorXd ro_pvalues(const Eigen::MatrixXd& refit_scores, const Eigen::VectorXd& test_scores,
                           const std::vector<StabilityBounds>& bounds, bool nonstrict = false);

// k* = max{k : #{j : p_j <= q k / m} >= k}; rejects p_j < q k*/m
// (strict, unless nonstrict). k* = 0 rejects nothing.
struct BhResult {
    int k_star = 0;
    std::vector<Eigen::Index> rejected;
};
BhResult bh_procedure(const Eigen::VectorXd& p_values, double q, bool nonstrict = false);

// End-to-end screening. Fits once for LooCfBh, once (on the train fold)
// for CfBh, and once per test point for RoCfBh with the cutoff spliced in
// as the guessed response. When test_y is given, fdp counts rejections
// with y <= c and power counts caught exceedances.
ScreeningResult run_screening(const Trainer& trainer, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& test_X, const ScreeningConfig& cfg,
                              ScreeningMethod method, const Eigen::VectorXd* test_y = nullptr);

}  // namespace stabcp
