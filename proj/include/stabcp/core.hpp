#pragma once

#include <Eigen/Dense>

namespace stabcp {

// Nonconformity score families. All three are 1-Lipschitz in the
// prediction argument, so the stability machinery uses gamma = 1.
enum class ScoreKind {
    AbsoluteResidual,  // |y - z|
    SignedResidual,    // y - z
    Clip,              // 100*y - z, for binary responses scored against a prediction
};

double score(ScoreKind kind, double y, double z);
Eigen::VectorXd score(ScoreKind kind, const Eigen::VectorXd& y, const Eigen::VectorXd& z);

// Lipschitz constant of s(y, .) for the given family.
double score_gamma(ScoreKind kind) noexcept;

// Lower p-th empirical quantile: the ceil(p*N)-th smallest value, no
// interpolation. Accepts +inf entries (they sort last). p in (0, 1].
double lower_quantile(const Eigen::VectorXd& values, double p);
double lower_quantile(std::vector<double> values, double p);

// Quantile used by conformal calibration: lower (1-alpha)-quantile of the
// scores augmented with a single +inf sentinel. alpha in [0, 1). Returns
// +inf when the sentinel is selected, which callers surface as an
// unbounded interval.
double conformal_quantile(const Eigen::VectorXd& scores, double alpha);

}  // namespace stabcp
