#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace stabcp {

struct Dataset {
    Eigen::MatrixXd X;
    std::optional<Eigen::VectorXd> y;
    std::vector<std::string> feature_names;
    std::string response_name;  // empty when y is absent
};

// Sigma_{ij} = rho^|i-j|; positive definite for |rho| < 1.
Eigen::MatrixXd ar1_covariance(Eigen::Index d, double rho);

// Coefficients beta_j proportional to (1 - j/d)^5 for j = 1..d, rescaled
// so ||beta||^2 = d. The last coefficient is exactly zero.
Eigen::VectorXd beta_vector(Eigen::Index d);

enum class SignalModel { Linear, Nonlinear };

struct SyntheticSpec {
    Eigen::Index n = 100;
    Eigen::Index m = 100;
    Eigen::Index d = 100;
    double rho_ar = 0.5;
    SignalModel model = SignalModel::Linear;
    double noise_sd = 1.0;
    std::uint64_t seed = 0;
};

// Rows X_i ~ N(0, Sigma/d) via the Cholesky factor of ar1_covariance.
// The signal is mu(x) = beta'x / sqrt(d) (Linear) or
// mu(x) = sum_j beta_j exp(x_j/10) / sqrt(d) (Nonlinear); the 1/sqrt(d)
// keeps the signal's share of the response variance bounded as d grows,
// so benchmark interval lengths are set by noise_sd, not by d. Noise is
// N(0, noise_sd^2) from a separate stream. First n rows train, last m test.
std::pair<Dataset, Dataset> gen_synthetic(const SyntheticSpec& spec);

// Strict CSV reader: comma-separated, first row names the columns,
// decimal-point numerics, no quoting. response_column is pulled out as y
// ("" loads a feature-only dataset). Missing or unparseable fields raise
// DataError naming the offending rows.
Dataset load_csv(const std::string& path, const std::string& response_column);

// Centers and rescales every continuous column (features and response) to
// mean 0 and population sd 1. Columns whose values all lie in {0, 1} are
// considered encodings and left untouched; constant columns raise
// DataError.
Dataset zscore_normalize(const Dataset& ds);

// Seeded uniform sample of m rows (without replacement) as the test set;
// remaining rows keep their original order as training.
std::pair<Dataset, Dataset> holdout_split(const Dataset& ds, Eigen::Index m, std::uint64_t seed);

// Writes header + rows with round-trippable formatting.
void write_csv(const std::string& path, const Dataset& ds);

}  // namespace stabcp
