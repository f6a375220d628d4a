#include "stabcp/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stabcp {

double score(ScoreKind kind, double y, double z) {
    switch (kind) {
        case ScoreKind::AbsoluteResidual: return std::abs(y - z);
        case ScoreKind::SignedResidual: return y - z;
        case ScoreKind::Clip: return 100.0 * y - z;
    }
    throw std::invalid_argument("score: unknown kind");
}

Eigen::VectorXd score(ScoreKind kind, const Eigen::VectorXd& y, const Eigen::VectorXd& z) {
    if (y.size() != z.size()) throw std::invalid_argument("score: y and z sizes differ");
    Eigen::VectorXd out(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = score(kind, y[i], z[i]);
    return out;
}

double score_gamma(ScoreKind) noexcept { return 1.0; }

double lower_quantile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("lower_quantile: empty sample");
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("lower_quantile: p must lie in (0, 1]");
    for (double v : values)
        if (std::isnan(v)) throw std::invalid_argument("lower_quantile: NaN in sample");
    const auto n = values.size();
    const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    auto nth = values.begin() + static_cast<std::ptrdiff_t>(k - 1);
    std::nth_element(values.begin(), nth, values.end());
    return *nth;
}

double lower_quantile(const Eigen::VectorXd& values, double p) {
    return lower_quantile(std::vector<double>(values.data(), values.data() + values.size()), p);
}

double conformal_quantile(const Eigen::VectorXd& scores, double alpha) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("conformal_quantile: alpha must lie in [0, 1)");
    std::vector<double> v(scores.data(), scores.data() + scores.size());
    v.push_back(std::numeric_limits<double>::infinity());
    return lower_quantile(std::move(v), 1.0 - alpha);
}

}  // namespace stabcp
