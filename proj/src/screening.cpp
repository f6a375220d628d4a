#include "stabcp/screening.hpp"

#include <algorithm>
#include <cmath>

#include "stabcp/conformal.hpp"
#include "stabcp/errors.hpp"
#include "stabcp/rng.hpp"

namespace stabcp {

namespace {

bool below(double a, double b, bool nonstrict) { return nonstrict ? a <= b : a < b; }

double counted_pvalue(const Eigen::VectorXd& scores, double cutoff, bool nonstrict) {
    Eigen::Index c = 0;
    for (Eigen::Index i = 0; i < scores.size(); ++i)
        if (below(scores(i), cutoff, nonstrict)) ++c;
    return static_cast<double>(c + 1) / static_cast<double>(scores.size() + 1);
}

}  // namespace

Eigen::VectorXd split_pvalues(const Eigen::VectorXd& calib_scores, const Eigen::VectorXd& test_scores,
                              bool nonstrict) {
    if (calib_scores.size() == 0) throw DataError("split_pvalues: empty calibration set");
    Eigen::VectorXd p(test_scores.size());
    for (Eigen::Index j = 0; j < test_scores.size(); ++j)
        p(j) = counted_pvalue(calib_scores, test_scores(j), nonstrict);
    return p;
}

double stability_pvalue(const Eigen::VectorXd& train_scores, double test_score,
                        const StabilityBounds& bounds, bool nonstrict) {
    if (bounds.tau_train.size() != train_scores.size())
        throw DataError("stability_pvalue: bound vector and scores disagree in length");
    Eigen::Index c = 0;
    for (Eigen::Index i = 0; i < train_scores.size(); ++i)
        if (below(train_scores(i) - bounds.tau_train(i), test_score + bounds.tau_test, nonstrict)) ++c;
    return static_cast<double>(c + 1) / static_cast<double>(train_scores.size() + 1);
}

Eigen::VectorXd loo_pvalues(const Eigen::VectorXd& train_scores, const Eigen::VectorXd& test_scores,
                            const std::vector<StabilityBounds>& bounds, bool nonstrict) {
    if (train_scores.size() == 0) throw DataError("loo_pvalues: empty training scores");
    if (bounds.size() != static_cast<std::size_t>(test_scores.size()))
        throw DataError("loo_pvalues: one bound per test point required");
    Eigen::VectorXd p(test_scores.size());
    for (Eigen::Index j = 0; j < test_scores.size(); ++j) {
        const StabilityBounds& b = bounds[static_cast<std::size_t>(j)];
        if (b.side != BoundSide::LeaveOneOut)
            throw DataError("loo_pvalues: bounds must be of the leave-one-out kind");
        p(j) = stability_pvalue(train_scores, test_scores(j), b, nonstrict);
    }
    return p;
}

Eigen::VectorXd ro_pvalues(const Eigen::MatrixXd& refit_scores, const Eigen::VectorXd& test_scores,
                           const std::vector<StabilityBounds>& bounds, bool nonstrict) {
    if (refit_scores.rows() != test_scores.size())
        throw DataError("ro_pvalues: one refit score row per test point required");
    if (bounds.size() != static_cast<std::size_t>(test_scores.size()))
        throw DataError("ro_pvalues: one bound per test point required");
    Eigen::VectorXd p(test_scores.size());
    for (Eigen::Index j = 0; j < test_scores.size(); ++j) {
        const StabilityBounds& b = bounds[static_cast<std::size_t>(j)];
        if (b.side != BoundSide::ReplaceOne)
            throw DataError("ro_pvalues: bounds must be of the replace-one kind");
        p(j) = stability_pvalue(refit_scores.row(j).transpose(), test_scores(j), b, nonstrict);
    }
    return p;
}

BhResult bh_procedure(const Eigen::VectorXd& p_values, double q, bool nonstrict) {
    const Eigen::Index m = p_values.size();
    if (m < 1) throw DataError("bh_procedure: empty p-value vector");
    if (!(q > 0.0 && q < 1.0)) throw DataError("bh_procedure: target level must lie in (0, 1)");

    BhResult res;
    for (Eigen::Index k = 1; k <= m; ++k) {
        const double cut = q * static_cast<double>(k) / static_cast<double>(m);
        Eigen::Index count = 0;
        for (Eigen::Index j = 0; j < m; ++j)
            if (p_values(j) <= cut) ++count;
        if (count >= k) res.k_star = static_cast<int>(k);
    }
    if (res.k_star > 0) {
        const double cut = q * static_cast<double>(res.k_star) / static_cast<double>(m);
        for (Eigen::Index j = 0; j < m; ++j)
            if (below(p_values(j), cut, nonstrict)) res.rejected.push_back(j);
    }
    return res;
}

ScreeningResult run_screening(const Trainer& trainer, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& test_X, const ScreeningConfig& cfg,
                              ScreeningMethod method, const Eigen::VectorXd* test_y) {
    const Eigen::Index n = X.rows();
    const Eigen::Index m = test_X.rows();
    if (n == 0 || y.size() != n) throw DataError("run_screening: bad training set");
    if (test_X.cols() != X.cols()) throw DataError("run_screening: test feature width disagrees");
    if (!(cfg.q > 0.0 && cfg.q < 1.0)) throw DataError("run_screening: target level must lie in (0, 1)");
    Eigen::VectorXd c = cfg.thresholds;
    if (c.size() == 0) c = Eigen::VectorXd::Zero(m);
    if (c.size() != m) throw DataError("run_screening: one cutoff per test point required");
    if (test_y && test_y->size() != m)
        throw DataError("run_screening: one actual response per test point required");
    const ScoreKind kind = cfg.score_kind;
    const double gamma = score_gamma(kind);

    ScreeningResult res;
    if (method == ScreeningMethod::CfBh) {
        const auto order = keyed_permutation(cfg.split_seed, 0, n);
        const Eigen::Index n_train =
            static_cast<Eigen::Index>(std::ceil(cfg.split_fraction * static_cast<double>(n)));
        if (n_train < 1 || n_train >= n) throw DataError("run_screening: split leaves an empty part");
        Eigen::MatrixXd Xtr(n_train, X.cols()), Xcal(n - n_train, X.cols());
        Eigen::VectorXd ytr(n_train), ycal(n - n_train);
        for (Eigen::Index i = 0; i < n_train; ++i) {
            Xtr.row(i) = X.row(order[static_cast<std::size_t>(i)]);
            ytr(i) = y(order[static_cast<std::size_t>(i)]);
        }
        for (Eigen::Index i = n_train; i < n; ++i) {
            Xcal.row(i - n_train) = X.row(order[static_cast<std::size_t>(i)]);
            ycal(i - n_train) = y(order[static_cast<std::size_t>(i)]);
        }
        const Predictor f = trainer.fit(Xtr, ytr);
        const Eigen::VectorXd calib_scores = score(kind, ycal, f(Xcal));
        const Eigen::VectorXd test_scores = score(kind, c, f(test_X));
        res.p_values = split_pvalues(calib_scores, test_scores, cfg.nonstrict);
    } else if (method == ScreeningMethod::LooCfBh) {
        const Predictor f = trainer.fit(X, y);
        const Eigen::VectorXd train_scores = score(kind, y, f(X));
        const Eigen::VectorXd test_scores = score(kind, c, f(test_X));
        const StabilityModel model = trainer.stability(X, y, test_X, gamma);
        if (!model.loo) throw NumericError("run_screening: trainer provides no leave-one-out bound");
        std::vector<StabilityBounds> bounds;
        bounds.reserve(static_cast<std::size_t>(m));
        for (Eigen::Index j = 0; j < m; ++j) bounds.push_back(model.loo(j));
        res.p_values = loo_pvalues(train_scores, test_scores, bounds, cfg.nonstrict);
    } else {
        const StabilityModel model = trainer.stability(X, y, test_X, gamma);
        if (!model.ro) throw NumericError("run_screening: trainer provides no replace-one bound");
        Eigen::MatrixXd refit_scores(m, n);
        Eigen::VectorXd test_scores(m);
        std::vector<StabilityBounds> bounds;
        bounds.reserve(static_cast<std::size_t>(m));
        for (Eigen::Index j = 0; j < m; ++j) {
            Eigen::MatrixXd Xa(n + 1, X.cols());
            Xa.topRows(n) = X;
            Xa.row(n) = test_X.row(j);
            Eigen::VectorXd ya(n + 1);
            ya.head(n) = y;
            ya(n) = c(j);  // refit under the cutoff as the hypothesized response
            const Predictor fj = trainer.fit(Xa, ya);
            const Eigen::VectorXd preds = fj(Xa);
            refit_scores.row(j) = score(kind, y, preds.head(n)).transpose();
            test_scores(j) = score(kind, c(j), preds(n));
            bounds.push_back(model.ro(j));
        }
        res.p_values = ro_pvalues(refit_scores, test_scores, bounds, cfg.nonstrict);
    }

    BhResult bh = bh_procedure(res.p_values, cfg.q, cfg.nonstrict);
    res.k_star = bh.k_star;
    res.rejected = std::move(bh.rejected);

    if (test_y) {
        Eigen::Index true_h1 = 0;
        for (Eigen::Index j = 0; j < m; ++j)
            if ((*test_y)(j) > c(j)) ++true_h1;
        Eigen::Index false_rej = 0, true_rej = 0;
        for (const Eigen::Index j : res.rejected) {
            if ((*test_y)(j) > c(j))
                ++true_rej;
            else
                ++false_rej;
        }
        const auto denom = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(res.rejected.size()));
        res.fdp = static_cast<double>(false_rej) / static_cast<double>(denom);
        if (true_h1 == 0) {
            res.power = 1.0;
            res.power_vacuous = true;
        } else {
            res.power = static_cast<double>(true_rej) / static_cast<double>(true_h1);
        }
    }
    return res;
}

}  // namespace stabcp
