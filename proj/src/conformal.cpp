#include "stabcp/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stabcp/errors.hpp"
#include "stabcp/rng.hpp"

namespace stabcp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_problem(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& test_X,
                   double alpha) {
    if (X.rows() == 0) throw DataError("conformal: empty training set");
    if (y.size() != X.rows()) throw DataError("conformal: feature rows and responses disagree");
    if (test_X.cols() != X.cols()) throw DataError("conformal: test feature width disagrees with training");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("conformal: miscoverage level must lie in (0, 1)");
}

Eigen::MatrixXd augment_rows(const Eigen::MatrixXd& X, const Eigen::RowVectorXd& x) {
    Eigen::MatrixXd out(X.rows() + 1, X.cols());
    out.topRows(X.rows()) = X;
    out.row(X.rows()) = x;
    return out;
}

Eigen::VectorXd augment(const Eigen::VectorXd& y, double v) {
    Eigen::VectorXd out(y.size() + 1);
    out.head(y.size()) = y;
    out(y.size()) = v;
    return out;
}

}  // namespace

bool IntervalUnion::contains(double v) const noexcept {
    for (const auto& p : parts)
        if (p.contains(v)) return true;
    return false;
}

double IntervalUnion::total_length() const noexcept {
    double s = 0.0;
    for (const auto& p : parts) s += p.length();
    return s;
}

PredictionInterval IntervalUnion::hull() const {
    if (parts.empty()) throw DataError("interval union: hull of an empty set");
    return {parts.front().lo, parts.back().hi};
}

PredictionInterval interval_from_score_bound(ScoreKind kind, double center, double bound) {
    switch (kind) {
        case ScoreKind::AbsoluteResidual:
            return {center - bound, center + bound};
        case ScoreKind::SignedResidual:
            return {-kInf, center + bound};
        case ScoreKind::Clip:
            return {-kInf, (center + bound) / 100.0};
    }
    throw DataError("interval_from_score_bound: unknown score family");
}

std::vector<PredictionInterval> loo_stabcp(const Trainer& trainer, const Eigen::MatrixXd& X,
                                           const Eigen::VectorXd& y, const Eigen::MatrixXd& test_X,
                                           double alpha, ScoreKind kind) {
    check_problem(X, y, test_X, alpha);
    const Predictor f = trainer.fit(X, y);
    const Eigen::VectorXd scores = score(kind, y, f(X));
    const Eigen::VectorXd centers = f(test_X);
    const StabilityModel model = trainer.stability(X, y, test_X, score_gamma(kind));
    if (!model.loo) throw NumericError("loo_stabcp: trainer provides no leave-one-out bound");

    std::vector<PredictionInterval> out;
    out.reserve(static_cast<std::size_t>(test_X.rows()));
    for (Eigen::Index j = 0; j < test_X.rows(); ++j) {
        const StabilityBounds b = model.loo(j);
        const double q = conformal_quantile(scores + b.tau_train, alpha);
        out.push_back(interval_from_score_bound(kind, centers(j), q + b.tau_test));
    }
    return out;
}

std::vector<PredictionInterval> ro_stabcp(const Trainer& trainer, const Eigen::MatrixXd& X,
                                          const Eigen::VectorXd& y, const Eigen::MatrixXd& test_X,
                                          double alpha, ScoreKind kind, const Eigen::VectorXd* guesses,
                                          Eigen::VectorXd* guesses_out) {
    check_problem(X, y, test_X, alpha);
    const Eigen::Index n = X.rows();
    const Eigen::Index m = test_X.rows();

    Eigen::VectorXd guess;
    if (guesses) {
        if (guesses->size() != m) throw DataError("ro_stabcp: one guessed response per test point required");
        guess = *guesses;
    } else {
        const Predictor base = trainer.fit(X, y);
        guess = base(test_X);
    }
    if (guesses_out) *guesses_out = guess;
    const StabilityModel model = trainer.stability(X, y, test_X, score_gamma(kind));
    if (!model.ro) throw NumericError("ro_stabcp: trainer provides no replace-one bound");

    std::vector<PredictionInterval> out;
    out.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j) {
        const Eigen::MatrixXd Xa = augment_rows(X, test_X.row(j));
        const Eigen::VectorXd ya = augment(y, guess(j));
        const Predictor fj = trainer.fit(Xa, ya);
        const Eigen::VectorXd preds = fj(Xa);
        const Eigen::VectorXd scores = score(kind, y, preds.head(n));
        const StabilityBounds b = model.ro(j);
        const double q = conformal_quantile(scores + b.tau_train, alpha);
        out.push_back(interval_from_score_bound(kind, preds(n), q + b.tau_test));
    }
    return out;
}

SplitResult split_cp(const Trainer& trainer, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const Eigen::MatrixXd& test_X, double alpha, ScoreKind kind, double train_fraction,
                     std::uint64_t seed) {
    check_problem(X, y, test_X, alpha);
    const Eigen::Index n = X.rows();
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw DataError("split_cp: train fraction must lie in (0, 1)");
    const auto order = keyed_permutation(seed, 0, n);
    const Eigen::Index n_train = static_cast<Eigen::Index>(
        std::ceil(train_fraction * static_cast<double>(n)));
    if (n_train < 1 || n_train >= n)
        throw DataError("split_cp: split leaves an empty training or calibration part");

    SplitResult res;
    res.train_rows.assign(order.begin(), order.begin() + n_train);
    res.calib_rows.assign(order.begin() + n_train, order.end());

    Eigen::MatrixXd Xtr(n_train, X.cols()), Xcal(n - n_train, X.cols());
    Eigen::VectorXd ytr(n_train), ycal(n - n_train);
    for (Eigen::Index i = 0; i < n_train; ++i) {
        Xtr.row(i) = X.row(res.train_rows[static_cast<std::size_t>(i)]);
        ytr(i) = y(res.train_rows[static_cast<std::size_t>(i)]);
    }
    for (Eigen::Index i = 0; i < n - n_train; ++i) {
        Xcal.row(i) = X.row(res.calib_rows[static_cast<std::size_t>(i)]);
        ycal(i) = y(res.calib_rows[static_cast<std::size_t>(i)]);
    }

    const Predictor f = trainer.fit(Xtr, ytr);
    const double q = conformal_quantile(score(kind, ycal, f(Xcal)), alpha);
    const Eigen::VectorXd centers = f(test_X);
    res.intervals.reserve(static_cast<std::size_t>(test_X.rows()));
    for (Eigen::Index j = 0; j < test_X.rows(); ++j)
        res.intervals.push_back(interval_from_score_bound(kind, centers(j), q));
    return res;
}

GridSpec default_grid(const Eigen::VectorXd& y, Eigen::Index points) {
    if (y.size() == 0) throw DataError("default_grid: empty response vector");
    const double mean = y.mean();
    const double sd = std::sqrt((y.array() - mean).square().mean());
    return {y.minCoeff() - 3.0 * sd, y.maxCoeff() + 3.0 * sd, points};
}

std::vector<IntervalUnion> full_cp(const Trainer& trainer, const Eigen::MatrixXd& X,
                                   const Eigen::VectorXd& y, const Eigen::MatrixXd& test_X, double alpha,
                                   ScoreKind kind, const std::optional<GridSpec>& grid) {
    check_problem(X, y, test_X, alpha);
    const GridSpec g = grid ? *grid : default_grid(y);
    if (g.points < 2 || !(g.lo < g.hi)) throw DataError("full_cp: response grid is degenerate");
    const Eigen::Index n = X.rows();
    const Eigen::VectorXd values =
        Eigen::VectorXd::LinSpaced(g.points, g.lo, g.hi);

    std::vector<IntervalUnion> out(static_cast<std::size_t>(test_X.rows()));
    for (Eigen::Index j = 0; j < test_X.rows(); ++j) {
        const Eigen::MatrixXd Xa = augment_rows(X, test_X.row(j));
        std::vector<char> accepted(static_cast<std::size_t>(g.points), 0);
        for (Eigen::Index t = 0; t < g.points; ++t) {
            const Eigen::VectorXd ya = augment(y, values(t));
            const Predictor ft = trainer.fit(Xa, ya);
            const Eigen::VectorXd preds = ft(Xa);
            const Eigen::VectorXd train_scores = score(kind, y, preds.head(n));
            const double test_score = score(kind, values(t), preds(n));
            accepted[static_cast<std::size_t>(t)] =
                test_score <= conformal_quantile(train_scores, alpha) ? 1 : 0;
        }
        IntervalUnion& u = out[static_cast<std::size_t>(j)];
        Eigen::Index t = 0;
        while (t < g.points) {
            if (!accepted[static_cast<std::size_t>(t)]) {
                ++t;
                continue;
            }
            Eigen::Index e = t;
            while (e + 1 < g.points && accepted[static_cast<std::size_t>(e + 1)]) ++e;
            u.parts.push_back({values(t), values(e)});
            t = e + 1;
        }
    }
    return out;
}

std::vector<PredictionInterval> oracle_cp(const Trainer& trainer, const Eigen::MatrixXd& X,
                                          const Eigen::VectorXd& y, const Eigen::MatrixXd& test_X,
                                          const Eigen::VectorXd& test_y, double alpha, ScoreKind kind) {
    check_problem(X, y, test_X, alpha);
    if (test_y.size() != test_X.rows())
        throw DataError("oracle_cp: one actual response per test point required");

    std::vector<PredictionInterval> out;
    out.reserve(static_cast<std::size_t>(test_X.rows()));
    for (Eigen::Index j = 0; j < test_X.rows(); ++j) {
        const Eigen::MatrixXd Xa = augment_rows(X, test_X.row(j));
        const Eigen::VectorXd ya = augment(y, test_y(j));
        const Predictor fj = trainer.fit(Xa, ya);
        const Eigen::VectorXd preds = fj(Xa);
        // All n+1 scores, the test point's own included: no sentinel here.
        const double q = lower_quantile(score(kind, ya, preds), 1.0 - alpha);
        out.push_back(interval_from_score_bound(kind, preds(preds.size() - 1), q));
    }
    return out;
}

std::vector<IntervalUnion> mm_split_cp(const Trainer& trainer, const Eigen::MatrixXd& X,
                                       const Eigen::VectorXd& y, const Eigen::MatrixXd& test_X,
                                       double alpha, ScoreKind kind, int n_splits, double train_fraction,
                                       std::uint64_t seed) {
    check_problem(X, y, test_X, alpha);
    if (n_splits < 1) throw DataError("mm_split_cp: need at least one split");

    const Eigen::Index m = test_X.rows();
    std::vector<std::vector<PredictionInterval>> per_split;
    per_split.reserve(static_cast<std::size_t>(n_splits));
    for (int k = 0; k < n_splits; ++k) {
        per_split.push_back(split_cp(trainer, X, y, test_X, alpha / 2.0, kind, train_fraction,
                                     derive_seed(seed, static_cast<std::uint64_t>(k)))
                                .intervals);
    }

    std::vector<IntervalUnion> out(static_cast<std::size_t>(m));
    struct Event {
        double x;
        int delta;  // +1 opens an interval, -1 closes it
    };
    for (Eigen::Index j = 0; j < m; ++j) {
        std::vector<Event> events;
        events.reserve(2 * static_cast<std::size_t>(n_splits));
        for (const auto& iv : per_split) {
            events.push_back({iv[static_cast<std::size_t>(j)].lo, +1});
            events.push_back({iv[static_cast<std::size_t>(j)].hi, -1});
        }
        // Openings sort before closings at equal coordinates so touching
        // intervals count as overlapping there.
        std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
            if (a.x != b.x) return a.x < b.x;
            return a.delta > b.delta;
        });
        int count = 0;
        bool in = false;
        double open = 0.0;
        for (const Event& ev : events) {
            count += ev.delta;
            if (!in && 2 * count > n_splits) {
                open = ev.x;
                in = true;
            } else if (in && 2 * count <= n_splits) {
                out[static_cast<std::size_t>(j)].parts.push_back({open, ev.x});
                in = false;
            }
        }
    }
    return out;
}

namespace {

std::vector<IntervalUnion> to_unions(const std::vector<PredictionInterval>& ivs) {
    std::vector<IntervalUnion> out(ivs.size());
    for (std::size_t i = 0; i < ivs.size(); ++i) out[i].parts.push_back(ivs[i]);
    return out;
}

}  // namespace

std::vector<IntervalUnion> run_conformal(const Trainer& trainer, const Eigen::MatrixXd& X,
                                         const Eigen::VectorXd& y, const Eigen::MatrixXd& test_X,
                                         const CpConfig& cfg, ScoreKind kind,
                                         const Eigen::VectorXd* test_y) {
    switch (cfg.method) {
        case CpMethod::LooStab:
            return to_unions(loo_stabcp(trainer, X, y, test_X, cfg.alpha, kind));
        case CpMethod::RoStab:
            return to_unions(ro_stabcp(trainer, X, y, test_X, cfg.alpha, kind));
        case CpMethod::Split:
            return to_unions(
                split_cp(trainer, X, y, test_X, cfg.alpha, kind, cfg.split_fraction, cfg.split_seed)
                    .intervals);
        case CpMethod::Full:
            return full_cp(trainer, X, y, test_X, cfg.alpha, kind, cfg.grid);
        case CpMethod::Oracle:
            if (!test_y) throw DataError("run_conformal: the oracle method needs the actual test responses");
            return to_unions(oracle_cp(trainer, X, y, test_X, *test_y, cfg.alpha, kind));
        case CpMethod::MmSplit:
            return mm_split_cp(trainer, X, y, test_X, cfg.alpha, kind, cfg.n_splits, cfg.split_fraction,
                               cfg.split_seed);
    }
    throw DataError("run_conformal: unknown method");
}

}  // namespace stabcp
