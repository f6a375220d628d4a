#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "stabcp/conformal.hpp"
#include "stabcp/errors.hpp"
#include "stabcp/rng.hpp"

#include "oracles.hpp"

using namespace stabcp;
using testutil::ConstantTrainer;
using testutil::MemorizingTrainer;

namespace {
const double kInf = std::numeric_limits<double>::infinity();

struct Problem {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::MatrixXd T;
    Eigen::VectorXd ty;
};

Problem gaussian_problem(Eigen::Index n, Eigen::Index d, Eigen::Index m, std::uint64_t seed) {
    Rng rng(seed);
    Problem p;
    p.X = rng.normal_matrix(n, d);
    p.T = rng.normal_matrix(m, d);
    const Eigen::VectorXd beta = rng.normal_vector(d);
    p.y = p.X * beta + 0.3 * rng.normal_vector(n);
    p.ty = p.T * beta + 0.3 * rng.normal_vector(m);
    return p;
}

}  // namespace

TEST_CASE("score-bound inversion matches each family's geometry") {
    const PredictionInterval abs = interval_from_score_bound(ScoreKind::AbsoluteResidual, 2.0, 1.5);
    CHECK(abs.lo == doctest::Approx(0.5));
    CHECK(abs.hi == doctest::Approx(3.5));

    const PredictionInterval sgn = interval_from_score_bound(ScoreKind::SignedResidual, 2.0, 1.5);
    CHECK(sgn.lo == -kInf);
    CHECK(sgn.hi == doctest::Approx(3.5));

    const PredictionInterval clip = interval_from_score_bound(ScoreKind::Clip, 2.0, 1.5);
    CHECK(clip.lo == -kInf);
    CHECK(clip.hi == doctest::Approx(0.035));

    CHECK(abs.contains(0.5));
    CHECK(abs.contains(3.5));
    CHECK(!abs.contains(3.50001));
    CHECK(abs.length() == doctest::Approx(3.0));
    CHECK(sgn.contains(-1e12));
}

TEST_CASE("interval unions account their parts and expose the spanning hull") {
    IntervalUnion u;
    u.parts = {{0.0, 1.0}, {2.0, 2.5}};
    CHECK(u.contains(0.5));
    CHECK(!u.contains(1.5));
    CHECK(u.contains(2.5));
    CHECK(u.total_length() == doctest::Approx(1.5));
    CHECK(u.hull().lo == 0.0);
    CHECK(u.hull().hi == 2.5);
    CHECK(!u.empty());

    IntervalUnion empty;
    CHECK(empty.empty());
    CHECK(!empty.contains(0.0));
    CHECK(empty.total_length() == 0.0);
    CHECK_THROWS_AS(empty.hull(), DataError);
}

TEST_CASE("single-fit stability intervals reduce to plain calibration at zero bounds") {
    // Constant predictor at 0, scores {1, 2, 3}; alpha = 0.5 picks 2.
    Eigen::MatrixXd X(3, 1);
    X << 0.0, 1.0, 2.0;
    Eigen::VectorXd y(3);
    y << 1.0, -2.0, 3.0;
    Eigen::MatrixXd T(2, 1);
    T << 5.0, -5.0;

    const ConstantTrainer trainer(0.0, 0.0, 0.0);
    const auto iv = loo_stabcp(trainer, X, y, T, 0.5, ScoreKind::AbsoluteResidual);
    REQUIRE(iv.size() == 2);
    for (const auto& i : iv) {
        CHECK(i.lo == doctest::Approx(-2.0));
        CHECK(i.hi == doctest::Approx(2.0));
    }
}

TEST_CASE("single-fit stability intervals widen by exactly the configured bounds") {
    Eigen::MatrixXd X(3, 1);
    X << 0.0, 1.0, 2.0;
    Eigen::VectorXd y(3);
    y << 1.0, -2.0, 3.0;
    Eigen::MatrixXd T(1, 1);
    T << 5.0;

    // Train-side bounds shift the calibration scores, the test-side bound
    // pads the radius: quantile({1.25, 2.25, 3.25, inf}, 0.5) + 0.5.
    const ConstantTrainer trainer(0.0, 0.25, 0.5);
    const auto iv = loo_stabcp(trainer, X, y, T, 0.5, ScoreKind::AbsoluteResidual);
    CHECK(iv[0].hi == doctest::Approx(2.75));
    CHECK(iv[0].lo == doctest::Approx(-2.75));
}

TEST_CASE("one calibration point at strict alpha yields the infinite interval, not an error") {
    Eigen::MatrixXd X(1, 1);
    X << 0.0;
    Eigen::VectorXd y(1);
    y << 1.0;
    Eigen::MatrixXd T(1, 1);
    T << 2.0;
    const ConstantTrainer trainer(0.0, 0.0, 0.0);
    const auto iv = loo_stabcp(trainer, X, y, T, 0.1, ScoreKind::AbsoluteResidual);
    CHECK(iv[0].lo == -kInf);
    CHECK(iv[0].hi == kInf);
}

TEST_CASE("swap-side intervals record their guesses and accept externally chosen ones") {
    const Problem p = gaussian_problem(20, 2, 3, 50);
    RlmConfig cfg;
    const RlmTrainer trainer(1.0, cfg);

    FitCounter counter;
    trainer.set_counter(&counter);
    Eigen::VectorXd guesses_used;
    const auto iv =
        ro_stabcp(trainer, p.X, p.y, p.T, 0.1, ScoreKind::AbsoluteResidual, nullptr, &guesses_used);
    CHECK(counter.count() == 4);  // one base fit + one refit per test point
    REQUIRE(guesses_used.size() == 3);

    // The guesses are the base fit's predictions.
    FitCounter single;
    trainer.set_counter(&single);
    const Predictor base = trainer.fit(p.X, p.y);
    CHECK((guesses_used - base(p.T)).norm() < 1e-12);

    // Supplying guesses skips the base fit and replays identically.
    FitCounter replay;
    trainer.set_counter(&replay);
    const auto iv2 = ro_stabcp(trainer, p.X, p.y, p.T, 0.1, ScoreKind::AbsoluteResidual, &guesses_used);
    CHECK(replay.count() == 3);
    for (std::size_t j = 0; j < iv.size(); ++j) {
        CHECK(iv2[j].lo == doctest::Approx(iv[j].lo).epsilon(1e-12));
        CHECK(iv2[j].hi == doctest::Approx(iv[j].hi).epsilon(1e-12));
    }
    trainer.set_counter(nullptr);
}

TEST_CASE("sample-split intervals use a seeded fold and share one half-width") {
    const Problem p = gaussian_problem(21, 2, 4, 51);
    const RlmTrainer trainer(1.0, RlmConfig{});

    // alpha = 0.3 keeps the quantile off the sentinel for 6 calibration rows.
    FitCounter counter;
    trainer.set_counter(&counter);
    const SplitResult r = split_cp(trainer, p.X, p.y, p.T, 0.3, ScoreKind::AbsoluteResidual, 0.7, 9);
    trainer.set_counter(nullptr);
    CHECK(counter.count() == 1);

    CHECK(r.train_rows.size() == 15);  // ceil(0.7 * 21)
    CHECK(r.calib_rows.size() == 6);
    std::vector<bool> seen(21, false);
    for (auto i : r.train_rows) seen[static_cast<std::size_t>(i)] = true;
    for (auto i : r.calib_rows) {
        CHECK(!seen[static_cast<std::size_t>(i)]);
        seen[static_cast<std::size_t>(i)] = true;
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));

    REQUIRE(r.intervals.size() == 4);
    const double w = r.intervals[0].length();
    for (const auto& iv : r.intervals) CHECK(iv.length() == doctest::Approx(w));

    // Same seed replays; another seed may move the fold.
    const SplitResult again = split_cp(trainer, p.X, p.y, p.T, 0.3, ScoreKind::AbsoluteResidual, 0.7, 9);
    CHECK(again.train_rows == r.train_rows);
    CHECK(again.intervals[0].hi == r.intervals[0].hi);
}

TEST_CASE("sample-split calibration matches a by-hand quantile on the reported fold") {
    Eigen::MatrixXd X(4, 1);
    X << 0.0, 1.0, 2.0, 3.0;
    Eigen::VectorXd y(4);
    y << 1.0, -2.0, 3.0, 0.5;
    Eigen::MatrixXd T(1, 1);
    T << 9.0;
    const ConstantTrainer trainer(0.0, 0.0, 0.0);
    const SplitResult r = split_cp(trainer, X, y, T, 0.5, ScoreKind::AbsoluteResidual, 0.25, 3);
    REQUIRE(r.calib_rows.size() == 3);
    Eigen::VectorXd calib(3);
    for (std::size_t k = 0; k < 3; ++k) calib[static_cast<Eigen::Index>(k)] = std::abs(y[r.calib_rows[k]]);
    CHECK(r.intervals[0].hi == doctest::Approx(conformal_quantile(calib, 0.5)));
}

TEST_CASE("grid-refit conformal accepts exactly the closed-form set for a constant predictor") {
    Eigen::MatrixXd X(5, 1);
    X << 0.0, 1.0, 2.0, 3.0, 4.0;
    Eigen::VectorXd y(5);
    y << 0.5, -1.0, 2.0, 1.5, -0.5;
    Eigen::MatrixXd T(1, 1);
    T << 2.5;

    const ConstantTrainer trainer(0.0, 0.0, 0.0);
    GridSpec grid{-4.0, 4.0, 81};  // step 0.1
    const double alpha = 0.4;
    const auto sets = full_cp(trainer, X, y, T, alpha, ScoreKind::AbsoluteResidual, grid);
    REQUIRE(sets.size() == 1);

    // Acceptance reduces to |y| <= Q_{1-alpha}(|Y_i| with sentinel).
    const double cut = conformal_quantile(y.cwiseAbs(), alpha);
    const Eigen::VectorXd values = Eigen::VectorXd::LinSpaced(81, -4.0, 4.0);
    for (Eigen::Index k = 0; k < 81; ++k) {
        CHECK(sets[0].contains(values[k]) == (std::abs(values[k]) <= cut));
    }
}

TEST_CASE("grid-refit conformal counts grid-times-test fits and defaults its grid from the responses") {
    const Problem p = gaussian_problem(8, 2, 2, 52);
    const RlmTrainer trainer(1.0, RlmConfig{});
    FitCounter counter;
    trainer.set_counter(&counter);
    GridSpec grid{-4.0, 4.0, 25};
    full_cp(trainer, p.X, p.y, p.T, 0.2, ScoreKind::AbsoluteResidual, grid);
    CHECK(counter.count() == 25 * 2);
    trainer.set_counter(nullptr);

    const GridSpec dflt = default_grid(p.y, 200);
    const double sd = std::sqrt((p.y.array() - p.y.mean()).square().mean());
    CHECK(dflt.lo == doctest::Approx(p.y.minCoeff() - 3.0 * sd));
    CHECK(dflt.hi == doctest::Approx(p.y.maxCoeff() + 3.0 * sd));
    CHECK(dflt.points == 200);
}

TEST_CASE("single-fit stability intervals contain the grid-refit set on matched instances") {
    for (std::uint64_t seed : {60, 61, 62}) {
        const Problem p = gaussian_problem(14, 2, 2, seed);
        RlmConfig cfg;
        cfg.grad_tol = 1e-10;
        const RlmTrainer trainer(1.0, cfg);
        GridSpec grid = default_grid(p.y, 60);
        const auto full = full_cp(trainer, p.X, p.y, p.T, 0.1, ScoreKind::AbsoluteResidual, grid);
        const auto loo = loo_stabcp(trainer, p.X, p.y, p.T, 0.1, ScoreKind::AbsoluteResidual);
        const auto ro = ro_stabcp(trainer, p.X, p.y, p.T, 0.1, ScoreKind::AbsoluteResidual);
        const Eigen::VectorXd values = Eigen::VectorXd::LinSpaced(grid.points, grid.lo, grid.hi);
        for (std::size_t j = 0; j < full.size(); ++j) {
            for (Eigen::Index k = 0; k < values.size(); ++k) {
                if (full[j].contains(values[k])) {
                    CHECK(loo[j].contains(values[k]));
                    CHECK(ro[j].contains(values[k]));
                }
            }
        }
    }
}

TEST_CASE("reference intervals use all augmented scores without a sentinel") {
    // Memorizer: every augmented fit interpolates, so all scores are zero
    // and the interval collapses onto the true response.
    Eigen::MatrixXd X(4, 1);
    X << 0.0, 1.0, 2.0, 3.0;
    Eigen::VectorXd y(4);
    y << 5.0, 6.0, 7.0, 8.0;
    Eigen::MatrixXd T(2, 1);
    T << 10.0, -4.0;
    Eigen::VectorXd ty(2);
    ty << 42.0, -7.0;

    const MemorizingTrainer trainer;
    FitCounter counter;
    trainer.set_counter(&counter);
    const auto iv = oracle_cp(trainer, X, y, T, ty, 0.1, ScoreKind::AbsoluteResidual);
    trainer.set_counter(nullptr);
    CHECK(counter.count() == 2);  // one augmented fit per test point
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(iv[j].length() == doctest::Approx(0.0));
        CHECK(iv[j].contains(ty[static_cast<Eigen::Index>(j)]));
    }
}

TEST_CASE("reference intervals match the swap-side method when handed the true responses with zero bounds") {
    Eigen::MatrixXd X(3, 1);
    X << 0.0, 1.0, 2.0;
    Eigen::VectorXd y(3);
    y << 1.0, 2.0, 3.0;
    Eigen::MatrixXd T(1, 1);
    T << 4.0;
    Eigen::VectorXd ty(1);
    ty << 2.5;

    const ConstantTrainer trainer(0.0, 0.0, 0.0);
    const auto oracle = oracle_cp(trainer, X, y, T, ty, 0.5, ScoreKind::AbsoluteResidual);
    const auto ro = ro_stabcp(trainer, X, y, T, 0.5, ScoreKind::AbsoluteResidual, &ty);
    // Train scores {1,2,3}; the test score 2.5 sits above the median, so
    // the chosen quantile element is the same with or without the sentinel.
    CHECK(oracle[0].lo == doctest::Approx(ro[0].lo));
    CHECK(oracle[0].hi == doctest::Approx(ro[0].hi));
}

TEST_CASE("majority-vote intervals with one split reduce to that split at half the level") {
    // 40 rows leave a 12-row calibration fold: finite quantiles at alpha/2 = 0.1.
    const Problem p = gaussian_problem(40, 2, 3, 53);
    const RlmTrainer trainer(1.0, RlmConfig{});
    const auto mm = mm_split_cp(trainer, p.X, p.y, p.T, 0.2, ScoreKind::AbsoluteResidual, 1, 0.7, 4);
    const SplitResult sp =
        split_cp(trainer, p.X, p.y, p.T, 0.1, ScoreKind::AbsoluteResidual, 0.7, derive_seed(4, 0));
    REQUIRE(mm.size() == 3);
    for (std::size_t j = 0; j < 3; ++j) {
        REQUIRE(mm[j].parts.size() == 1);
        CHECK(mm[j].parts[0].lo == doctest::Approx(sp.intervals[j].lo));
        CHECK(mm[j].parts[0].hi == doctest::Approx(sp.intervals[j].hi));
    }
}

TEST_CASE("majority-vote intervals agree with a dense-probe recount of their own splits") {
    const Problem p = gaussian_problem(40, 2, 2, 54);
    const RlmTrainer trainer(1.0, RlmConfig{});
    const int K = 5;
    const std::uint64_t seed = 17;
    const double alpha = 0.2;

    FitCounter counter;
    trainer.set_counter(&counter);
    const auto mm = mm_split_cp(trainer, p.X, p.y, p.T, alpha, ScoreKind::AbsoluteResidual, K, 0.7, seed);
    trainer.set_counter(nullptr);
    CHECK(counter.count() == K);

    std::vector<SplitResult> splits;
    for (int k = 0; k < K; ++k)
        splits.push_back(split_cp(trainer, p.X, p.y, p.T, alpha / 2.0, ScoreKind::AbsoluteResidual, 0.7,
                                  derive_seed(seed, static_cast<std::uint64_t>(k))));

    // Probe strictly inside/outside endpoint neighbourhoods to dodge ties.
    for (Eigen::Index j = 0; j < 2; ++j) {
        for (double v = -30.0; v <= 30.0; v += 0.37) {
            int votes = 0;
            for (const auto& s : splits)
                if (s.intervals[static_cast<std::size_t>(j)].contains(v)) ++votes;
            const bool majority = 2 * votes > K;
            CHECK(mm[static_cast<std::size_t>(j)].contains(v) == majority);
        }
    }
}

TEST_CASE("widening the miscoverage level never widens an interval") {
    const Problem p = gaussian_problem(40, 3, 5, 55);
    const RlmTrainer trainer(1.0, RlmConfig{});
    const auto tight = loo_stabcp(trainer, p.X, p.y, p.T, 0.05, ScoreKind::AbsoluteResidual);
    const auto loose = loo_stabcp(trainer, p.X, p.y, p.T, 0.3, ScoreKind::AbsoluteResidual);
    for (std::size_t j = 0; j < 5; ++j) CHECK(loose[j].length() <= tight[j].length() + 1e-12);
}

TEST_CASE("the method dispatcher normalizes every method to one set per test point") {
    const Problem p = gaussian_problem(16, 2, 3, 56);
    const RlmTrainer trainer(1.0, RlmConfig{});

    CpConfig cfg;
    cfg.alpha = 0.2;
    for (CpMethod m : {CpMethod::LooStab, CpMethod::RoStab, CpMethod::Split, CpMethod::MmSplit}) {
        cfg.method = m;
        const auto sets = run_conformal(trainer, p.X, p.y, p.T, cfg, ScoreKind::AbsoluteResidual);
        CHECK(sets.size() == 3);
    }
    cfg.method = CpMethod::Full;
    cfg.grid = GridSpec{-5.0, 5.0, 30};
    CHECK(run_conformal(trainer, p.X, p.y, p.T, cfg, ScoreKind::AbsoluteResidual).size() == 3);

    cfg.method = CpMethod::Oracle;
    CHECK_THROWS_AS(run_conformal(trainer, p.X, p.y, p.T, cfg, ScoreKind::AbsoluteResidual), DataError);
    const auto oracle = run_conformal(trainer, p.X, p.y, p.T, cfg, ScoreKind::AbsoluteResidual, &p.ty);
    CHECK(oracle.size() == 3);

    // The dispatcher result for the single-fit method matches the direct call.
    cfg.method = CpMethod::LooStab;
    const auto via = run_conformal(trainer, p.X, p.y, p.T, cfg, ScoreKind::AbsoluteResidual);
    const auto direct = loo_stabcp(trainer, p.X, p.y, p.T, cfg.alpha, ScoreKind::AbsoluteResidual);
    for (std::size_t j = 0; j < 3; ++j) {
        REQUIRE(via[j].parts.size() == 1);
        CHECK(via[j].parts[0].lo == doctest::Approx(direct[j].lo));
        CHECK(via[j].parts[0].hi == doctest::Approx(direct[j].hi));
    }
}

TEST_CASE("conformal routines reject malformed problems") {
    const Problem p = gaussian_problem(10, 2, 2, 57);
    const RlmTrainer trainer(1.0, RlmConfig{});
    Eigen::VectorXd short_y = p.y.head(5);
    CHECK_THROWS_AS(loo_stabcp(trainer, p.X, short_y, p.T, 0.1, ScoreKind::AbsoluteResidual), DataError);
    CHECK_THROWS_AS(loo_stabcp(trainer, p.X, p.y, p.T, 0.0, ScoreKind::AbsoluteResidual), DataError);
    CHECK_THROWS_AS(loo_stabcp(trainer, p.X, p.y, p.T, 1.0, ScoreKind::AbsoluteResidual), DataError);
    Eigen::MatrixXd wide(2, 5);
    wide.setZero();
    CHECK_THROWS_AS(loo_stabcp(trainer, p.X, p.y, wide, 0.1, ScoreKind::AbsoluteResidual), DataError);
}

TEST_CASE("signed scores produce one-sided prediction sets end to end") {
    const Problem p = gaussian_problem(18, 2, 2, 58);
    const RlmTrainer trainer(1.0, RlmConfig{});
    const auto iv = loo_stabcp(trainer, p.X, p.y, p.T, 0.2, ScoreKind::SignedResidual);
    for (const auto& i : iv) {
        CHECK(i.lo == -kInf);
        CHECK(std::isfinite(i.hi));
    }
}
