#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "stabcp/core.hpp"
#include "stabcp/rng.hpp"

#include "oracles.hpp"

using namespace stabcp;

namespace {
const double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("score families evaluate their defining formulas") {
    CHECK(score(ScoreKind::AbsoluteResidual, 3.0, 5.0) == doctest::Approx(2.0));
    CHECK(score(ScoreKind::AbsoluteResidual, 5.0, 3.0) == doctest::Approx(2.0));
    CHECK(score(ScoreKind::SignedResidual, 3.0, 5.0) == doctest::Approx(-2.0));
    CHECK(score(ScoreKind::Clip, 1.0, 40.0) == doctest::Approx(60.0));
    CHECK(score(ScoreKind::Clip, 0.0, -2.5) == doctest::Approx(2.5));
}

TEST_CASE("vector scores match the scalar form elementwise") {
    Eigen::VectorXd y(3), z(3);
    y << 1.0, -2.0, 0.5;
    z << 0.0, 3.0, 0.5;
    for (ScoreKind kind : {ScoreKind::AbsoluteResidual, ScoreKind::SignedResidual, ScoreKind::Clip}) {
        const Eigen::VectorXd s = score(kind, y, z);
        REQUIRE(s.size() == 3);
        for (Eigen::Index i = 0; i < 3; ++i) CHECK(s[i] == score(kind, y[i], z[i]));
    }
    Eigen::VectorXd short_z(2);
    short_z << 0.0, 0.0;
    CHECK_THROWS_AS(score(ScoreKind::AbsoluteResidual, y, short_z), std::invalid_argument);
}

TEST_CASE("every score family is 1-Lipschitz in the prediction") {
    Rng rng(7);
    for (ScoreKind kind : {ScoreKind::AbsoluteResidual, ScoreKind::SignedResidual, ScoreKind::Clip}) {
        CHECK(score_gamma(kind) == 1.0);
        for (int t = 0; t < 200; ++t) {
            const double y = 3.0 * rng.normal();
            const double z1 = 3.0 * rng.normal();
            const double z2 = 3.0 * rng.normal();
            CHECK(std::abs(score(kind, y, z1) - score(kind, y, z2)) <= std::abs(z1 - z2) + 1e-12);
        }
    }
}

TEST_CASE("lower quantile picks the ceil(p*N)-th smallest value") {
    const std::vector<double> v{5.0, 1.0, 4.0, 2.0, 3.0};
    CHECK(lower_quantile(v, 0.9) == 5.0);  // ceil(4.5) = 5th smallest
    CHECK(lower_quantile(v, 0.2) == 1.0);
    CHECK(lower_quantile(v, 0.21) == 2.0);
    CHECK(lower_quantile(v, 1.0) == 5.0);
    CHECK(lower_quantile(std::vector<double>{7.0}, 0.5) == 7.0);
}

TEST_CASE("lower quantile agrees with a sort-based brute force") {
    Rng rng(11);
    for (int t = 0; t < 300; ++t) {
        const int n = 1 + static_cast<int>(rng.integer(80));
        std::vector<double> v(static_cast<std::size_t>(n));
        for (auto& x : v) x = rng.normal();
        double p = rng.uniform();
        if (p == 0.0) p = 0.5;
        CHECK(lower_quantile(v, p) == testutil::sorted_lower_quantile(v, p));
    }
}

TEST_CASE("infinite entries sort last in the lower quantile") {
    const std::vector<double> v{1.0, 2.0, kInf};
    CHECK(lower_quantile(v, 1.0) == kInf);
    CHECK(lower_quantile(v, 2.0 / 3.0) == 2.0);
}

TEST_CASE("lower quantile rejects unusable inputs") {
    CHECK_THROWS_AS(lower_quantile(std::vector<double>{}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(lower_quantile(std::vector<double>{1.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(lower_quantile(std::vector<double>{1.0}, 1.1), std::invalid_argument);
    CHECK_THROWS_AS(lower_quantile(std::vector<double>{std::nan("")}, 0.5), std::invalid_argument);
}

TEST_CASE("calibration quantile appends one infinite sentinel") {
    Eigen::VectorXd s(4);
    s << 0.3, 0.1, 0.7, 0.5;
    // 1 - alpha = 0.8 over five values: ceil(4) = 4th smallest of {.1,.3,.5,.7,inf}.
    CHECK(conformal_quantile(s, 0.2) == 0.7);

    Eigen::VectorXd tiny(3);
    tiny << 1.0, 2.0, 3.0;
    CHECK(conformal_quantile(tiny, 0.1) == kInf);  // ceil(0.9*4) = 4th = sentinel
    CHECK(conformal_quantile(tiny, 0.5) == 2.0);
    CHECK(conformal_quantile(tiny, 0.0) == kInf);

    CHECK_THROWS_AS(conformal_quantile(tiny, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(conformal_quantile(tiny, -0.1), std::invalid_argument);
}

TEST_CASE("calibration quantile equals the sentinel-augmented brute force") {
    Rng rng(13);
    for (int t = 0; t < 200; ++t) {
        const int n = 1 + static_cast<int>(rng.integer(40));
        Eigen::VectorXd s(n);
        for (Eigen::Index i = 0; i < n; ++i) s[i] = rng.normal();
        const double alpha = 0.01 + 0.98 * rng.uniform();
        std::vector<double> v(s.data(), s.data() + n);
        v.push_back(kInf);
        CHECK(conformal_quantile(s, alpha) == testutil::sorted_lower_quantile(v, 1.0 - alpha));
    }
}

TEST_CASE("derived seeds and permutation keys are stable and decorrelated") {
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));

    // Keys depend only on (seed, epoch, index), never on the set size.
    CHECK(permutation_key(9, 4, 17) == permutation_key(9, 4, 17));
    CHECK(permutation_key(9, 4, 17) != permutation_key(9, 5, 17));
}

TEST_CASE("keyed permutations are permutations and restrict under deletion of the last index") {
    for (Eigen::Index n : {1, 2, 5, 23}) {
        const auto perm = keyed_permutation(42, 3, n);
        std::vector<bool> seen(static_cast<std::size_t>(n), false);
        for (auto i : perm) {
            REQUIRE(i >= 0);
            REQUIRE(i < n);
            CHECK(!seen[static_cast<std::size_t>(i)]);
            seen[static_cast<std::size_t>(i)] = true;
        }
    }
    // Dropping index n from the (n+1)-point shuffle yields the n-point shuffle.
    const auto big = keyed_permutation(7, 2, 12);
    const auto small = keyed_permutation(7, 2, 11);
    std::vector<Eigen::Index> filtered;
    for (auto i : big)
        if (i != 11) filtered.push_back(i);
    CHECK(filtered == small);
}

TEST_CASE("the deterministic generator replays exactly and fills matrices row-major") {
    Rng a(123), b(123);
    for (int t = 0; t < 50; ++t) CHECK(a.normal() == b.normal());
    Rng c(123);
    const Eigen::MatrixXd m = c.normal_matrix(3, 2);
    Rng d(123);
    CHECK(m(0, 0) == d.normal());
    CHECK(m(0, 1) == d.normal());
    CHECK(m(1, 0) == d.normal());

    Rng e(5);
    for (int t = 0; t < 1000; ++t) {
        const double u = e.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(e.integer(7) < 7);
    }
}
