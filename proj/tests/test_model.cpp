#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "cipw/model.hpp"
#include "cipw/synth.hpp"
#include "common.hpp"

using namespace cipw;

TEST_CASE("true_ate on the two-point confounded construction") {
    CHECK(true_ate(make_lem16()) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("true_ate is zero when the arms share means") {
    Rng rng(1);
    auto d = testutil::random_distribution(6, rng);
    d.mu1 = d.mu0;
    CHECK(std::abs(true_ate(d)) < 1e-15);
}

TEST_CASE("true_ate matches a Monte Carlo mean of Y(1) - Y(0)") {
    Rng rng(2);
    auto d = testutil::random_distribution(5, rng);
    // symmetric two-point outcomes around mu with spread sqrt(v)
    std::discrete_distribution<int> pick(d.mass.data(), d.mass.data() + 5);
    std::bernoulli_distribution coin(0.5);
    const long N = 1000000;
    double s = 0, s2 = 0;
    for (long i = 0; i < N; ++i) {
        int x = pick(rng);
        double y1 = d.mu1(x) + (coin(rng) ? 1 : -1) * std::sqrt(d.v1(x));
        double y0 = d.mu0(x) + (coin(rng) ? 1 : -1) * std::sqrt(d.v0(x));
        s += y1 - y0;
        s2 += (y1 - y0) * (y1 - y0);
    }
    double mean = s / N, se = std::sqrt((s2 / N - mean * mean) / N);
    CHECK(std::abs(mean - true_ate(d)) < 3 * se);
}

TEST_CASE("outlier_set") {
    SUBCASE("two low-propensity atoms of the ramp construction") {
        auto d = make_thm91({0.05, 0.02, 20, 10000});
        CHECK(outlier_set(true_scores(d), 1.0 / 9.0) == IdSet{1, 2});
    }
    SUBCASE("maximal overlap gives nothing") {
        auto s = testutil::scores({0.5, 0.5, 0.5});
        CHECK(outlier_set(s, 0.25).empty());
        CHECK(outlier_set(s, 0.01).empty());
    }
    SUBCASE("strict inequality") {
        auto s = testutil::scores({0.05, 0.5});
        CHECK(outlier_set(s, 0.05) == IdSet{0});
        // 0.5 * 0.5 = 0.25 is not below 0.25
        CHECK(outlier_set(testutil::scores({0.5}), 0.25).empty());
    }
    SUBCASE("beta range") {
        auto s = testutil::scores({0.3});
        CHECK_THROWS_AS(outlier_set(s, 0.0), ConfigError);
        CHECK_THROWS_AS(outlier_set(s, 0.3), ConfigError);
    }
    SUBCASE("restricted support") {
        auto s = testutil::scores({0.01, 0.5, 0.02});
        CHECK(outlier_set(s, IdSet{1, 2}, 0.1) == IdSet{2});
    }
}

TEST_CASE("coarse_propensity") {
    auto lem = make_lem16();
    CHECK(coarse_propensity(lem, {1}) == lem.e(1));
    CHECK(coarse_propensity(lem, {0, 1}) == doctest::Approx(0.5).epsilon(1e-15));
    auto p = make_prop92(0.25);
    CHECK(coarse_propensity(p, {0, 1}) == doctest::Approx(3.0 / 8.0).epsilon(1e-15));

    Eigen::VectorXd w(2);
    w << 1.0, 0.0;
    CHECK(coarse_propensity(p, {0, 1}, &w) == doctest::Approx(0.25));
    w.setZero();
    CHECK_THROWS_AS(coarse_propensity(p, {0, 1}, &w), DomainError);
}

TEST_CASE("set_mass and diameter") {
    auto d = make_thm91({0.05, 0.02, 20, 10000});
    CHECK(diameter(d, {3}) == 0.0);
    CHECK(diameter(d) == doctest::Approx(1.0));
    CHECK(set_mass(d, {}) == 0.0);
    CHECK(set_mass(d, {0, 3}) == doctest::Approx(0.98 * 0.5));
    CHECK_THROWS_AS(diameter(d, {}), DomainError);

    Eigen::MatrixXd pts(2, 1);
    pts << 0.0, 0.37;
    CHECK(diameter(pts, {0, 1}, Norm::Linf) == doctest::Approx(0.37));

    Eigen::MatrixXd q(2, 2);
    q << 0, 0, 3, 4;
    CHECK(diameter(q, {0, 1}, Norm::L1) == doctest::Approx(7));
    CHECK(diameter(q, {0, 1}, Norm::L2) == doctest::Approx(5));
    CHECK(diameter(q, {0, 1}, Norm::Linf) == doctest::Approx(4));
}

TEST_CASE("distribution validation") {
    auto d = make_lem16();
    validate(d);
    auto bad = d;
    bad.mass << 0.5, 0.6;
    CHECK_THROWS_AS(validate(bad), DataError);
    bad = d;
    bad.e(0) = 1.0;
    CHECK_THROWS_AS(validate(bad), DataError);
    bad = d;
    bad.points(1, 0) = 0.0;
    CHECK_THROWS_AS(validate(bad), DataError);
    bad = d;
    bad.v1(0) = 0.5;  // mu1 = 1 leaves no room for spread
    CHECK_THROWS_AS(check_feasible(bad), DataError);
    CHECK(moment_feasible(0.0, 1.0));
    CHECK(moment_feasible(0.5, 0.75));
    CHECK_FALSE(moment_feasible(0.5, 0.76));
}

TEST_CASE("partition validation and helpers") {
    Partition p{{{0, 2}, {1}}, {3}};
    validate(p, 4);
    CHECK_THROWS_AS(validate(p, 5), DataError);
    CHECK_THROWS_AS(validate(Partition{{{0, 1}, {1}}, {}}, 2), DataError);
    CHECK_THROWS_AS(validate(Partition{{{0}, {}}, {1}}, 2), DataError);
    auto of = membership(p, 4);
    CHECK(of == std::vector<int>{0, 1, 0, kNull});
    CHECK(singleton_partition(3).sets.size() == 3);
    CHECK(merged_partition(3).sets.size() == 1);

    auto fp = to_fractional(p, 4);
    validate(fp, 4);
    fp.weights[1] = {{1, 0.5}, {kNull, 0.5}};
    CHECK_THROWS_AS(validate(fp, 4), DataError);  // 1 is not listed in N
    fp.null_set.push_back(1);
    validate(fp, 4);
    fp.weights[1] = {{1, 0.5}, {kNull, 0.4}};
    CHECK_THROWS_AS(validate(fp, 4), DataError);
}

TEST_CASE("dataset ids") {
    CensoredDataset c;
    c.x.resize(4, 1);
    c.x << 0.5, 2.0, 0.5, 7.0;
    c.y = Eigen::VectorXd::Zero(4);
    c.t = Eigen::VectorXi::Zero(4);
    assign_ids(c);
    CHECK(c.id(0) == 0);
    CHECK(c.id(1) == 1);
    CHECK(c.id(2) == 0);
    CHECK(c.id(3) == 2);

    auto d = make_lem16();  // points 0 and 1
    c.x << 1.0, 0.0, 5.0, 1.0;
    attach_ids(c, d);
    CHECK(c.id(0) == 1);
    CHECK(c.id(1) == 0);
    CHECK(c.id(2) == 2);
    CHECK(c.id(3) == 1);
}

TEST_CASE("property: partition coverage and row stochasticity") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        Index m = 1 + Index(rng() % 9);
        auto part = testutil::random_partition(m, rng);
        validate(part, m);
        Index total = Index(part.null_set.size());
        std::vector<Index> all(part.null_set);
        for (auto& s : part.sets) {
            total += Index(s.size());
            all.insert(all.end(), s.begin(), s.end());
        }
        CHECK(total == m);
        std::sort(all.begin(), all.end());
        for (Index i = 0; i < m; ++i) CHECK(all[i] == i);
        auto fp = to_fractional(part, m);
        for (auto& row : fp.weights) {
            double sum = 0;
            for (auto& sh : row) sum += sh.w;
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("property: coarse score preserves the weighted score sum") {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        auto d = testutil::random_distribution(7, rng);
        auto part = testutil::random_partition(7, rng, 0.0);
        for (auto& s : part.sets) {
            double es = coarse_propensity(d, s);
            double direct = 0, flat = 0;
            for (Index x : s) {
                direct += d.mass(x) * d.e(x);
                flat += d.mass(x) * es;
            }
            CHECK(std::abs(direct - flat) < 1e-14);
        }
    }
}

TEST_CASE("property: outlier_set is monotone in beta") {
    Rng rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> v(10);
        for (auto& x : v) x = 0.001 + 0.998 * unit(rng);
        auto s = testutil::scores(v);
        double b1 = 0.25 * unit(rng) + 1e-6, b2 = 0.25 * unit(rng) + 1e-6;
        if (b1 > b2) std::swap(b1, b2);
        auto small = outlier_set(s, b1), big = outlier_set(s, b2);
        CHECK(std::includes(big.begin(), big.end(), small.begin(), small.end()));
    }
}
