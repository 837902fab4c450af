#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mhm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

using namespace mhm;

TEST_CASE("spearman matches the tie-averaged reference value") {
    const std::vector<double> a = {3, 1, 4, 1, 5};
    const std::vector<double> b = {2, 7, 1, 8, 2};
    // frozen from an independent rank-correlation computation
    CHECK(spearman(a, b) == doctest::Approx(-0.7894736842105263).epsilon(1e-12));
}

TEST_CASE("spearman is 1 for any monotone map and -1 for a reversal") {
    const std::vector<double> a = {1, 2, 3, 4};
    const std::vector<double> up = {10, 100, 1000, 10000};
    const std::vector<double> down = {4, 3, 2, 1};
    CHECK(spearman(a, up) == doctest::Approx(1.0));
    CHECK(spearman(a, down) == doctest::Approx(-1.0));
}

TEST_CASE("spearman degenerate inputs yield NaN") {
    const std::vector<double> one = {1.0};
    CHECK(std::isnan(spearman(one, one)));
    const std::vector<double> flat = {2, 2, 2};
    const std::vector<double> var = {1, 2, 3};
    CHECK(std::isnan(spearman(flat, var)));
    CHECK_THROWS_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{1}),
                    std::invalid_argument);
}

TEST_CASE("ks_statistic against the uniform CDF, hand-computed") {
    const std::vector<double> s = {0.1, 0.4, 0.7};
    const auto unif = [](double x) { return x; };
    CHECK(ks_statistic(s, unif) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK_THROWS_AS(ks_statistic({}, unif), std::invalid_argument);
}

TEST_CASE("ks_statistic is near zero for a large exact-quantile sample") {
    std::vector<double> s;
    const int n = 1000;
    for (int i = 0; i < n; ++i) s.push_back((i + 0.5) / n);
    CHECK(ks_statistic(s, [](double x) { return x; }) == doctest::Approx(0.0005).epsilon(1e-9));
}

TEST_CASE("ks_critical_value uses the asymptotic constants") {
    CHECK(ks_critical_value(0.01, 10000) == doctest::Approx(1.62762 / 100.0));
    CHECK(ks_critical_value(0.05, 100) == doctest::Approx(1.35810 / 10.0));
    CHECK_THROWS_AS(ks_critical_value(0.2, 100), std::invalid_argument);
}

TEST_CASE("uniform draws pass KS at 1% and shifted draws fail") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> s;
    for (int i = 0; i < 10000; ++i) s.push_back(unif(rng));
    const double crit = ks_critical_value(0.01, s.size());
    CHECK(ks_statistic(s, [](double x) { return x; }) < crit);
    // a 2% location shift is far outside the band at n = 10^4
    CHECK(ks_statistic(s, [](double x) { return std::clamp(x + 0.02, 0.0, 1.0); }) > crit);
}
