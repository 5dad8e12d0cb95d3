#include "oracles.hpp"

#include "nullstrap/errors.hpp"
#include "nullstrap/filter.hpp"

#include <doctest.h>

#include <random>

using namespace nullstrap;

namespace {

StatisticPair pair_of(std::vector<std::optional<double>> observed, std::vector<std::optional<double>> null) {
    StatisticPair s;
    s.observed = std::move(observed);
    s.null = std::move(null);
    return s;
}

double fdp_from_curve(const FdpCurve& curve, double t) {
    for (std::size_t c = 0; c < curve.thresholds.size(); ++c) {
        if (curve.thresholds[c] == t) return curve.fdp[c];
    }
    FAIL("threshold not a candidate");
    return NAN;
}

const StatisticPair kWorked = pair_of({5.0, 4.0, 3.0, 2.0, 1.0}, {2.5, 0.5, 0.4, 0.3, 0.2});

} // namespace

TEST_CASE("worked example") {
    const auto curve = fdp_curve(kWorked);
    CHECK(fdp_from_curve(curve, 3.0) == 0.0);
    CHECK(fdp_from_curve(curve, 2.0) == 0.25);
    CHECK(fdp_from_curve(curve, 1.0) == 0.2);
    CHECK(select_threshold(curve, 0.25) == 1.0);
    CHECK(select_threshold(curve, 0.1) == 3.0);
    CHECK(declare_discoveries(kWorked, 1.0) == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(declare_discoveries(kWorked, 3.0) == std::vector<std::size_t>{0, 1});
    CHECK(curve.thresholds.size() == 11);
    CHECK(curve.sentinel() == 6.0);
}

TEST_CASE("curve is consistent with direct counting") {
    const auto curve = fdp_curve(kWorked);
    for (std::size_t c = 0; c < curve.thresholds.size(); ++c) {
        CHECK(curve.fdp[c] == oracle::fdp_at(kWorked.observed, kWorked.null, curve.thresholds[c]));
    }
    CHECK(curve.fdp.back() == 0.0);
}

TEST_CASE("finite-sample adjustment") {
    // Reference values from an independent double-precision evaluation.
    CHECK(adjust_q(0.1, 1000, 16) == doctest::Approx(0.06034765482942126).epsilon(1e-14));
    CHECK(adjust_q(0.05, 8, 2) == doctest::Approx(0.05 / 2.019666990168809).epsilon(1e-14));
    CHECK(adjust_q(0.05, 8, 2) < 0.05);
    CHECK(adjust_q(0.05, 8, 200) > adjust_q(0.05, 8, 2));
    CHECK_THROWS_AS(adjust_q(0.05, 1, 4), Error);
}

TEST_CASE("filter wrapper applies the adjustment") {
    const auto plain = nullstrap_filter(kWorked, 0.25, false, 10);
    CHECK_FALSE(plain.adjusted);
    CHECK(plain.tau == 1.0);
    CHECK(plain.n_tested == 5);
    const auto adj = nullstrap_filter(kWorked, 0.25, true, 10);
    CHECK(adj.adjusted);
    CHECK(adj.effective_q == doctest::Approx(adjust_q(0.25, 5, 10)));
    CHECK(adj.tau >= plain.tau);
    CHECK_THROWS_AS(nullstrap_filter(kWorked, 0.0, false, 10), Error);
    CHECK_THROWS_AS(nullstrap_filter(kWorked, 1.0, false, 10), Error);
}

TEST_CASE("no qualifying threshold below the sentinel") {
    // Every null value exceeds every observed value.
    const auto s = pair_of({1.0, 2.0}, {5.0, 6.0});
    const auto curve = fdp_curve(s);
    CHECK(select_threshold(curve, 0.1) == curve.sentinel());
    CHECK(nullstrap_filter(s, 0.1, false, 4).discoveries.empty());
}

TEST_CASE("missing statistics") {
    const auto s = pair_of({4.0, std::nullopt, 3.0, 1.0}, {std::nullopt, 9.0, 0.5, 0.2});
    const auto curve = fdp_curve(s);
    // Gene 1 is dropped entirely; gene 0's null counts as 0.
    CHECK(std::find(curve.thresholds.begin(), curve.thresholds.end(), 9.0) == curve.thresholds.end());
    CHECK(nullstrap_filter(s, 0.2, false, 4).n_tested == 3);
    for (std::size_t c = 0; c < curve.thresholds.size(); ++c) {
        CHECK(curve.fdp[c] == oracle::fdp_at(s.observed, s.null, curve.thresholds[c]));
    }
    CHECK_THROWS_AS(fdp_curve(pair_of({std::nullopt}, {1.0})), Error);
    CHECK_THROWS_AS(fdp_curve(pair_of({1.0, 2.0}, {1.0})), Error);
}

TEST_CASE("all-zero statistics leave only the sentinel") {
    const auto s = pair_of({0.0, 0.0, 0.0}, {0.0, 0.0, 0.0});
    const auto curve = fdp_curve(s);
    CHECK(curve.thresholds == std::vector<double>{1.0});
    CHECK(nullstrap_filter(s, 0.1, false, 4).discoveries.empty());
}

TEST_CASE("threshold matches a grid scan on lattice-valued statistics") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> size(2, 12), lattice(0, 64), coin(0, 9);
    std::uniform_real_distribution<double> level(0.02, 0.6);
    for (int t = 0; t < 100; ++t) {
        const int m = size(rng);
        std::vector<std::optional<double>> obs(m), null(m);
        for (int j = 0; j < m; ++j) {
            obs[j] = coin(rng) == 0 ? std::nullopt : std::optional<double>(lattice(rng) / 16.0);
            null[j] = coin(rng) == 0 ? std::nullopt : std::optional<double>(lattice(rng) / 32.0);
        }
        if (std::none_of(obs.begin(), obs.end(), [](const auto& v) { return v.has_value(); })) obs[0] = 1.0;
        const double q = level(rng);
        const auto s = pair_of(obs, null);
        const auto got = nullstrap_filter(s, q, false, 4);
        const auto want = oracle::grid_threshold(obs, null, q, 1.0 / 64.0);
        CHECK(got.tau == want.tau);
        CHECK(got.discoveries == want.discoveries);
    }
}

TEST_CASE("discoveries grow with q") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<std::optional<double>> obs, null;
    for (int j = 0; j < 300; ++j) {
        obs.push_back(std::abs(z(rng) + (j < 40 ? 3.0 : 0.0)));
        null.push_back(std::abs(z(rng)));
    }
    const auto s = pair_of(obs, null);
    std::size_t prev = 0;
    double prev_tau = INFINITY;
    for (double q : {0.01, 0.05, 0.1, 0.2, 0.4}) {
        const auto r = nullstrap_filter(s, q, false, 10);
        CHECK(r.discoveries.size() >= prev);
        CHECK(r.tau <= prev_tau);
        prev = r.discoveries.size();
        prev_tau = r.tau;
    }
    CHECK(nullstrap_filter(s, 0.1, true, 10).discoveries.size() <= nullstrap_filter(s, 0.1, false, 10).discoveries.size());
}

TEST_CASE("discoveries are invariant to monotone rescaling and sign") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<std::optional<double>> obs, null, obs2, null2;
    for (int j = 0; j < 200; ++j) {
        const double o = z(rng) + (j < 30 ? 3.5 : 0.0);
        const double n = z(rng);
        obs.push_back(o);
        null.push_back(n);
        // Strictly increasing map of |.|, applied with random signs.
        obs2.push_back((j % 2 ? -1 : 1) * std::pow(std::abs(o), 3) * 7.0);
        null2.push_back((j % 3 ? 1 : -1) * std::pow(std::abs(n), 3) * 7.0);
    }
    for (double q : {0.05, 0.1, 0.2}) {
        CHECK(nullstrap_filter(pair_of(obs, null), q, false, 10).discoveries ==
              nullstrap_filter(pair_of(obs2, null2), q, false, 10).discoveries);
    }
}
