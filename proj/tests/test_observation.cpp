#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "diffassim/observation.hpp"
#include "support.hpp"

using namespace diffassim;

namespace {

std::vector<double> softbleed_oracle(const std::vector<double>& mask, double sigma, int d) {
    const int n = static_cast<int>(mask.size());
    const int radius = (d - 1) / 2;
    std::vector<double> out(n, 0.0);
    for (int p = 0; p < n; ++p)
        for (int r = -radius; r <= radius; ++r) {
            const double k = r == 0 ? 1.0 : std::exp(-double(r) * r / (2 * sigma * sigma));
            out[p] = std::max(out[p], k * mask[((p - r) % n + n) % n]);
        }
    return out;
}

ClimatologyStats flat_clim(int levels, double mean) {
    return {std::vector<double>(levels, mean), std::vector<double>(levels, 1.0)};
}

}  // namespace

TEST_CASE("column sampling") {
    const auto all = sample_columns(12, 12, SamplingStrategy::fixed, 0, 1);
    CHECK(all.columns.size() == 12);
    for (int k = 0; k < 12; ++k) CHECK(all.columns[k] == k);
    CHECK(sample_columns(12, 0, SamplingStrategy::resampled, 3, 1).columns.empty());
    CHECK_THROWS_AS(sample_columns(12, 13, SamplingStrategy::fixed, 0, 1), UsageError);
    CHECK_THROWS_AS(sample_columns(12, -1, SamplingStrategy::fixed, 0, 1), UsageError);

    const auto f0 = sample_columns(40, 7, SamplingStrategy::fixed, 0, 5);
    CHECK(f0 == sample_columns(40, 7, SamplingStrategy::fixed, 7, 5));
    CHECK(std::set<int>(f0.columns.begin(), f0.columns.end()).size() == 7);
    CHECK(std::is_sorted(f0.columns.begin(), f0.columns.end()));

    const auto r0 = sample_columns(40, 7, SamplingStrategy::resampled, 0, 5);
    CHECK(r0 == sample_columns(40, 7, SamplingStrategy::resampled, 0, 5));
    CHECK(r0 != sample_columns(40, 7, SamplingStrategy::resampled, 1, 5));
}

TEST_CASE("column sampling is uniform over positions") {
    std::vector<int> hits(10, 0);
    for (int step = 0; step < 5000; ++step)
        for (int k : sample_columns(10, 3, SamplingStrategy::resampled, step, 2).columns) ++hits[k];
    // Expected 1500 per position, binomial sd ~32.
    for (int h : hits) CHECK(std::abs(h - 1500) < 160);
}

TEST_CASE("observe picks whole columns") {
    Field x(1, 3, std::vector<double>{10, 20, 30});
    const auto y = observe(x, ObservationOperator(3, {1}));
    REQUIRE(y.values.size() == 1);
    CHECK(y.values[0] == 20.0);

    const auto f = testing::random_field(3, 8, 4);
    const auto all = observe(f, sample_columns(8, 8, SamplingStrategy::fixed, 0, 0));
    CHECK(all.op.row_count(3) == 24);
    for (int l = 0; l < 3; ++l)
        for (int k = 0; k < 8; ++k) CHECK(all.y(l, k) == f(l, k));

    CHECK(observe(f, ObservationOperator(8, {})).values.empty());
    CHECK_THROWS_AS(ObservationOperator(8, {9}), UsageError);
    CHECK_THROWS_AS(ObservationOperator(8, {3, 3}), UsageError);
}

TEST_CASE("non-finite observations are rejected") {
    ObservationSet o{ObservationOperator(4, {1}), 1, {std::nan("")}};
    CHECK_THROWS_AS(o.validate(), NumericalError);
    CHECK_THROWS_AS(interpolate(o, flat_clim(1, 0.0), SoftbleedConfig{}, 4), NumericalError);
}

TEST_CASE("hard mask") {
    const auto m = hard_mask(ObservationOperator(8, {2, 5}), 8);
    CHECK(m == std::vector<double>{0, 0, 1, 0, 0, 1, 0, 0});
    CHECK(hard_mask(ObservationOperator(8, {}), 8) == std::vector<double>(8, 0.0));
    const auto op = sample_columns(30, 11, SamplingStrategy::fixed, 0, 3);
    const auto mask = hard_mask(op, 30);
    std::vector<int> on;
    for (int k = 0; k < 30; ++k)
        if (mask[k] == 1.0) on.push_back(k);
    CHECK(on == op.columns);
}

TEST_CASE("softbleed kernel diameter") {
    CHECK(SoftbleedConfig::default_diameter(2.5) == 11);
    CHECK(SoftbleedConfig::default_diameter(0.5) == 3);
    CHECK(SoftbleedConfig::default_diameter(3.0) == 13);
    CHECK(SoftbleedConfig::default_diameter(0.75) % 2 == 1);
    CHECK(SoftbleedConfig::with_sigma(1.5).diameter == 7);
    CHECK_THROWS_AS((SoftbleedConfig{1.0, 4}).validate(), UsageError);
    CHECK_THROWS_AS((SoftbleedConfig{0.0, 3}).validate(), UsageError);
}

TEST_CASE("softbleed of a single observation") {
    std::vector<double> mask(8, 0.0);
    mask[3] = 1.0;
    const auto s = softbleed(mask, SoftbleedConfig{1.0, 5});
    const std::vector<double> expected = {0, std::exp(-2.0), std::exp(-0.5), 1, std::exp(-0.5), std::exp(-2.0), 0, 0};
    for (int k = 0; k < 8; ++k) CHECK(std::abs(s[k] - expected[k]) <= 1e-14);
    CHECK(s[1] == doctest::Approx(0.1353).epsilon(1e-3));
    CHECK(s[2] == doctest::Approx(0.6065).epsilon(1e-3));
    CHECK(softbleed(std::vector<double>(8, 1.0), SoftbleedConfig{2.5, 11}) == std::vector<double>(8, 1.0));
}

TEST_CASE("softbleed equals the brute-force convolution on random masks") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 4 + static_cast<int>(rng() % 60);
        std::vector<double> mask(n);
        for (auto& v : mask) v = (rng() % 4 == 0) ? 1.0 : 0.0;
        const double sigma = 0.3 + (rng() % 100) / 30.0;
        const int d = 1 + 2 * static_cast<int>(rng() % 8);
        const auto s = softbleed(mask, SoftbleedConfig{sigma, d});
        const auto o = softbleed_oracle(mask, sigma, d);
        for (int k = 0; k < n; ++k) CHECK(std::abs(s[k] - o[k]) <= 1e-14);
    }
}

TEST_CASE("soft mask invariants") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 40;
        const auto op = sample_columns(n, static_cast<int>(rng() % 12), SamplingStrategy::fixed, 0, trial);
        const auto hard = hard_mask(op, n);
        const int d = 1 + 2 * static_cast<int>(rng() % 6);
        const int radius = (d - 1) / 2;
        std::vector<double> prev(n, 0.0);
        for (double sigma : {0.5, 1.0, 1.5, 2.0, 2.5, 3.0}) {
            const auto soft = softbleed(hard, SoftbleedConfig{sigma, d});
            for (int k = 0; k < n; ++k) {
                CHECK(soft[k] >= 0.0);
                CHECK(soft[k] <= 1.0);
                CHECK(soft[k] >= hard[k]);
                if (hard[k] == 1.0) CHECK(soft[k] == 1.0);
                CHECK(soft[k] >= prev[k]);
                int dist = n;
                for (int c : op.columns) dist = std::min({dist, std::abs(k - c), n - std::abs(k - c)});
                if (dist > radius) CHECK(soft[k] == 0.0);
            }
            prev = soft;
        }
    }
}

TEST_CASE("interpolation rules") {
    const SoftbleedConfig cfg{1.0, 5};
    SUBCASE("exact at the observation") {
        ObservationSet o{ObservationOperator(10, {3}), 1, {2.0}};
        const auto f = interpolate(o, flat_clim(1, 0.0), cfg, 10);
        CHECK(f(0, 3) == 2.0);
    }
    SUBCASE("far field falls back to climatology") {
        ObservationSet o{ObservationOperator(40, {0}), 1, {7.0}};
        const auto f = interpolate(o, flat_clim(1, 3.0), SoftbleedConfig{0.5, 3}, 40);
        CHECK(f(0, 20) == 3.0);
        CHECK(f(0, 0) == 7.0);
    }
    SUBCASE("equidistant point averages anomalies") {
        ObservationSet o{ObservationOperator(20, {4, 8}), 1, {5.0, 9.0}};
        const auto f = interpolate(o, flat_clim(1, 1.0), cfg, 20);
        CHECK(std::abs(f(0, 6) - ((4.0 + 8.0) / 2 + 1.0)) <= 1e-12);
    }
    SUBCASE("weighted average over ring distance") {
        ObservationSet o{ObservationOperator(10, {0, 8}), 1, {2.0, -1.0}};
        const auto f = interpolate(o, flat_clim(1, 0.5), cfg, 10);
        // k = 9: distance 1 to both across the wrap
        CHECK(std::abs(f(0, 9) - 0.5) <= 1e-12);
        const double a = std::exp(-1.0 / 2), b = std::exp(-9.0 / 2);  // k = 1: distances 1 and 3
        CHECK(std::abs(f(0, 1) - (0.5 + (a * 1.5 + b * -1.5) / (a + b))) <= 1e-12);
    }
    SUBCASE("empty set yields climatology") {
        ObservationSet o{ObservationOperator(6, {}), 2, {}};
        ClimatologyStats clim{{1.0, -4.0}, {1.0, 1.0}};
        const auto f = interpolate(o, clim, cfg, 6);
        for (int k = 0; k < 6; ++k) {
            CHECK(f(0, k) == 1.0);
            CHECK(f(1, k) == -4.0);
        }
    }
    SUBCASE("all columns observed reproduces the field") {
        const auto x = testing::random_field(3, 16, 8, 5.0);
        const auto o = observe(x, sample_columns(16, 16, SamplingStrategy::fixed, 0, 0));
        CHECK(interpolate(o, flat_clim(3, 0.0), cfg, 16) == x);
    }
}

TEST_CASE("strategy names") {
    CHECK(parse_strategy("fixed") == SamplingStrategy::fixed);
    CHECK(parse_strategy("resampled") == SamplingStrategy::resampled);
    CHECK(to_string(SamplingStrategy::resampled) == "resampled");
    CHECK_THROWS_AS(parse_strategy("random"), UsageError);
}
