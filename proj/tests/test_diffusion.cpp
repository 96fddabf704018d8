#include <doctest.h>

#include <cmath>
#include <random>

#include "diffassim/diffusion.hpp"
#include "diffassim/error.hpp"

using namespace diffassim;

TEST_CASE("linear schedule endpoints and running product") {
    const auto s = build_linear_schedule(2, 1e-4, 0.02);
    CHECK(s.steps() == 2);
    CHECK(s.beta(1) == 1e-4);
    CHECK(s.beta(2) == 0.02);
    CHECK(s.alpha_bar(0) == 1.0);
    CHECK(std::abs(s.alpha_bar(1) - 0.9999) <= 1e-12);
    CHECK(std::abs(s.alpha_bar(2) - 0.9999 * 0.98) <= 1e-12);
    CHECK(std::abs(s.alpha_bar(2) - 0.979902) <= 1e-12);
    CHECK(s.kind == "linear");
}

TEST_CASE("three-step schedule has the midpoint in the middle") {
    const auto s = build_linear_schedule(3, 0.1, 0.3);
    CHECK(std::abs(s.beta(2) - 0.2) <= 1e-15);
}

TEST_CASE("schedule invariants") {
    const auto s = build_linear_schedule(200);
    CHECK(s.alpha_bar(0) == 1.0);
    for (int j = 1; j <= 200; ++j) {
        CHECK(s.alpha_bar(j) < s.alpha_bar(j - 1));
        CHECK(s.beta(j) > 0.0);
        CHECK(s.beta(j) < 1.0);
    }
    CHECK(s.alpha_bar(200) > 0.0);
    for (const auto& sch : {s, build_linear_schedule(1, 0.3, 0.3), NoiseSchedule({0.5, 0.5})})
        CHECK(sch.posterior_variance(1) == 0.0);
}

TEST_CASE("invalid schedules are rejected") {
    CHECK_THROWS_AS(build_linear_schedule(0), UsageError);
    CHECK_THROWS_AS(build_linear_schedule(10, 0.0, 0.02), UsageError);
    CHECK_THROWS_AS(build_linear_schedule(10, 0.03, 0.02), UsageError);
    CHECK_THROWS_AS(build_linear_schedule(10, 1e-4, 1.0), UsageError);
    CHECK_THROWS_AS(NoiseSchedule({0.1, 1.5}), UsageError);
}

TEST_CASE("forward diffusion closed form") {
    // abar_1 = 0.25
    const NoiseSchedule s({0.75});
    CHECK(forward_diffuse(std::vector<double>{2.0}, 1, s, std::vector<double>{0.0})[0] == 1.0);
    CHECK(std::abs(forward_diffuse(std::vector<double>{0.0}, 1, s, std::vector<double>{1.0})[0] - std::sqrt(0.75)) <=
          1e-12);
    CHECK_THROWS_AS(forward_diffuse(std::vector<double>{1.0, 2.0}, 1, s, std::vector<double>{1.0}), UsageError);
    CHECK_THROWS_AS(forward_diffuse(std::vector<double>{1.0}, 2, s, std::vector<double>{1.0}), UsageError);
    CHECK_THROWS_AS(forward_diffuse(std::vector<double>{1.0}, 0, s, std::vector<double>{1.0}), UsageError);
}

TEST_CASE("forward diffusion moments match the closed form") {
    const auto s = build_linear_schedule(200);
    const int j = 60;
    const std::vector<double> x0 = {1.5, -0.7, 0.0};
    const int draws = 100000;
    std::mt19937_64 rng(42);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> sum(3, 0.0), sum2(3, 0.0);
    std::vector<double> eps(3);
    for (int d = 0; d < draws; ++d) {
        for (auto& e : eps) e = n(rng);
        const auto x = forward_diffuse(x0, j, s, eps);
        for (int i = 0; i < 3; ++i) {
            sum[i] += x[i];
            sum2[i] += x[i] * x[i];
        }
    }
    const double var_expected = 1.0 - s.alpha_bar(j);
    for (int i = 0; i < 3; ++i) {
        const double mean = sum[i] / draws;
        const double var = sum2[i] / draws - mean * mean;
        const double se_mean = std::sqrt(var_expected / draws);
        const double se_var = var_expected * std::sqrt(2.0 / (draws - 1));
        CHECK(std::abs(mean - std::sqrt(s.alpha_bar(j)) * x0[i]) < 3 * se_mean);
        CHECK(std::abs(var - var_expected) < 3 * se_var);
    }
}

TEST_CASE("reverse mean") {
    const auto s = build_linear_schedule(10);
    const std::vector<double> x = {0.3, -1.2};
    const auto mu = reverse_mean(x, std::vector<double>{0.0, 0.0}, 4, s);
    for (int i = 0; i < 2; ++i) CHECK(std::abs(mu[i] - x[i] / std::sqrt(1.0 - s.beta(4))) <= 1e-12 * std::abs(mu[i]));

    const NoiseSchedule b({0.1});
    const double expected = (1.0 - 0.1 / std::sqrt(0.1)) / std::sqrt(0.9);
    const double got = reverse_mean(std::vector<double>{1.0}, std::vector<double>{1.0}, 1, b)[0];
    CHECK(std::abs(got - expected) <= 1e-12);
    CHECK(got == doctest::Approx(0.720759).epsilon(1e-6));
}

TEST_CASE("reverse mean inverts a one-step diffusion given the true noise") {
    const auto s = build_linear_schedule(50);
    const std::vector<double> x0 = {0.8, -2.5, 1e-3, 4.0};
    const std::vector<double> eps = {0.1, -1.7, 0.6, 2.2};
    const auto x1 = forward_diffuse(x0, 1, s, eps);
    const auto back = reverse_mean(x1, eps, 1, s);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(back[i] - x0[i]) <= 1e-12 * std::max(1.0, std::abs(x0[i])));
}

TEST_CASE("reverse step noise scale") {
    const NoiseSchedule s({0.5, 0.5});
    CHECK(std::abs(s.posterior_variance(2) - 1.0 / 3.0) <= 1e-12);

    const std::vector<double> x = {0.4}, e = {0.2}, z = {1.3};
    const auto mu = reverse_mean(x, e, 2, s);
    CHECK(std::abs(reverse_step(x, e, 2, s, z)[0] - (mu[0] + std::sqrt(1.0 / 3.0) * 1.3)) <= 1e-12);
    CHECK(reverse_step(x, e, 2, s, std::vector<double>{0.0})[0] == mu[0]);
    // j = 1 ignores the noise entirely.
    CHECK(reverse_step(x, e, 1, s, z)[0] == reverse_mean(x, e, 1, s)[0]);
    CHECK_THROWS_AS(reverse_step(x, e, 3, s, z), UsageError);
    CHECK_THROWS_AS(reverse_step(x, std::vector<double>{1, 2}, 1, s, z), UsageError);
}

TEST_CASE("one-step renoising matches the forward transition") {
    const NoiseSchedule s({0.2, 0.36});
    std::vector<double> out(1);
    renoise_step(std::vector<double>{1.0}, 2, s, std::vector<double>{0.5}, out);
    CHECK(std::abs(out[0] - (0.8 + 0.6 * 0.5)) <= 1e-12);
}
