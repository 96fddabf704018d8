#include "diffassim/diffusion.hpp"

#include <cmath>
#include <string>

#include "diffassim/error.hpp"

namespace diffassim {

namespace {

void check_step(const NoiseSchedule& s, int j, const char* what) {
    if (j < 1 || j > s.steps()) {
        throw UsageError(std::string(what) + ": diffusion step " + std::to_string(j) + " outside [1, " +
                         std::to_string(s.steps()) + "]");
    }
}

void check_sizes(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw UsageError(std::string(what) + ": shape mismatch");
}

}  // namespace

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : beta_(std::move(betas)) {
    require(!beta_.empty(), "NoiseSchedule: need at least one step");
    alpha_bar_.resize(beta_.size() + 1);
    alpha_bar_[0] = 1.0;
    for (std::size_t j = 0; j < beta_.size(); ++j) {
        require(beta_[j] > 0.0 && beta_[j] < 1.0, "NoiseSchedule: beta must lie in (0, 1)");
        alpha_bar_[j + 1] = alpha_bar_[j] * (1.0 - beta_[j]);
    }
    require(alpha_bar_.back() > 0.0, "NoiseSchedule: alpha_bar underflowed to zero");
}

double NoiseSchedule::posterior_variance(int j) const {
    check_step(*this, j, "posterior_variance");
    return (1.0 - alpha_bar(j - 1)) / (1.0 - alpha_bar(j)) * beta(j);
}

NoiseSchedule build_linear_schedule(int n, double beta_start, double beta_end) {
    require(n >= 1, "build_linear_schedule: N must be >= 1");
    require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
            "build_linear_schedule: need 0 < beta_start <= beta_end < 1");
    std::vector<double> betas(static_cast<std::size_t>(n));
    if (n == 1) {
        betas[0] = beta_start;
    } else {
        for (int i = 0; i < n; ++i) {
            betas[i] = beta_start + (beta_end - beta_start) * static_cast<double>(i) / static_cast<double>(n - 1);
        }
        betas[n - 1] = beta_end;
    }
    NoiseSchedule s(std::move(betas));
    s.kind = "linear";
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    return s;
}

void forward_diffuse(std::span<const double> x0, int j, const NoiseSchedule& schedule,
                     std::span<const double> noise, std::span<double> out) {
    check_step(schedule, j, "forward_diffuse");
    check_sizes(x0.size(), noise.size(), "forward_diffuse");
    check_sizes(x0.size(), out.size(), "forward_diffuse");
    const double a = std::sqrt(schedule.alpha_bar(j));
    const double b = std::sqrt(1.0 - schedule.alpha_bar(j));
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * noise[i];
}

std::vector<double> forward_diffuse(std::span<const double> x0, int j, const NoiseSchedule& schedule,
                                    std::span<const double> noise) {
    std::vector<double> out(x0.size());
    forward_diffuse(x0, j, schedule, noise, out);
    return out;
}

void reverse_mean(std::span<const double> x_j, std::span<const double> eps_pred, int j,
                  const NoiseSchedule& schedule, std::span<double> out) {
    check_step(schedule, j, "reverse_mean");
    check_sizes(x_j.size(), eps_pred.size(), "reverse_mean");
    check_sizes(x_j.size(), out.size(), "reverse_mean");
    const double beta = schedule.beta(j);
    const double coef = beta / std::sqrt(1.0 - schedule.alpha_bar(j));
    const double inv = 1.0 / std::sqrt(1.0 - beta);
    for (std::size_t i = 0; i < x_j.size(); ++i) out[i] = (x_j[i] - coef * eps_pred[i]) * inv;
}

std::vector<double> reverse_mean(std::span<const double> x_j, std::span<const double> eps_pred, int j,
                                 const NoiseSchedule& schedule) {
    std::vector<double> out(x_j.size());
    reverse_mean(x_j, eps_pred, j, schedule, out);
    return out;
}

void reverse_step(std::span<const double> x_j, std::span<const double> eps_pred, int j,
                  const NoiseSchedule& schedule, std::span<const double> noise, std::span<double> out) {
    check_sizes(x_j.size(), noise.size(), "reverse_step");
    reverse_mean(x_j, eps_pred, j, schedule, out);
    const double sigma = std::sqrt(schedule.posterior_variance(j));
    if (sigma == 0.0) return;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma * noise[i];
}

std::vector<double> reverse_step(std::span<const double> x_j, std::span<const double> eps_pred, int j,
                                 const NoiseSchedule& schedule, std::span<const double> noise) {
    std::vector<double> out(x_j.size());
    reverse_step(x_j, eps_pred, j, schedule, noise, out);
    return out;
}

void renoise_step(std::span<const double> x_prev, int j, const NoiseSchedule& schedule,
                  std::span<const double> noise, std::span<double> out) {
    check_step(schedule, j, "renoise_step");
    check_sizes(x_prev.size(), noise.size(), "renoise_step");
    check_sizes(x_prev.size(), out.size(), "renoise_step");
    const double beta = schedule.beta(j);
    const double a = std::sqrt(1.0 - beta);
    const double b = std::sqrt(beta);
    for (std::size_t i = 0; i < x_prev.size(); ++i) out[i] = a * x_prev[i] + b * noise[i];
}

}  // namespace diffassim
