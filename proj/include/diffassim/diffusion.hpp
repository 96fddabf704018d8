#pragma once

#include <span>
#include <string>
#include <vector>

namespace diffassim {

/// Variance schedule of the forward process. Index conventions follow the
/// math: beta(j) and alpha_bar(j) for j = 1..N, with alpha_bar(0) = 1.
class NoiseSchedule {
public:
    NoiseSchedule() = default;
    explicit NoiseSchedule(std::vector<double> betas);

    int steps() const { return static_cast<int>(beta_.size()); }
    double beta(int j) const { return beta_.at(static_cast<std::size_t>(j - 1)); }
    double alpha_bar(int j) const { return alpha_bar_.at(static_cast<std::size_t>(j)); }
    const std::vector<double>& betas() const { return beta_; }
    const std::vector<double>& alpha_bars() const { return alpha_bar_; }

    /// Variance of p(x^{j-1} | x^j): (1 - abar_{j-1}) / (1 - abar_j) * beta_j.
    double posterior_variance(int j) const;

    // Construction parameters, kept for serialization.
    std::string kind = "custom";
    double beta_start = 0.0;
    double beta_end = 0.0;

private:
    std::vector<double> beta_;
    std::vector<double> alpha_bar_;
};

/// N betas spaced linearly from beta_start to beta_end inclusive.
NoiseSchedule build_linear_schedule(int n, double beta_start = 1e-4, double beta_end = 0.02);

/// x^j = sqrt(abar_j) x0 + sqrt(1 - abar_j) noise
void forward_diffuse(std::span<const double> x0, int j, const NoiseSchedule& schedule,
                     std::span<const double> noise, std::span<double> out);
std::vector<double> forward_diffuse(std::span<const double> x0, int j, const NoiseSchedule& schedule,
                                    std::span<const double> noise);

/// mu = (x^j - beta_j / sqrt(1 - abar_j) * eps) / sqrt(1 - beta_j)
void reverse_mean(std::span<const double> x_j, std::span<const double> eps_pred, int j,
                  const NoiseSchedule& schedule, std::span<double> out);
std::vector<double> reverse_mean(std::span<const double> x_j, std::span<const double> eps_pred, int j,
                                 const NoiseSchedule& schedule);

/// reverse_mean + sqrt(posterior_variance(j)) * noise. Deterministic at j = 1.
void reverse_step(std::span<const double> x_j, std::span<const double> eps_pred, int j,
                  const NoiseSchedule& schedule, std::span<const double> noise, std::span<double> out);
std::vector<double> reverse_step(std::span<const double> x_j, std::span<const double> eps_pred, int j,
                                 const NoiseSchedule& schedule, std::span<const double> noise);

/// One forward transition x^{j-1} -> x^j: sqrt(1 - beta_j) x + sqrt(beta_j) noise.
void renoise_step(std::span<const double> x_prev, int j, const NoiseSchedule& schedule,
                  std::span<const double> noise, std::span<double> out);

}  // namespace diffassim
