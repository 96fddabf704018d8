#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "diffassim/denoiser.hpp"
#include "diffassim/diffusion.hpp"
#include "diffassim/dynamics.hpp"
#include "diffassim/field.hpp"
#include "diffassim/observation.hpp"

namespace diffassim {

struct AssimilationConfig {
    SoftbleedConfig softbleed;
    /// Passes per diffusion step; 1 means no resampling.
    int resample_count = 3;
    std::uint64_t seed = 0;

    void validate() const;
    std::string digest() const;
};

struct AnalysisResult {
    GridState analysis;
    /// RMS of the residual-space sample x^{j-1} after each reverse step,
    /// indexed by j - 1 (so entry 0 is the final x^0).
    std::vector<double> step_norms;
    std::uint64_t seed = 0;
    std::string config_digest;
};

/// soft * known + (1 - soft) * unknown, with the ring mask broadcast over levels.
Field mix_step(const Field& x_unknown, const Field& x_known, std::span<const double> soft_mask);

/// Conditional reverse diffusion given the forecast x_hat and observations.
/// The diffusion runs on the residual (x - x_hat) / s; observations enter
/// through the soft mask and the interpolated field, and the result is
/// x_hat + s * x^0.
AnalysisResult assimilate(const GridState& x_hat, const ObservationSet& obs, const DenoiserParams& model,
                          const NoiseSchedule& schedule, const AssimilationConfig& cfg, const ClimatologyStats& clim);

/// Reverse diffusion conditioned on x_hat alone. Same random streams as
/// assimilate, so it matches assimilate with no observations bit for bit.
AnalysisResult post_process(const GridState& x_hat, const DenoiserParams& model, const NoiseSchedule& schedule,
                            const AssimilationConfig& cfg);

/// Seed used for cycle `index` of run_cycle.
std::uint64_t cycle_seed(std::uint64_t seed, std::size_t index);

/// Forecast-analysis cycling. Cycle 0 assimilates `initial_forecast` with
/// the long-lead model; every later cycle assimilates the one-interval
/// forecast of the previous analysis with the short-lead model.
std::vector<AnalysisResult> run_cycle(const GridState& initial_forecast, const std::vector<ObservationSet>& obs_stream,
                                      const DenoiserParams& model_short, const DenoiserParams& model_long,
                                      const NoiseSchedule& schedule, const AssimilationConfig& cfg,
                                      const ClimatologyStats& clim, const SystemParams& params, const GridSpec& spec);

}  // namespace diffassim
