#pragma once

#include <vector>

namespace diffassim {

/// Long-run per-level statistics of the truth system.
struct ClimatologyStats {
    std::vector<double> mean;
    std::vector<double> std;
};

/// Normalization used by the denoiser. `residual_scale` is the per-level
/// spread of (truth - forecast); the diffusion variable is that residual
/// divided by it.
struct NormStats {
    std::vector<double> state_mean;
    std::vector<double> state_std;
    std::vector<double> residual_scale;

    int levels() const { return static_cast<int>(state_mean.size()); }
    void validate() const;

    friend bool operator==(const NormStats&, const NormStats&) = default;
};

}  // namespace diffassim
