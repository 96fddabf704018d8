#pragma once

#include <cstdint>
#include <vector>

#include "diffassim/field.hpp"
#include "diffassim/stats.hpp"

namespace diffassim {

/// Ring geometry and time stepping of the multi-level Lorenz-96 testbed.
struct GridSpec {
    int points = 40;  // K
    int levels = 4;   // L
    double dt = 0.05;
    int steps_per_interval = 4;

    void validate() const;
    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct SystemParams {
    std::vector<double> forcing;  // per level
    double coupling = 0.5;
    /// Added to the forcing of every level. Zero for the truth system; a
    /// nonzero value makes the forecast model imperfect.
    double model_bias = 0.0;
    /// Spatial averaging width W of the advection term. W = 1 is the
    /// classic Lorenz-96 bracket; larger W gives Lorenz's smoothed
    /// "model II" with waves spanning several grid points.
    int smoothing = 1;

    static SystemParams uniform(int levels, double forcing = 8.0, double coupling = 0.5,
                                double model_bias = 0.0, int smoothing = 1);
    SystemParams without_bias() const;
    void validate(const GridSpec& spec) const;
    friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

/// d/dt X[l,k] = [X,X]_W(l,k) - X[l,k] + F_l + b
///             + c (X[l-1,k] + X[l+1,k] - 2 X[l,k])
/// with ring indices mod K and absent levels dropped from the coupling.
/// For W = 1 the bracket is (X[l,k+1] - X[l,k-2]) X[l,k-1]; for W > 1 it is
/// -A[k-2W] A[k-W] + (1/W) sum'_j A[k-W+j] X[k+W+j] with A the W-point
/// running mean (sum' halves the end terms when W is even).
Field ml96_tendency(const Field& state, const SystemParams& params);
GridState ml96_tendency(const GridState& state, const SystemParams& params, const GridSpec& spec);

/// One classical RK4 step of size dt for an arbitrary tendency.
template <class Tendency>
Field rk4_advance(const Field& x, double dt, Tendency&& tendency) {
    auto axpy = [](const Field& a, double h, const Field& b) {
        Field out = a;
        auto o = out.values();
        auto bv = b.values();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] += h * bv[i];
        return out;
    };
    const Field k1 = tendency(x);
    const Field k2 = tendency(axpy(x, 0.5 * dt, k1));
    const Field k3 = tendency(axpy(x, 0.5 * dt, k2));
    const Field k4 = tendency(axpy(x, dt, k3));
    Field out = x;
    auto o = out.values();
    auto a = k1.values(), b = k2.values(), c = k3.values(), d = k4.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
    return out;
}

/// Sub-interval step; time_index is left unchanged.
GridState rk4_step(const GridState& state, const SystemParams& params, const GridSpec& spec);

/// Applies the forecast model for `intervals` analysis intervals.
GridState forecast(const GridState& state, int intervals, const SystemParams& params, const GridSpec& spec);

/// Truth trajectory paired with forecasts of a fixed lead.
/// forecast_states[m] is the forecast valid at truth_states[m + lead_intervals].
struct TrajectoryDataset {
    GridSpec spec;
    SystemParams params;
    std::vector<GridState> truth_states;
    std::vector<GridState> forecast_states;
    int lead_intervals = 0;

    std::size_t pair_count() const { return forecast_states.size(); }
    const GridState& truth_for_pair(std::size_t m) const { return truth_states.at(m + lead_intervals); }
};

/// Rounds every value to the nearest float32. Recorded states are stored at
/// this precision so that they survive the on-disk format unchanged.
Field quantize_f32(const Field& f);

/// Integrates the truth system (model_bias ignored) from the equilibrium
/// plus a seeded perturbation. Recorded states are float32-quantized and the
/// integration continues from the quantized state.
TrajectoryDataset generate_truth_trajectory(const GridSpec& spec, const SystemParams& params,
                                            int spinup_steps, int n_intervals, std::uint64_t seed);

/// Fills forecast_states by running the forecast model (params, including
/// model_bias) for `lead` intervals from each truth state.
void attach_forecasts(TrajectoryDataset& dataset, int lead);

ClimatologyStats compute_climatology(const TrajectoryDataset& dataset);
NormStats compute_norm_stats(const TrajectoryDataset& dataset);

}  // namespace diffassim
