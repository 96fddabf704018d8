#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffassim/field.hpp"
#include "diffassim/stats.hpp"

namespace diffassim {

/// Column observations: every level at each listed ring position. The
/// implied matrix A has one unit entry per row.
struct ObservationOperator {
    int points = 0;
    std::vector<int> columns;  // sorted, unique, in [0, points)

    ObservationOperator() = default;
    ObservationOperator(int points, std::vector<int> columns);

    std::size_t column_count() const { return columns.size(); }
    std::size_t row_count(int levels) const { return columns.size() * static_cast<std::size_t>(levels); }
    void validate() const;

    friend bool operator==(const ObservationOperator&, const ObservationOperator&) = default;
};

struct ObservationSet {
    ObservationOperator op;
    int levels = 0;
    /// y(l, c) = x(l, op.columns[c]); row-major levels x columns.
    std::vector<double> values;

    double y(int l, std::size_t c) const { return values[static_cast<std::size_t>(l) * op.columns.size() + c]; }
    bool empty() const { return op.columns.empty(); }
    void validate() const;
};

enum class SamplingStrategy { fixed, resampled };

SamplingStrategy parse_strategy(const std::string& name);
std::string to_string(SamplingStrategy s);

struct SoftbleedConfig {
    double sigma_g = 2.5;
    int diameter = 11;

    /// round(4 sigma) + 1, bumped to the next odd number if needed.
    static int default_diameter(double sigma_g);
    static SoftbleedConfig with_sigma(double sigma_g);
    void validate() const;
};

/// m_cols distinct positions, uniform without replacement. The fixed
/// strategy ignores `step`; the resampled strategy draws a new set per step.
ObservationOperator sample_columns(int points, int m_cols, SamplingStrategy strategy, std::int64_t step,
                                   std::uint64_t seed);

ObservationSet observe(const Field& truth, const ObservationOperator& op);

/// 1 at observed ring positions, 0 elsewhere; broadcast over levels when applied.
std::vector<double> hard_mask(const ObservationOperator& op, int points);

/// (max, x)-convolution of the mask with exp(-r^2 / (2 sigma^2)), |r| <= (d-1)/2.
std::vector<double> softbleed(const std::vector<double>& mask, const SoftbleedConfig& cfg);

/// Gaussian-weighted average of climatology anomalies over periodic ring
/// distance, exact at observed points and climatology where all weights
/// vanish. An empty observation set yields the climatology field.
Field interpolate(const ObservationSet& obs, const ClimatologyStats& clim, const SoftbleedConfig& cfg, int points);

}  // namespace diffassim
