#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "diffassim/error.hpp"

namespace diffassim {

/// Dense levels x points array, row-major (one row per level).
class Field {
public:
    Field() = default;
    Field(int levels, int points, double fill = 0.0)
        : levels_(levels), points_(points),
          values_(static_cast<std::size_t>(levels) * static_cast<std::size_t>(points), fill) {
        require(levels >= 0 && points >= 0, "Field: negative extent");
    }
    Field(int levels, int points, std::vector<double> values)
        : levels_(levels), points_(points), values_(std::move(values)) {
        require(values_.size() == static_cast<std::size_t>(levels) * static_cast<std::size_t>(points),
                "Field: value count does not match shape");
    }

    int levels() const { return levels_; }
    int points() const { return points_; }
    std::size_t size() const { return values_.size(); }

    double& operator()(int l, int k) { return values_[static_cast<std::size_t>(l) * points_ + k]; }
    double operator()(int l, int k) const { return values_[static_cast<std::size_t>(l) * points_ + k]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::span<double> level(int l) { return values().subspan(static_cast<std::size_t>(l) * points_, points_); }
    std::span<const double> level(int l) const {
        return values().subspan(static_cast<std::size_t>(l) * points_, points_);
    }
    std::vector<double>& storage() { return values_; }
    const std::vector<double>& storage() const { return values_; }

    bool same_shape(const Field& o) const { return levels_ == o.levels_ && points_ == o.points_; }
    bool all_finite() const;

    /// Circular shift along the ring: out(l, k) = in(l, k - shift).
    Field shifted(int shift) const;

    friend bool operator==(const Field&, const Field&) = default;

private:
    int levels_ = 0;
    int points_ = 0;
    std::vector<double> values_;
};

/// A full gridded system state at analysis-time index `time_index`.
struct GridState {
    Field values;
    std::int64_t time_index = 0;

    int levels() const { return values.levels(); }
    int points() const { return values.points(); }

    friend bool operator==(const GridState&, const GridState&) = default;
};

inline void require_same_shape(const Field& a, const Field& b, const std::string& what) {
    if (!a.same_shape(b)) {
        throw UsageError(what + ": shape mismatch (" + std::to_string(a.levels()) + "x" +
                         std::to_string(a.points()) + " vs " + std::to_string(b.levels()) + "x" +
                         std::to_string(b.points()) + ")");
    }
}

}  // namespace diffassim
