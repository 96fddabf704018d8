#include "diffassim/observation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "diffassim/random.hpp"

namespace diffassim {

ObservationOperator::ObservationOperator(int pts, std::vector<int> cols) : points(pts), columns(std::move(cols)) {
    validate();
}

void ObservationOperator::validate() const {
    require(points >= 0, "ObservationOperator: negative point count");
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] < 0 || columns[i] >= points) {
            throw UsageError("ObservationOperator: column index " + std::to_string(columns[i]) + " out of range");
        }
        if (i > 0 && columns[i] <= columns[i - 1]) {
            throw UsageError("ObservationOperator: column indices must be sorted and unique");
        }
    }
}

void ObservationSet::validate() const {
    op.validate();
    require(values.size() == op.row_count(levels), "ObservationSet: value count does not match operator");
    for (double v : values) {
        if (!std::isfinite(v)) throw NumericalError("ObservationSet: non-finite observation value");
    }
}

SamplingStrategy parse_strategy(const std::string& name) {
    if (name == "fixed") return SamplingStrategy::fixed;
    if (name == "resampled") return SamplingStrategy::resampled;
    throw UsageError("unknown sampling strategy '" + name + "' (expected fixed|resampled)");
}

std::string to_string(SamplingStrategy s) { return s == SamplingStrategy::fixed ? "fixed" : "resampled"; }

int SoftbleedConfig::default_diameter(double sigma_g) {
    int d = static_cast<int>(std::lround(4.0 * sigma_g)) + 1;
    if (d % 2 == 0) ++d;
    return d;
}

SoftbleedConfig SoftbleedConfig::with_sigma(double sigma_g) { return {sigma_g, default_diameter(sigma_g)}; }

void SoftbleedConfig::validate() const {
    require(sigma_g > 0.0 && std::isfinite(sigma_g), "SoftbleedConfig: sigma_G must be positive");
    require(diameter >= 1 && diameter % 2 == 1, "SoftbleedConfig: kernel diameter must be odd and >= 1");
}

ObservationOperator sample_columns(int points, int m_cols, SamplingStrategy strategy, std::int64_t step,
                                   std::uint64_t seed) {
    require(points >= 0, "sample_columns: negative point count");
    if (m_cols < 0 || m_cols > points) {
        throw UsageError("sample_columns: m_cols = " + std::to_string(m_cols) + " outside [0, " +
                         std::to_string(points) + "]");
    }
    const std::uint64_t tag = strategy == SamplingStrategy::fixed ? 0 : static_cast<std::uint64_t>(step) + 1;
    Rng rng = make_stream(seed, {0x636f6c73ull, tag});
    std::vector<int> all(static_cast<std::size_t>(points));
    std::iota(all.begin(), all.end(), 0);
    // Partial Fisher-Yates: the first m_cols entries are a uniform sample.
    for (int i = 0; i < m_cols; ++i) {
        std::uniform_int_distribution<int> pick(i, points - 1);
        std::swap(all[i], all[pick(rng)]);
    }
    std::vector<int> cols(all.begin(), all.begin() + m_cols);
    std::sort(cols.begin(), cols.end());
    return ObservationOperator(points, std::move(cols));
}

ObservationSet observe(const Field& truth, const ObservationOperator& op) {
    op.validate();
    if (op.points != truth.points()) throw UsageError("observe: operator ring size does not match state");
    ObservationSet obs;
    obs.op = op;
    obs.levels = truth.levels();
    obs.values.resize(op.row_count(truth.levels()));
    const std::size_t m = op.columns.size();
    for (int l = 0; l < truth.levels(); ++l) {
        for (std::size_t c = 0; c < m; ++c) obs.values[l * m + c] = truth(l, op.columns[c]);
    }
    return obs;
}

std::vector<double> hard_mask(const ObservationOperator& op, int points) {
    op.validate();
    require(op.points == points, "hard_mask: operator ring size mismatch");
    std::vector<double> mask(static_cast<std::size_t>(points), 0.0);
    for (int c : op.columns) mask[c] = 1.0;
    return mask;
}

std::vector<double> softbleed(const std::vector<double>& mask, const SoftbleedConfig& cfg) {
    cfg.validate();
    const int K = static_cast<int>(mask.size());
    const int radius = (cfg.diameter - 1) / 2;
    std::vector<double> kernel(static_cast<std::size_t>(radius) + 1);
    for (int r = 0; r <= radius; ++r) kernel[r] = std::exp(-(r * r) / (2.0 * cfg.sigma_g * cfg.sigma_g));
    kernel[0] = 1.0;

    std::vector<double> out(mask.size(), 0.0);
    for (int p = 0; p < K; ++p) {
        double best = 0.0;
        for (int r = -radius; r <= radius; ++r) {
            const int q = ((p - r) % K + K) % K;
            best = std::max(best, kernel[std::abs(r)] * mask[q]);
        }
        out[p] = best;
    }
    return out;
}

namespace {

int ring_distance(int a, int b, int K) {
    const int d = std::abs(a - b) % K;
    return std::min(d, K - d);
}

}  // namespace

Field interpolate(const ObservationSet& obs, const ClimatologyStats& clim, const SoftbleedConfig& cfg, int points) {
    cfg.validate();
    obs.validate();
    require(obs.op.points == points, "interpolate: operator ring size mismatch");
    const int L = obs.empty() ? static_cast<int>(clim.mean.size()) : obs.levels;
    require(static_cast<int>(clim.mean.size()) == L, "interpolate: climatology level count mismatch");

    Field out(L, points);
    const auto& cols = obs.op.columns;
    const std::size_t m = cols.size();
    const double inv2s2 = 1.0 / (2.0 * cfg.sigma_g * cfg.sigma_g);
    std::vector<char> observed(static_cast<std::size_t>(points), 0);
    for (int c : cols) observed[c] = 1;

    for (int k = 0; k < points; ++k) {
        std::vector<double> w(m);
        double wsum = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            const double d = ring_distance(k, cols[c], points);
            w[c] = std::exp(-d * d * inv2s2);
            wsum += w[c];
        }
        for (int l = 0; l < L; ++l) {
            double value = clim.mean[l];
            if (wsum >= 1e-12) {
                double acc = 0.0;
                for (std::size_t c = 0; c < m; ++c) acc += w[c] * (obs.y(l, c) - clim.mean[l]);
                value += acc / wsum;
            }
            out(l, k) = value;
        }
    }
    for (std::size_t c = 0; c < m; ++c) {
        for (int l = 0; l < L; ++l) out(l, cols[c]) = obs.y(l, c);
    }
    return out;
}

}  // namespace diffassim
