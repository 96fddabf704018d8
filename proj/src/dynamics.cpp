#include "diffassim/dynamics.hpp"

#include <cmath>
#include <string>

#include "diffassim/random.hpp"

namespace diffassim {

namespace {

constexpr double kBlowUpLimit = 1e6;

void check_state(const Field& f, const std::string& where) {
    for (double v : f.values()) {
        if (!std::isfinite(v) || std::abs(v) > kBlowUpLimit) {
            throw NumericalError(where + ": state is non-finite or blew up");
        }
    }
}

void check_shape(const Field& f, const GridSpec& spec, const char* what) {
    if (f.levels() != spec.levels || f.points() != spec.points) {
        throw UsageError(std::string(what) + ": state shape does not match grid spec");
    }
}

}  // namespace

void GridSpec::validate() const {
    require(points >= 4, "GridSpec: need at least 4 ring points");
    require(levels >= 1, "GridSpec: need at least 1 level");
    require(dt > 0.0 && std::isfinite(dt), "GridSpec: dt must be positive");
    require(steps_per_interval >= 1, "GridSpec: steps_per_interval must be >= 1");
}

void NormStats::validate() const {
    const auto n = state_mean.size();
    require(n > 0 && state_std.size() == n && residual_scale.size() == n, "NormStats: inconsistent level count");
    for (std::size_t l = 0; l < n; ++l) {
        require(std::isfinite(state_mean[l]), "NormStats: non-finite mean");
        require(state_std[l] > 0.0 && std::isfinite(state_std[l]), "NormStats: state std must be positive");
        require(residual_scale[l] > 0.0 && std::isfinite(residual_scale[l]),
                "NormStats: residual scale must be positive");
    }
}

SystemParams SystemParams::uniform(int levels, double forcing, double coupling, double model_bias, int smoothing) {
    SystemParams p;
    p.smoothing = smoothing;
    p.forcing.assign(static_cast<std::size_t>(levels), forcing);
    p.coupling = coupling;
    p.model_bias = model_bias;
    return p;
}

SystemParams SystemParams::without_bias() const {
    SystemParams p = *this;
    p.model_bias = 0.0;
    return p;
}

void SystemParams::validate(const GridSpec& spec) const {
    require(static_cast<int>(forcing.size()) == spec.levels, "SystemParams: one forcing value per level required");
    for (double f : forcing) require(std::isfinite(f), "SystemParams: non-finite forcing");
    require(std::isfinite(coupling) && std::isfinite(model_bias), "SystemParams: non-finite coupling or bias");
    require(smoothing >= 1, "SystemParams: smoothing width must be >= 1");
    require(spec.points >= 4 * smoothing, "SystemParams: ring too short for the smoothing width");
}

namespace {

// Running mean A[k] = (1/W) sum'_{|i| <= J} X[k - i] and its weights.
struct Smoother {
    int width;
    int half;
    std::vector<double> weights;

    explicit Smoother(int w) : width(w), half(w / 2) {
        weights.assign(static_cast<std::size_t>(2 * half + 1), 1.0);
        if (w % 2 == 0) weights.front() = weights.back() = 0.5;
    }
};

}  // namespace

Field ml96_tendency(const Field& x, const SystemParams& params) {
    const int L = x.levels();
    const int K = x.points();
    require(K >= 4, "ml96_tendency: need at least 4 ring points");
    require(static_cast<int>(params.forcing.size()) == L, "ml96_tendency: forcing/level mismatch");
    require(params.smoothing >= 1, "ml96_tendency: smoothing width must be >= 1");
    if (!x.all_finite()) throw NumericalError("ml96_tendency: non-finite input state");

    const auto wrap = [K](int i) { return ((i % K) + K) % K; };
    const int W = params.smoothing;
    Field out(L, K);
    std::vector<double> avg;
    const Smoother sm(W);
    if (W > 1) avg.resize(static_cast<std::size_t>(K));
    const double c = params.coupling;
    for (int l = 0; l < L; ++l) {
        const double F = params.forcing[l] + params.model_bias;
        if (W > 1) {
            for (int k = 0; k < K; ++k) {
                double a = 0.0;
                for (int i = -sm.half; i <= sm.half; ++i) a += sm.weights[i + sm.half] * x(l, wrap(k - i));
                avg[k] = a / W;
            }
        }
        for (int k = 0; k < K; ++k) {
            const double xk = x(l, k);
            double advection;
            if (W == 1) {
                advection = (x(l, (k + 1) % K) - x(l, (k + K - 2) % K)) * x(l, (k + K - 1) % K);
            } else {
                double s = 0.0;
                for (int j = -sm.half; j <= sm.half; ++j) {
                    s += sm.weights[j + sm.half] * avg[wrap(k - W + j)] * x(l, wrap(k + W + j));
                }
                advection = -avg[wrap(k - 2 * W)] * avg[wrap(k - W)] + s / W;
            }
            double coupling = 0.0;
            if (l > 0) coupling += x(l - 1, k) - xk;
            if (l + 1 < L) coupling += x(l + 1, k) - xk;
            out(l, k) = advection - xk + F + c * coupling;
        }
    }
    return out;
}

GridState ml96_tendency(const GridState& state, const SystemParams& params, const GridSpec& spec) {
    check_shape(state.values, spec, "ml96_tendency");
    return {ml96_tendency(state.values, params), state.time_index};
}

GridState rk4_step(const GridState& state, const SystemParams& params, const GridSpec& spec) {
    spec.validate();
    check_shape(state.values, spec, "rk4_step");
    Field next = rk4_advance(state.values, spec.dt, [&](const Field& f) { return ml96_tendency(f, params); });
    check_state(next, "rk4_step");
    return {std::move(next), state.time_index};
}

GridState forecast(const GridState& state, int intervals, const SystemParams& params, const GridSpec& spec) {
    require(intervals >= 1, "forecast: intervals must be >= 1");
    spec.validate();
    params.validate(spec);
    check_shape(state.values, spec, "forecast");
    Field x = state.values;
    const auto tend = [&](const Field& f) { return ml96_tendency(f, params); };
    const long total = static_cast<long>(intervals) * spec.steps_per_interval;
    for (long s = 0; s < total; ++s) {
        x = rk4_advance(x, spec.dt, tend);
        check_state(x, "forecast step " + std::to_string(s));
    }
    return {std::move(x), state.time_index + intervals};
}

Field quantize_f32(const Field& f) {
    Field out = f;
    for (double& v : out.values()) v = static_cast<double>(static_cast<float>(v));
    return out;
}

TrajectoryDataset generate_truth_trajectory(const GridSpec& spec, const SystemParams& params,
                                            int spinup_steps, int n_intervals, std::uint64_t seed) {
    spec.validate();
    params.validate(spec);
    require(spinup_steps >= 0, "generate_truth_trajectory: spinup_steps must be >= 0");
    require(n_intervals >= 0, "generate_truth_trajectory: n_intervals must be >= 0");

    const SystemParams truth = params.without_bias();
    const auto tend = [&](const Field& f) { return ml96_tendency(f, truth); };

    Field x(spec.levels, spec.points);
    {
        Rng rng = make_stream(seed, {0x7472757468ull});
        std::vector<double> noise(x.size());
        fill_normal(rng, noise);
        for (int l = 0; l < spec.levels; ++l) {
            for (int k = 0; k < spec.points; ++k) {
                x(l, k) = truth.forcing[l] + 0.01 * noise[static_cast<std::size_t>(l) * spec.points + k];
            }
        }
    }
    for (int s = 0; s < spinup_steps; ++s) {
        x = rk4_advance(x, spec.dt, tend);
        check_state(x, "spin-up step " + std::to_string(s));
    }

    TrajectoryDataset ds;
    ds.spec = spec;
    ds.params = params;
    ds.truth_states.reserve(static_cast<std::size_t>(n_intervals));
    for (int i = 0; i < n_intervals; ++i) {
        if (i > 0) {
            for (int s = 0; s < spec.steps_per_interval; ++s) {
                x = rk4_advance(x, spec.dt, tend);
                check_state(x, "trajectory interval " + std::to_string(i) + " step " + std::to_string(s));
            }
        }
        x = quantize_f32(x);
        ds.truth_states.push_back({x, i});
    }
    return ds;
}

void attach_forecasts(TrajectoryDataset& ds, int lead) {
    require(lead >= 1, "attach_forecasts: lead must be >= 1");
    ds.lead_intervals = lead;
    ds.forecast_states.clear();
    if (ds.truth_states.size() <= static_cast<std::size_t>(lead)) return;
    ds.forecast_states.reserve(ds.truth_states.size() - lead);
    for (std::size_t m = 0; m + lead < ds.truth_states.size(); ++m) {
        GridState f = forecast(ds.truth_states[m], lead, ds.params, ds.spec);
        f.values = quantize_f32(f.values);
        ds.forecast_states.push_back(std::move(f));
    }
}

namespace {

void moments(const std::vector<const Field*>& fields, int L, std::vector<double>& mean, std::vector<double>& sd) {
    mean.assign(L, 0.0);
    sd.assign(L, 0.0);
    std::vector<double> count(L, 0.0);
    for (const Field* f : fields) {
        for (int l = 0; l < L; ++l) {
            for (double v : f->level(l)) mean[l] += v;
            count[l] += f->points();
        }
    }
    for (int l = 0; l < L; ++l) mean[l] /= count[l];
    for (const Field* f : fields) {
        for (int l = 0; l < L; ++l) {
            for (double v : f->level(l)) sd[l] += (v - mean[l]) * (v - mean[l]);
        }
    }
    for (int l = 0; l < L; ++l) sd[l] = std::sqrt(sd[l] / count[l]);
}

}  // namespace

ClimatologyStats compute_climatology(const TrajectoryDataset& ds) {
    if (ds.truth_states.empty()) throw UsageError("compute_climatology: empty dataset");
    std::vector<const Field*> fields;
    for (const auto& s : ds.truth_states) fields.push_back(&s.values);
    ClimatologyStats out;
    moments(fields, ds.truth_states.front().levels(), out.mean, out.std);
    for (std::size_t l = 0; l < out.std.size(); ++l) {
        if (!(out.std[l] > 0.0)) {
            throw NumericalError("compute_climatology: zero variance at level " + std::to_string(l));
        }
    }
    return out;
}

NormStats compute_norm_stats(const TrajectoryDataset& ds) {
    const ClimatologyStats clim = compute_climatology(ds);
    if (ds.forecast_states.empty()) throw UsageError("compute_norm_stats: dataset has no forecast pairs");
    std::vector<Field> residuals;
    residuals.reserve(ds.pair_count());
    for (std::size_t m = 0; m < ds.pair_count(); ++m) {
        const Field& truth = ds.truth_for_pair(m).values;
        const Field& fc = ds.forecast_states[m].values;
        require_same_shape(truth, fc, "compute_norm_stats");
        Field r = truth;
        auto rv = r.values();
        auto fv = fc.values();
        for (std::size_t i = 0; i < rv.size(); ++i) rv[i] -= fv[i];
        residuals.push_back(std::move(r));
    }
    std::vector<const Field*> ptrs;
    for (const auto& r : residuals) ptrs.push_back(&r);
    std::vector<double> rmean, rstd;
    moments(ptrs, clim.mean.size() ? static_cast<int>(clim.mean.size()) : 0, rmean, rstd);
    for (std::size_t l = 0; l < rstd.size(); ++l) {
        if (!(rstd[l] > 0.0)) {
            throw NumericalError("compute_norm_stats: zero residual variance at level " + std::to_string(l) +
                                 " (forecast identical to truth?)");
        }
    }
    return {clim.mean, clim.std, rstd};
}

}  // namespace diffassim
