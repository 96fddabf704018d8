#include "diffassim/assimilate.hpp"

#include <cmath>
#include <optional>
#include <sstream>

#include "diffassim/random.hpp"
#include "digest.hpp"

namespace diffassim {

namespace {

enum StreamTag : std::uint64_t {
    kInitial = 0x78696e6974ull,
    kUnknown = 0x756e6b6eull,
    kKnown = 0x6b6e6f776eull,
    kResample = 0x72736d70ull,
};

struct KnownBranch {
    Field residual;                // (x*' - x_hat) / s
    std::vector<double> soft_mask;  // over ring positions
};

double rms(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return v.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(v.size()));
}

AnalysisResult reverse_diffuse(const GridState& x_hat, const std::optional<KnownBranch>& known,
                               const DenoiserParams& model, const NoiseSchedule& schedule,
                               const AssimilationConfig& cfg) {
    cfg.validate();
    model.validate();
    const int L = x_hat.levels();
    const int K = x_hat.points();
    if (L != model.arch.levels) throw UsageError("assimilate: state levels do not match the model");
    if (!x_hat.values.all_finite()) throw NumericalError("assimilate: non-finite predicted state");

    const Field xhat_norm = normalize_state(x_hat.values, model.norm);
    NoisePredictor predictor(model);

    Rng init_rng = make_stream(cfg.seed, {kInitial});
    Rng unknown_rng = make_stream(cfg.seed, {kUnknown});
    Rng known_rng = make_stream(cfg.seed, {kKnown});
    Rng resample_rng = make_stream(cfg.seed, {kResample});

    Field x(L, K);
    fill_normal(init_rng, x.values());
    Field eps(L, K), unknown(L, K), known_branch(L, K), noise(L, K), x_prev(L, K);

    AnalysisResult result;
    result.step_norms.assign(static_cast<std::size_t>(schedule.steps()), 0.0);
    result.seed = cfg.seed;
    result.config_digest = cfg.digest();

    for (int j = schedule.steps(); j >= 1; --j) {
        for (int u = 1; u <= cfg.resample_count; ++u) {
            predictor.predict(x.values(), xhat_norm.values(), K, j, eps.values());
            fill_normal(unknown_rng, noise.values());
            reverse_step(x.values(), eps.values(), j, schedule, noise.values(), unknown.values());
            if (known) {
                fill_normal(known_rng, noise.values());
                const double a = std::sqrt(schedule.alpha_bar(j - 1));
                const double b = std::sqrt(1.0 - schedule.alpha_bar(j - 1));
                auto kv = known_branch.values();
                auto rv = known->residual.values();
                auto nv = noise.values();
                for (std::size_t i = 0; i < kv.size(); ++i) kv[i] = a * rv[i] + b * nv[i];
                x_prev = mix_step(unknown, known_branch, known->soft_mask);
            } else {
                x_prev = unknown;
            }
            if (u < cfg.resample_count) {
                fill_normal(resample_rng, noise.values());
                renoise_step(x_prev.values(), j, schedule, noise.values(), x.values());
            }
        }
        x = x_prev;
        if (!x.all_finite()) {
            throw NumericalError("assimilate: non-finite sample at diffusion step " + std::to_string(j));
        }
        result.step_norms[static_cast<std::size_t>(j - 1)] = rms(x.values());
    }

    result.analysis = {from_residual(x_hat.values, x, model.norm), x_hat.time_index};
    if (!result.analysis.values.all_finite()) throw NumericalError("assimilate: non-finite analysis");
    return result;
}

}  // namespace

void AssimilationConfig::validate() const {
    softbleed.validate();
    require(resample_count >= 1, "AssimilationConfig: resample count U must be >= 1");
}

std::string AssimilationConfig::digest() const {
    std::ostringstream s;
    s.precision(17);
    s << softbleed.sigma_g << ';' << softbleed.diameter << ';' << resample_count << ';' << seed;
    return detail::digest_hex(s.str());
}

Field mix_step(const Field& x_unknown, const Field& x_known, std::span<const double> soft_mask) {
    require_same_shape(x_unknown, x_known, "mix_step");
    if (soft_mask.size() != static_cast<std::size_t>(x_unknown.points())) {
        throw UsageError("mix_step: mask length does not match ring size");
    }
    Field out(x_unknown.levels(), x_unknown.points());
    for (int l = 0; l < out.levels(); ++l) {
        for (int k = 0; k < out.points(); ++k) {
            const double m = soft_mask[k];
            out(l, k) = m * x_known(l, k) + (1.0 - m) * x_unknown(l, k);
        }
    }
    return out;
}

AnalysisResult assimilate(const GridState& x_hat, const ObservationSet& obs, const DenoiserParams& model,
                          const NoiseSchedule& schedule, const AssimilationConfig& cfg,
                          const ClimatologyStats& clim) {
    cfg.validate();
    model.validate();
    obs.validate();
    const int K = x_hat.points();
    if (obs.op.points != K) throw UsageError("assimilate: observation operator ring size does not match state");
    if (!obs.empty() && obs.levels != x_hat.levels()) {
        throw UsageError("assimilate: observation levels do not match state");
    }
    KnownBranch known;
    known.soft_mask = softbleed(hard_mask(obs.op, K), cfg.softbleed);
    const Field interpolated = interpolate(obs, clim, cfg.softbleed, K);
    require_same_shape(interpolated, x_hat.values, "assimilate");
    known.residual = to_residual(interpolated, x_hat.values, model.norm);
    return reverse_diffuse(x_hat, known, model, schedule, cfg);
}

AnalysisResult post_process(const GridState& x_hat, const DenoiserParams& model, const NoiseSchedule& schedule,
                            const AssimilationConfig& cfg) {
    return reverse_diffuse(x_hat, std::nullopt, model, schedule, cfg);
}

std::uint64_t cycle_seed(std::uint64_t seed, std::size_t index) {
    Rng rng = make_stream(seed, {0x6379636c65ull, static_cast<std::uint64_t>(index)});
    return rng();
}

std::vector<AnalysisResult> run_cycle(const GridState& initial_forecast, const std::vector<ObservationSet>& obs_stream,
                                      const DenoiserParams& model_short, const DenoiserParams& model_long,
                                      const NoiseSchedule& schedule, const AssimilationConfig& cfg,
                                      const ClimatologyStats& clim, const SystemParams& params,
                                      const GridSpec& spec) {
    require(!obs_stream.empty(), "run_cycle: observation stream is empty");
    std::vector<AnalysisResult> out;
    out.reserve(obs_stream.size());
    GridState background = initial_forecast;
    for (std::size_t i = 0; i < obs_stream.size(); ++i) {
        AssimilationConfig cycle_cfg = cfg;
        cycle_cfg.seed = cycle_seed(cfg.seed, i);
        const DenoiserParams& model = i == 0 ? model_long : model_short;
        try {
            out.push_back(assimilate(background, obs_stream[i], model, schedule, cycle_cfg, clim));
            if (i + 1 < obs_stream.size()) background = forecast(out.back().analysis, 1, params, spec);
        } catch (const NumericalError& e) {
            throw NumericalError("cycle " + std::to_string(i) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError("cycle " + std::to_string(i) + ": " + e.what());
        } catch (const UsageError& e) {
            throw UsageError("cycle " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace diffassim
