#include "diffassim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "diffassim/random.hpp"

namespace diffassim {

namespace {

constexpr std::uint64_t kCaseTag = 0x63617365;
constexpr std::uint64_t kColumnsTag = 0x636f6c73;
constexpr std::uint64_t kAssimTag = 0x6173736d;

const GridState& truth_at(const ExperimentData& data, int t) {
    if (t < 0 || static_cast<std::size_t>(t) >= data.test.truth_states.size())
        throw UsageError("truth index " + std::to_string(t) + " outside the test trajectory");
    return data.test.truth_states[static_cast<std::size_t>(t)];
}

ObservationSet observe_case(const ExperimentConfig& cfg, const GridState& truth, int m, SamplingStrategy strategy,
                            std::int64_t step, std::uint64_t seed) {
    return observe(truth.values, sample_columns(cfg.grid.points, m, strategy, step, derive_seed(seed, {kColumnsTag,
                                                                                   static_cast<std::uint64_t>(m)})));
}

std::vector<MetricsRecord> flatten(std::vector<std::vector<MetricsRecord>>& parts) {
    std::vector<MetricsRecord> out;
    for (auto& p : parts) out.insert(out.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
    return out;
}

MetricsRecord proto(const std::string& experiment, int c, int m, double sigma, int index, const std::string& metric) {
    MetricsRecord r;
    r.experiment = experiment;
    r.case_id = c;
    r.m_cols = m;
    r.sigma_g = sigma;
    r.index = index;
    r.metric = metric;
    return r;
}

}  // namespace

NoiseSchedule schedule_of(const ExperimentConfig& cfg) {
    return build_linear_schedule(cfg.diffusion_steps, cfg.beta_start, cfg.beta_end);
}

AssimilationConfig assimilation_config(const ExperimentConfig& cfg, double sigma_g, std::uint64_t seed) {
    AssimilationConfig a;
    a.softbleed = SoftbleedConfig::with_sigma(sigma_g);
    if (cfg.diameter > 0 && sigma_g == cfg.sigma_g) a.softbleed.diameter = cfg.diameter;
    a.resample_count = cfg.resample_count;
    a.seed = seed;
    a.validate();
    return a;
}

TrajectoryDataset make_training_dataset(const ExperimentConfig& cfg, int lead) {
    auto ds = generate_truth_trajectory(cfg.grid, cfg.system, cfg.spinup_steps, cfg.train_intervals, cfg.train_seed);
    attach_forecasts(ds, lead);
    return ds;
}

ExperimentData make_experiment_data(const ExperimentConfig& cfg) {
    int back = cfg.lead;
    for (int d : cfg.delta_ladder) back = std::max(back, d);
    if (cfg.case_offset < back)
        throw UsageError("case_offset " + std::to_string(cfg.case_offset) + " leaves no room for lead/delta " +
                         std::to_string(back));
    const int last_start = cfg.case_offset + (std::max(cfg.cases, cfg.runs) - 1) * cfg.case_stride;
    const int n = last_start + std::max(cfg.lead, cfg.cycles) + 1;

    ExperimentData d;
    d.test = generate_truth_trajectory(cfg.grid, cfg.system, cfg.spinup_steps, n, cfg.test_seed);
    d.clim = compute_climatology(
        generate_truth_trajectory(cfg.grid, cfg.system, cfg.spinup_steps, cfg.train_intervals, cfg.train_seed));
    return d;
}

Checkpoint train_model(const ExperimentConfig& cfg, int lead, const std::function<void(const TrainLogEntry&)>& on_step) {
    TrainConfig tc = cfg.train;
    tc.lead_intervals = lead;
    const auto ds = make_training_dataset(cfg, lead);
    Checkpoint ck;
    ck.schedule = schedule_of(cfg);
    ck.params = train(ds, tc, ck.schedule, cfg.arch, on_step).params;
    ck.lead_intervals = lead;
    return ck;
}

int case_time(const ExperimentConfig& cfg, int c) { return cfg.case_offset + c * cfg.case_stride; }

std::uint64_t case_seed(const ExperimentConfig& cfg, int c) {
    return derive_seed(cfg.seed, {kCaseTag, static_cast<std::uint64_t>(c)});
}

void parallel_for(int count, int threads, const std::function<void(int)>& task) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(threads, count); ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::vector<MetricsRecord> run_single_step(const ExperimentConfig& cfg, const ExperimentData& data,
                                           const Checkpoint& model) {
    if (model.lead_intervals != cfg.lead)
        throw UsageError("single-step model lead " + std::to_string(model.lead_intervals) + " differs from lead " +
                         std::to_string(cfg.lead));
    std::vector<std::vector<MetricsRecord>> parts(static_cast<std::size_t>(cfg.cases));
    parallel_for(cfg.cases, cfg.threads, [&](int c) {
        auto& out = parts[static_cast<std::size_t>(c)];
        const int t = case_time(cfg, c);
        const GridState& truth = truth_at(data, t);
        const std::uint64_t seed = case_seed(cfg, c);
        const GridState x_hat = forecast(truth_at(data, t - cfg.lead), cfg.lead, cfg.system, cfg.grid);
        std::vector<GridState> lead_forecasts;
        for (int n = 1; n <= cfg.lead; ++n)
            lead_forecasts.push_back(n == cfg.lead ? x_hat : forecast(truth_at(data, t - n), n, cfg.system, cfg.grid));

        for (int m : cfg.m_cols) {
            const auto acfg = assimilation_config(cfg, cfg.sigma_g, derive_seed(seed, {kAssimTag}));
            const ObservationSet obs = observe_case(cfg, truth, m, SamplingStrategy::fixed, 0, seed);
            const auto res = assimilate(x_hat, obs, model.params, model.schedule, acfg, data.clim);
            const Field interp = interpolate(obs, data.clim, acfg.softbleed, cfg.grid.points);
            const auto soft = softbleed(hard_mask(obs.op, cfg.grid.points), acfg.softbleed);
            const Field mixture = mix_step(x_hat.values, interp, soft);

            append_rmse_records(out, proto("single_step", c, m, cfg.sigma_g, 0, "analysis"), res.analysis.values,
                                truth.values);
            append_rmse_records(out, proto("single_step", c, m, cfg.sigma_g, cfg.lead, "forecast"), x_hat.values,
                                truth.values);
            append_rmse_records(out, proto("single_step", c, m, cfg.sigma_g, 0, "interpolation"), interp, truth.values);
            append_rmse_records(out, proto("single_step", c, m, cfg.sigma_g, 0, "mixture"), mixture, truth.values);
            for (int n = 1; n <= cfg.lead; ++n)
                append_rmse_records(out,
                                    proto("single_step", c, m, cfg.sigma_g, n, "forecast_lead_" + std::to_string(n)),
                                    lead_forecasts[static_cast<std::size_t>(n - 1)].values, truth.values);
        }
    });
    return flatten(parts);
}

std::vector<MetricsRecord> run_postprocess(const ExperimentConfig& cfg, const ExperimentData& data,
                                           const Checkpoint& model) {
    std::vector<std::vector<MetricsRecord>> parts(static_cast<std::size_t>(cfg.cases));
    parallel_for(cfg.cases, cfg.threads, [&](int c) {
        auto& out = parts[static_cast<std::size_t>(c)];
        const int t = case_time(cfg, c);
        const GridState& truth = truth_at(data, t);
        const int lead = model.lead_intervals;
        const GridState x_hat = forecast(truth_at(data, t - lead), lead, cfg.system, cfg.grid);
        const auto acfg = assimilation_config(cfg, cfg.sigma_g, derive_seed(case_seed(cfg, c), {kAssimTag}));
        const auto res = post_process(x_hat, model.params, model.schedule, acfg);
        append_rmse_records(out, proto("postprocess", c, 0, cfg.sigma_g, lead, "postprocess"), res.analysis.values,
                            truth.values);
        append_rmse_records(out, proto("postprocess", c, 0, cfg.sigma_g, lead, "forecast"), x_hat.values, truth.values);
    });
    return flatten(parts);
}

std::vector<MetricsRecord> run_autoregressive(const ExperimentConfig& cfg, const ExperimentData& data,
                                              const Checkpoint& long_model, const Checkpoint& short_model) {
    if (short_model.lead_intervals != 1)
        throw UsageError("cycling needs a one-interval model, got lead " + std::to_string(short_model.lead_intervals));
    const SamplingStrategy strategy = parse_strategy(cfg.strategy);
    const std::string name = "autoregressive_" + cfg.strategy;
    const int n_m = static_cast<int>(cfg.cycle_m_cols.size());
    std::vector<std::vector<MetricsRecord>> parts(static_cast<std::size_t>(cfg.runs * n_m));
    parallel_for(cfg.runs * n_m, cfg.threads, [&](int task) {
        const int r = task / n_m;
        const int m = cfg.cycle_m_cols[static_cast<std::size_t>(task % n_m)];
        auto& out = parts[static_cast<std::size_t>(task)];
        const int t0 = case_time(cfg, r);
        const std::uint64_t seed = case_seed(cfg, r);
        const int lead = long_model.lead_intervals;
        const GridState first = forecast(truth_at(data, t0 - lead), lead, cfg.system, cfg.grid);

        std::vector<ObservationSet> stream;
        for (int i = 0; i < cfg.cycles; ++i) stream.push_back(observe_case(cfg, truth_at(data, t0 + i), m, strategy, i, seed));
        const auto acfg = assimilation_config(cfg, cfg.sigma_g, derive_seed(seed, {kAssimTag}));
        const auto results = run_cycle(first, stream, short_model.params, long_model.params, long_model.schedule, acfg,
                                       data.clim, cfg.system, cfg.grid);

        GridState background = first;
        for (int i = 0; i < cfg.cycles; ++i) {
            const GridState& truth = truth_at(data, t0 + i);
            const auto& res = results[static_cast<std::size_t>(i)];
            const Field interp = interpolate(stream[static_cast<std::size_t>(i)], data.clim, acfg.softbleed,
                                             cfg.grid.points);
            append_rmse_records(out, proto(name, r, m, cfg.sigma_g, i + 1, "analysis"), res.analysis.values,
                                truth.values);
            append_rmse_records(out, proto(name, r, m, cfg.sigma_g, i + 1, "background"), background.values,
                                truth.values);
            append_rmse_records(out, proto(name, r, m, cfg.sigma_g, i + 1, "interpolation"), interp, truth.values);
            if (i + 1 < cfg.cycles) background = forecast(res.analysis, 1, cfg.system, cfg.grid);
        }
    });
    return flatten(parts);
}

std::vector<MetricsRecord> run_forecast_on_assimilated(const ExperimentConfig& cfg, const ExperimentData& data,
                                                       const Checkpoint& model) {
    std::vector<std::vector<MetricsRecord>> parts(static_cast<std::size_t>(cfg.cases));
    parallel_for(cfg.cases, cfg.threads, [&](int c) {
        auto& out = parts[static_cast<std::size_t>(c)];
        const int t = case_time(cfg, c);
        const GridState& truth = truth_at(data, t);
        const GridState& verify = truth_at(data, t + cfg.lead);
        const std::uint64_t seed = case_seed(cfg, c);
        const int model_lead = model.lead_intervals;
        const GridState x_hat = forecast(truth_at(data, t - model_lead), model_lead, cfg.system, cfg.grid);
        std::vector<GridState> from_truth;
        for (int d : cfg.delta_ladder) from_truth.push_back(forecast(truth_at(data, t - d), cfg.lead + d, cfg.system, cfg.grid));

        for (int m : cfg.m_cols) {
            const auto acfg = assimilation_config(cfg, cfg.sigma_g, derive_seed(seed, {kAssimTag}));
            const ObservationSet obs = observe_case(cfg, truth, m, SamplingStrategy::fixed, 0, seed);
            const auto res = assimilate(x_hat, obs, model.params, model.schedule, acfg, data.clim);
            const GridState fa = forecast(res.analysis, cfg.lead, cfg.system, cfg.grid);
            append_rmse_records(out, proto("forecast_on_assimilated", c, m, cfg.sigma_g, cfg.lead,
                                           "forecast_from_analysis"),
                                fa.values, verify.values);
            for (std::size_t i = 0; i < cfg.delta_ladder.size(); ++i)
                append_rmse_records(out, proto("forecast_on_assimilated", c, m, cfg.sigma_g, cfg.delta_ladder[i],
                                               "forecast_from_truth"),
                                    from_truth[i].values, verify.values);
        }
    });
    return flatten(parts);
}

std::vector<MetricsRecord> run_sigma_ablation(const ExperimentConfig& cfg, const ExperimentData& data,
                                              const Checkpoint& model) {
    std::vector<std::vector<MetricsRecord>> parts(static_cast<std::size_t>(cfg.cases));
    parallel_for(cfg.cases, cfg.threads, [&](int c) {
        auto& out = parts[static_cast<std::size_t>(c)];
        const int t = case_time(cfg, c);
        const GridState& truth = truth_at(data, t);
        const std::uint64_t seed = case_seed(cfg, c);
        const GridState x_hat = forecast(truth_at(data, t - model.lead_intervals), model.lead_intervals, cfg.system, cfg.grid);
        for (double sigma : cfg.sigmas) {
            for (int m : cfg.m_cols) {
                AssimilationConfig acfg;
                acfg.softbleed = SoftbleedConfig::with_sigma(sigma);
                acfg.resample_count = cfg.resample_count;
                acfg.seed = derive_seed(seed, {kAssimTag});
                const ObservationSet obs = observe_case(cfg, truth, m, SamplingStrategy::fixed, 0, seed);
                const auto res = assimilate(x_hat, obs, model.params, model.schedule, acfg, data.clim);
                append_rmse_records(out, proto("ablation", c, m, sigma, 0, "analysis"), res.analysis.values,
                                    truth.values);
            }
        }
    });
    return flatten(parts);
}

double mean_of(const std::vector<MetricsRecord>& records, const RecordFilter& f) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : records) {
        if (!f.metric.empty() && r.metric != f.metric) continue;
        if (!f.variable.empty() && r.variable != f.variable) continue;
        if (f.m_cols >= 0 && r.m_cols != f.m_cols) continue;
        if (f.sigma_g >= 0.0 && r.sigma_g != f.sigma_g) continue;
        if (f.index >= 0 && r.index != f.index) continue;
        if (f.index_min >= 0 && r.index < f.index_min) continue;
        if (f.index_max >= 0 && r.index > f.index_max) continue;
        sum += r.value;
        ++n;
    }
    return n == 0 ? std::nan("") : sum / n;
}

void write_ablation_table(const std::filesystem::path& path, const std::vector<MetricsRecord>& records,
                          const ExperimentConfig& cfg) {
    std::vector<std::string> variables;
    for (int l = 0; l < cfg.grid.levels; ++l) variables.push_back("level" + std::to_string(l));
    variables.push_back("all");

    std::string out = "variable,m_cols";
    for (double s : cfg.sigmas) out += ",sigma_" + format_number(s);
    out += "\n";
    for (const auto& v : variables) {
        for (int m : cfg.m_cols) {
            out += v + "," + std::to_string(m);
            for (double s : cfg.sigmas) {
                RecordFilter f;
                f.metric = "analysis";
                f.variable = v;
                f.m_cols = m;
                f.sigma_g = s;
                out += "," + format_number(mean_of(records, f));
            }
            out += "\n";
        }
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw FormatError("cannot write " + path.string());
    file << out;
}

}  // namespace diffassim
