#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "diffassim/experiments.hpp"

namespace fs = std::filesystem;
using namespace diffassim;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "experiment config (JSON)");
    app->add_option("--seed", c.seed, "master seed");
    app->add_option("--out", c.out, "output directory");
    app->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(const Common& c) {
    ExperimentConfig cfg = c.config.empty() ? parse_config("{}") : load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.out) cfg.out_dir = *c.out;
    if (c.threads) cfg.threads = *c.threads;
    cfg.validate();
    return cfg;
}

fs::path out_path(const ExperimentConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.out_dir);
    return fs::path(cfg.out_dir) / name;
}

void snapshot(const ExperimentConfig& cfg) {
    std::ofstream(out_path(cfg, "config.resolved.json"), std::ios::binary) << to_json(cfg);
}

Checkpoint load_model(const std::string& flag, const std::string& fallback, const char* what) {
    const std::string p = flag.empty() ? fallback : flag;
    if (p.empty()) throw UsageError(std::string("no ") + what + " model given");
    return load_checkpoint(p);
}

/// States of an analysis file, or the forecast states of a dataset.
std::vector<GridState> load_states(const fs::path& path) {
    const Container c = read_container(path);
    if (c.header_json.find("\"kind\":\"dataset\"") != std::string::npos) return load_dataset(path).forecast_states;
    return load_analyses(path);
}

std::vector<GridState> load_truth(const fs::path& path) {
    const Container c = read_container(path);
    if (c.header_json.find("\"kind\":\"dataset\"") != std::string::npos) return load_dataset(path).truth_states;
    return load_analyses(path);
}

void save_states(const fs::path& path, const std::vector<GridState>& states, const AssimilationConfig& acfg) {
    std::vector<AnalysisResult> wrapped;
    for (const auto& s : states) wrapped.push_back({s, {}, acfg.seed, acfg.digest()});
    save_analyses(path, wrapped, acfg);
}

void write_train_log(const fs::path& path, const std::vector<TrainLogEntry>& log) {
    std::ofstream out(path, std::ios::binary);
    out << "step,lr,loss\n";
    for (const auto& e : log) out << e.step << ',' << format_number(e.lr) << ',' << format_number(e.loss) << '\n';
}

int run(int argc, char** argv) {
    CLI::App app{"Diffusion-based data assimilation on a multi-level Lorenz-96 ring"};
    app.require_subcommand(1);
    Common common;

    auto* simulate = app.add_subcommand("simulate", "integrate a truth trajectory");
    add_common(simulate, common);
    int intervals = 0, obs_cols = -1;
    std::string strategy = "fixed";
    simulate->add_option("--intervals", intervals, "recorded intervals (default: train_intervals)");
    simulate->add_option("--obs-cols", obs_cols, "also write column observations of every state");
    simulate->add_option("--strategy", strategy, "fixed|resampled");

    auto* make_dataset = app.add_subcommand("make-dataset", "truth trajectory with paired forecasts");
    add_common(make_dataset, common);
    int lead = 0;
    make_dataset->add_option("--lead", lead, "forecast lead in intervals");

    auto* train_cmd = app.add_subcommand("train", "train a denoiser for one forecast lead");
    add_common(train_cmd, common);
    std::string dataset_path;
    train_cmd->add_option("--lead", lead, "forecast lead in intervals");
    train_cmd->add_option("--dataset", dataset_path, "dataset file (default: generated from config)");

    auto* assim = app.add_subcommand("assimilate", "assimilate observations into forecasts");
    add_common(assim, common);
    std::string model_path, background_path, obs_path;
    double sigma_g = 0.0;
    int u = 0;
    assim->add_option("--model", model_path, "checkpoint")->required();
    assim->add_option("--background", background_path, "forecast states (dataset or analysis file)")->required();
    assim->add_option("--obs", obs_path, "observation CSV")->required();
    assim->add_option("--sigma-g", sigma_g, "softbleed sigma");
    assim->add_option("--u", u, "resampling passes");

    auto* post = app.add_subcommand("postprocess", "correct forecasts without observations");
    add_common(post, common);
    post->add_option("--model", model_path, "checkpoint")->required();
    post->add_option("--background", background_path, "forecast states (dataset or analysis file)")->required();
    post->add_option("--u", u, "resampling passes");

    auto* cycle = app.add_subcommand("cycle", "autoregressive forecast-analysis cycling");
    add_common(cycle, common);
    std::string model_long, model_short, cyc_strategy;
    int cycles = 0;
    cycle->add_option("--strategy", cyc_strategy, "fixed|resampled");
    cycle->add_option("--cycles", cycles, "cycle count");
    cycle->add_option("--model-long", model_long, "long-lead checkpoint");
    cycle->add_option("--model-short", model_short, "one-interval checkpoint");

    auto* fc = app.add_subcommand("forecast", "run the forecast model from stored states");
    add_common(fc, common);
    std::string input_path;
    fc->add_option("--input", input_path, "analysis file or dataset (truth states)")->required();
    fc->add_option("--intervals", intervals, "forecast length in intervals")->required();

    auto* evaluate = app.add_subcommand("evaluate", "run the experiment named in the config");
    add_common(evaluate, common);
    evaluate->add_option("--model-long", model_long, "long-lead checkpoint");
    evaluate->add_option("--model-short", model_short, "one-interval checkpoint");

    auto* ablate = app.add_subcommand("ablate", "softbleed sigma sweep");
    add_common(ablate, common);
    ablate->add_option("--model-long", model_long, "long-lead checkpoint");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    ExperimentConfig cfg = resolve(common);
    snapshot(cfg);

    if (*simulate) {
        const int n = intervals > 0 ? intervals : cfg.train_intervals;
        auto ds = generate_truth_trajectory(cfg.grid, cfg.system, cfg.spinup_steps, n, cfg.seed);
        save_dataset(out_path(cfg, "truth.ddak"), ds);
        write_trajectory_csv(out_path(cfg, "truth.csv"), ds.truth_states);
        if (obs_cols >= 0) {
            ObservationStream s;
            s.points = cfg.grid.points;
            s.levels = cfg.grid.levels;
            s.strategy = strategy;
            s.seed = cfg.seed;
            s.softbleed = SoftbleedConfig::with_sigma(cfg.sigma_g);
            const auto strat = parse_strategy(strategy);
            for (std::size_t i = 0; i < ds.truth_states.size(); ++i) {
                const auto& st = ds.truth_states[i];
                s.steps.push_back(st.time_index);
                s.sets.push_back(observe(st.values, sample_columns(cfg.grid.points, obs_cols, strat,
                                                                   static_cast<std::int64_t>(i), cfg.seed)));
            }
            write_observations(out_path(cfg, "observations.csv"), s);
        }
    } else if (*make_dataset) {
        const int l = lead > 0 ? lead : cfg.lead;
        save_dataset(out_path(cfg, "dataset_lead" + std::to_string(l) + ".ddak"), make_training_dataset(cfg, l));
    } else if (*train_cmd) {
        const int l = lead > 0 ? lead : cfg.lead;
        const auto ds = dataset_path.empty() ? make_training_dataset(cfg, l) : load_dataset(dataset_path);
        TrainConfig tc = cfg.train;
        tc.lead_intervals = ds.lead_intervals;
        Checkpoint ck;
        ck.schedule = schedule_of(cfg);
        ck.lead_intervals = ds.lead_intervals;
        auto result = train(ds, tc, ck.schedule, cfg.arch, [&](const TrainLogEntry& e) {
            if (e.step % 500 == 0 || e.step + 1 == tc.total_steps)
                std::fprintf(stderr, "step %d lr %.3g loss %.5f\n", e.step, e.lr, e.loss);
        });
        ck.params = std::move(result.params);
        save_checkpoint(out_path(cfg, "model_lead" + std::to_string(ck.lead_intervals) + ".ddak"), ck);
        write_train_log(out_path(cfg, "train_log_lead" + std::to_string(ck.lead_intervals) + ".csv"), result.log);
    } else if (*assim || *post) {
        const Checkpoint ck = load_checkpoint(model_path);
        const auto backgrounds = load_states(background_path);
        if (u > 0) cfg.resample_count = u;
        std::vector<AnalysisResult> results;
        AssimilationConfig acfg;
        if (*assim) {
            const ObservationStream s = read_observations(obs_path);
            acfg = assimilation_config(cfg, sigma_g > 0 ? sigma_g : s.softbleed.sigma_g, cfg.seed);
            if (sigma_g <= 0) acfg.softbleed = s.softbleed;
            const auto clim = make_experiment_data(cfg).clim;
            for (const auto& b : backgrounds) {
                const auto it = std::find(s.steps.begin(), s.steps.end(), b.time_index);
                if (it == s.steps.end()) continue;
                AssimilationConfig c = acfg;
                c.seed = cycle_seed(cfg.seed, static_cast<std::size_t>(b.time_index));
                results.push_back(assimilate(b, s.sets[static_cast<std::size_t>(it - s.steps.begin())], ck.params,
                                             ck.schedule, c, clim));
            }
            if (results.empty()) throw FormatError("no background time matches an observation step");
            save_analyses(out_path(cfg, "analysis.ddak"), results, acfg);
        } else {
            acfg = assimilation_config(cfg, cfg.sigma_g, cfg.seed);
            for (const auto& b : backgrounds) {
                AssimilationConfig c = acfg;
                c.seed = cycle_seed(cfg.seed, static_cast<std::size_t>(b.time_index));
                results.push_back(post_process(b, ck.params, ck.schedule, c));
            }
            save_analyses(out_path(cfg, "postprocess.ddak"), results, acfg);
        }
    } else if (*fc) {
        std::vector<GridState> out;
        for (const auto& s : load_truth(input_path)) out.push_back(forecast(s, intervals, cfg.system, cfg.grid));
        save_states(out_path(cfg, "forecast.ddak"), out, assimilation_config(cfg, cfg.sigma_g, cfg.seed));
    } else if (*cycle) {
        if (!cyc_strategy.empty()) cfg.strategy = cyc_strategy;
        if (cycles > 0) cfg.cycles = cycles;
        cfg.validate();
        snapshot(cfg);
        const auto data = make_experiment_data(cfg);
        const auto records = run_autoregressive(cfg, data, load_model(model_long, cfg.model_long, "long-lead"),
                                                load_model(model_short, cfg.model_short, "one-interval"));
        write_metrics_csv(out_path(cfg, "metrics.csv"), records);
    } else if (*evaluate) {
        const auto data = make_experiment_data(cfg);
        std::vector<MetricsRecord> records;
        const auto lm = [&] { return load_model(model_long, cfg.model_long, "long-lead"); };
        if (cfg.experiment == "single_step")
            records = run_single_step(cfg, data, lm());
        else if (cfg.experiment == "postprocess")
            records = run_postprocess(cfg, data, lm());
        else if (cfg.experiment == "forecast_on_assimilated")
            records = run_forecast_on_assimilated(cfg, data, lm());
        else if (cfg.experiment == "autoregressive")
            records = run_autoregressive(cfg, data, lm(), load_model(model_short, cfg.model_short, "one-interval"));
        else {
            records = run_sigma_ablation(cfg, data, lm());
            write_ablation_table(out_path(cfg, "ablation_table.csv"), records, cfg);
        }
        write_metrics_csv(out_path(cfg, "metrics.csv"), records);
    } else if (*ablate) {
        const auto data = make_experiment_data(cfg);
        const auto records = run_sigma_ablation(cfg, data, load_model(model_long, cfg.model_long, "long-lead"));
        write_metrics_csv(out_path(cfg, "metrics.csv"), records);
        write_ablation_table(out_path(cfg, "ablation_table.csv"), records, cfg);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
