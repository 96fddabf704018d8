#include "diffassim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "diffassim/error.hpp"
#include "diffassim/observation.hpp"

namespace diffassim {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw UsageError("config: '" + where + "' must be an object");
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw UsageError("config: unknown key '" + where + (where.empty() ? "" : ".") + k + "'");
}

template <class T>
void take(const json& j, const char* key, T& into, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        into = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw UsageError("config: '" + where + "." + key + "' has the wrong type");
    }
}

}  // namespace

TrainConfig ExperimentConfig::default_train() {
    TrainConfig t;
    t.total_steps = 4000;
    t.lr_start = 1e-4;
    t.lr_peak = 1e-3;
    t.lr_end = 3e-5;
    return t;
}

void ExperimentConfig::validate() const {
    static const std::set<std::string> kinds = {"single_step", "autoregressive", "forecast_on_assimilated", "ablation",
                                                "postprocess"};
    if (!kinds.count(experiment)) throw UsageError("config: unknown experiment '" + experiment + "'");
    grid.validate();
    if (static_cast<int>(system.forcing.size()) != grid.levels)
        throw UsageError("config: forcing has " + std::to_string(system.forcing.size()) + " entries for " +
                         std::to_string(grid.levels) + " levels");
    system.validate(grid);
    if (arch.levels != grid.levels) throw UsageError("config: denoiser levels differ from grid levels");
    arch.validate();
    train.validate();
    require(spinup_steps >= 0, "config: spinup_steps must be >= 0");
    require(train_intervals > 0, "config: train_intervals must be > 0");
    require(diffusion_steps >= 1, "config: diffusion steps must be >= 1");
    require(sigma_g > 0.0, "config: sigma_g must be > 0");
    require(diameter == 0 || (diameter > 0 && diameter % 2 == 1), "config: diameter must be odd or 0");
    require(resample_count >= 1, "config: resample_count must be >= 1");
    for (int m : m_cols) require(m >= 0 && m <= grid.points, "config: m_cols entries must lie in [0, points]");
    for (int m : cycle_m_cols) require(m >= 0 && m <= grid.points, "config: cycle_m_cols entries must lie in [0, points]");
    for (double s : sigmas) require(s > 0.0, "config: sigmas must be > 0");
    parse_strategy(strategy);
    require(cases >= 1, "config: need at least one case");
    require(runs >= 1, "config: runs must be >= 1");
    require(cycles >= 1, "config: cycles must be >= 1");
    require(lead >= 1, "config: lead must be >= 1");
    for (int d : delta_ladder) require(d >= 0, "config: delta ladder entries must be >= 0");
    require(case_stride >= 1, "config: case_stride must be >= 1");
    require(threads >= 1, "config: threads must be >= 1");
}

ExperimentConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    ExperimentConfig c;
    reject_unknown(root, {"experiment", "grid", "system", "data", "diffusion", "denoiser", "train", "assimilation",
                          "experiments", "seed", "threads", "paths"},
                   "");
    take(root, "experiment", c.experiment, "");
    take(root, "seed", c.seed, "");
    take(root, "threads", c.threads, "");

    if (root.contains("grid")) {
        const auto& g = root["grid"];
        reject_unknown(g, {"points", "levels", "dt", "steps_per_interval"}, "grid");
        take(g, "points", c.grid.points, "grid");
        take(g, "levels", c.grid.levels, "grid");
        take(g, "dt", c.grid.dt, "grid");
        take(g, "steps_per_interval", c.grid.steps_per_interval, "grid");
    }
    c.arch.levels = c.grid.levels;
    if (static_cast<int>(c.system.forcing.size()) != c.grid.levels)
        c.system.forcing.assign(static_cast<std::size_t>(std::max(c.grid.levels, 0)),
                                c.system.forcing.empty() ? 15.0 : c.system.forcing.front());
    if (root.contains("system")) {
        const auto& s = root["system"];
        reject_unknown(s, {"forcing", "coupling", "model_bias", "smoothing"}, "system");
        if (s.contains("forcing")) {
            if (s["forcing"].is_number())
                c.system.forcing.assign(static_cast<std::size_t>(std::max(c.grid.levels, 0)), s["forcing"].get<double>());
            else
                take(s, "forcing", c.system.forcing, "system");
        }
        take(s, "coupling", c.system.coupling, "system");
        take(s, "model_bias", c.system.model_bias, "system");
        take(s, "smoothing", c.system.smoothing, "system");
    }
    if (root.contains("data")) {
        const auto& d = root["data"];
        reject_unknown(d, {"spinup_steps", "train_intervals", "train_seed", "test_seed", "case_offset", "case_stride"},
                       "data");
        take(d, "spinup_steps", c.spinup_steps, "data");
        take(d, "train_intervals", c.train_intervals, "data");
        take(d, "train_seed", c.train_seed, "data");
        take(d, "test_seed", c.test_seed, "data");
        take(d, "case_offset", c.case_offset, "data");
        take(d, "case_stride", c.case_stride, "data");
    }
    if (root.contains("diffusion")) {
        const auto& d = root["diffusion"];
        reject_unknown(d, {"steps", "beta_start", "beta_end"}, "diffusion");
        take(d, "steps", c.diffusion_steps, "diffusion");
        take(d, "beta_start", c.beta_start, "diffusion");
        take(d, "beta_end", c.beta_end, "diffusion");
    }
    if (root.contains("denoiser")) {
        const auto& d = root["denoiser"];
        reject_unknown(d, {"hidden", "kernel", "blocks", "embed_dim"}, "denoiser");
        take(d, "hidden", c.arch.hidden, "denoiser");
        take(d, "kernel", c.arch.kernel, "denoiser");
        take(d, "blocks", c.arch.blocks, "denoiser");
        take(d, "embed_dim", c.arch.embed_dim, "denoiser");
    }
    if (root.contains("train")) {
        const auto& t = root["train"];
        reject_unknown(t, {"total_steps", "batch_size", "lr_start", "lr_peak", "lr_end", "warmup_fraction",
                           "weight_decay", "beta1", "beta2", "eps", "seed"},
                       "train");
        take(t, "total_steps", c.train.total_steps, "train");
        take(t, "batch_size", c.train.batch_size, "train");
        take(t, "lr_start", c.train.lr_start, "train");
        take(t, "lr_peak", c.train.lr_peak, "train");
        take(t, "lr_end", c.train.lr_end, "train");
        take(t, "warmup_fraction", c.train.warmup_fraction, "train");
        take(t, "weight_decay", c.train.weight_decay, "train");
        take(t, "beta1", c.train.beta1, "train");
        take(t, "beta2", c.train.beta2, "train");
        take(t, "eps", c.train.eps, "train");
        take(t, "seed", c.train.seed, "train");
    }
    if (root.contains("assimilation")) {
        const auto& a = root["assimilation"];
        reject_unknown(a, {"sigma_g", "diameter", "resample_count"}, "assimilation");
        take(a, "sigma_g", c.sigma_g, "assimilation");
        take(a, "diameter", c.diameter, "assimilation");
        take(a, "resample_count", c.resample_count, "assimilation");
    }
    if (root.contains("experiments")) {
        const auto& e = root["experiments"];
        reject_unknown(e, {"m_cols", "sigmas", "cycle_m_cols", "strategy", "cases", "runs", "cycles", "lead",
                           "delta_ladder"},
                       "experiments");
        take(e, "m_cols", c.m_cols, "experiments");
        take(e, "sigmas", c.sigmas, "experiments");
        take(e, "cycle_m_cols", c.cycle_m_cols, "experiments");
        take(e, "strategy", c.strategy, "experiments");
        take(e, "cases", c.cases, "experiments");
        take(e, "runs", c.runs, "experiments");
        take(e, "cycles", c.cycles, "experiments");
        take(e, "lead", c.lead, "experiments");
        take(e, "delta_ladder", c.delta_ladder, "experiments");
    }
    if (root.contains("paths")) {
        const auto& p = root["paths"];
        reject_unknown(p, {"model_long", "model_short", "out"}, "paths");
        take(p, "model_long", c.model_long, "paths");
        take(p, "model_short", c.model_short, "paths");
        take(p, "out", c.out_dir, "paths");
    }
    c.train.lead_intervals = c.lead;
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_json(const ExperimentConfig& c) {
    json j;
    j["experiment"] = c.experiment;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["grid"] = {{"points", c.grid.points},
                 {"levels", c.grid.levels},
                 {"dt", c.grid.dt},
                 {"steps_per_interval", c.grid.steps_per_interval}};
    j["system"] = {{"forcing", c.system.forcing},
                   {"coupling", c.system.coupling},
                   {"model_bias", c.system.model_bias},
                   {"smoothing", c.system.smoothing}};
    j["data"] = {{"spinup_steps", c.spinup_steps}, {"train_intervals", c.train_intervals},
                 {"train_seed", c.train_seed},     {"test_seed", c.test_seed},
                 {"case_offset", c.case_offset},   {"case_stride", c.case_stride}};
    j["diffusion"] = {{"steps", c.diffusion_steps}, {"beta_start", c.beta_start}, {"beta_end", c.beta_end}};
    j["denoiser"] = {{"hidden", c.arch.hidden},
                     {"kernel", c.arch.kernel},
                     {"blocks", c.arch.blocks},
                     {"embed_dim", c.arch.embed_dim}};
    j["train"] = {{"total_steps", c.train.total_steps}, {"batch_size", c.train.batch_size},
                  {"lr_start", c.train.lr_start},       {"lr_peak", c.train.lr_peak},
                  {"lr_end", c.train.lr_end},           {"warmup_fraction", c.train.warmup_fraction},
                  {"weight_decay", c.train.weight_decay}, {"beta1", c.train.beta1},
                  {"beta2", c.train.beta2},             {"eps", c.train.eps},
                  {"seed", c.train.seed}};
    j["assimilation"] = {{"sigma_g", c.sigma_g}, {"diameter", c.diameter}, {"resample_count", c.resample_count}};
    j["experiments"] = {{"m_cols", c.m_cols},   {"sigmas", c.sigmas}, {"cycle_m_cols", c.cycle_m_cols},
                        {"strategy", c.strategy}, {"cases", c.cases},   {"runs", c.runs},
                        {"cycles", c.cycles},   {"lead", c.lead},     {"delta_ladder", c.delta_ladder}};
    j["paths"] = {{"model_long", c.model_long}, {"model_short", c.model_short}, {"out", c.out_dir}};
    return j.dump(2) + "\n";
}

}  // namespace diffassim
