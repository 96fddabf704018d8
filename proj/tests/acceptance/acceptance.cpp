// Acceptance run on the Lorenz-96 testbed. Prints one PASS/FAIL line per
// criterion and exits nonzero if any criterion fails.
//
//   acceptance <work_dir>
//
// Trained models are cached in the work directory next to the resolved
// configuration they were trained under and reused only on an exact match.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "diffassim/experiments.hpp"
#include "diffassim/random.hpp"

using namespace diffassim;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

std::vector<Outcome> g_outcomes;

void report(int id, const std::string& name, bool pass, const std::string& detail, Clock::time_point start) {
    Outcome o{id, name, pass, detail, std::chrono::duration<double>(Clock::now() - start).count()};
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(),
                o.seconds);
    std::fflush(stdout);
    g_outcomes.push_back(o);
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// ---------------------------------------------------------------- criterion 1

struct Checker {
    bool ok = true;
    std::string first_failure;
    void close(double got, double want, double tol, const std::string& what) {
        if (!(std::abs(got - want) <= tol)) {
            if (ok) first_failure = what + ": got " + fmt("%.17g", got) + ", want " + fmt("%.17g", want);
            ok = false;
        }
    }
};

std::vector<double> brute_softbleed(const std::vector<double>& mask, double sigma, int d) {
    const int K = static_cast<int>(mask.size());
    const int r = (d - 1) / 2;
    std::vector<double> out(mask.size(), 0.0);
    for (int k = 0; k < K; ++k)
        for (int o = -r; o <= r; ++o) {
            const int src = ((k - o) % K + K) % K;
            out[k] = std::max(out[k], mask[src] * std::exp(-double(o * o) / (2 * sigma * sigma)));
        }
    return out;
}

void criterion_math_kernels() {
    const auto start = Clock::now();
    Checker c;
    const double t12 = 1e-12;

    const auto s2 = build_linear_schedule(2, 1e-4, 0.02);
    c.close(s2.beta(1), 1e-4, t12, "beta_1");
    c.close(s2.beta(2), 0.02, t12, "beta_2");
    c.close(s2.alpha_bar(0), 1.0, 0.0, "alpha_bar_0");
    c.close(s2.alpha_bar(1), 0.9999, t12, "alpha_bar_1");
    c.close(s2.alpha_bar(2), 0.979902, t12, "alpha_bar_2");
    const auto s3 = build_linear_schedule(3, 0.3, 0.7);
    c.close(s3.beta(2), 0.5, t12, "midpoint beta");

    NoiseSchedule quarter({0.75});
    c.close(forward_diffuse(std::vector<double>{2.0}, 1, quarter, std::vector<double>{0.0})[0], 1.0, t12,
            "forward_diffuse signal");
    c.close(forward_diffuse(std::vector<double>{0.0}, 1, quarter, std::vector<double>{1.0})[0], std::sqrt(0.75), t12,
            "forward_diffuse noise");

    NoiseSchedule tenth({0.1});
    const double mu_expected = (1.0 - 0.1 / std::sqrt(0.1)) / std::sqrt(0.9);
    const double mu_one = reverse_mean(std::vector<double>{1.0}, std::vector<double>{1.0}, 1, tenth)[0];
    c.close(mu_one, mu_expected, t12, "reverse_mean");
    c.close(mu_expected, 0.720759, 5e-7, "reverse_mean printed value");
    c.close(reverse_step(std::vector<double>{1.0}, std::vector<double>{1.0}, 1, tenth, std::vector<double>{5.0})[0], mu_one,
            0.0, "reverse_step at j=1");
    const auto s50 = build_linear_schedule(50);
    const std::vector<double> xj = {0.3, -1.2, 2.0}, eps = {0.0, 0.0, 0.0}, zero = {0.0, 0.0, 0.0};
    const auto mu0 = reverse_mean(xj, eps, 17, s50);
    const auto st0 = reverse_step(xj, std::vector<double>{0.4, -0.1, 0.9}, 17, s50, zero);
    const auto mu1 = reverse_mean(xj, std::vector<double>{0.4, -0.1, 0.9}, 17, s50);
    for (int i = 0; i < 3; ++i) {
        c.close(mu0[i], xj[i] / std::sqrt(1.0 - s50.beta(17)), t12, "reverse_mean zero eps");
        c.close(st0[i], mu1[i], 0.0, "reverse_step zero noise");
    }

    SoftbleedConfig sb{1.0, 5};
    std::vector<double> mask(8, 0.0);
    mask[3] = 1.0;
    const auto soft = softbleed(mask, sb);
    const std::vector<double> expected = {0, std::exp(-2.0), std::exp(-0.5), 1, std::exp(-0.5), std::exp(-2.0), 0, 0};
    for (int k = 0; k < 8; ++k) c.close(soft[k], expected[k], 1e-14, "softbleed example");
    c.close(SoftbleedConfig::default_diameter(2.5), 11, 0.0, "default diameter");
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int K = 8 + static_cast<int>(rng() % 40);
        const double sigma = 0.5 + 0.01 * static_cast<double>(rng() % 250);
        const int d = 2 * static_cast<int>(rng() % 7) + 1;
        std::vector<double> m(static_cast<std::size_t>(K), 0.0);
        for (auto& v : m) v = (rng() % 5 == 0) ? 1.0 : 0.0;
        const auto got = softbleed(m, SoftbleedConfig{sigma, d});
        const auto want = brute_softbleed(m, sigma, d);
        for (int k = 0; k < K; ++k) c.close(got[k], want[k], 1e-14, "softbleed brute force");
    }

    Field u(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
    Field kn(2, 3, std::vector<double>{7, 8, 9, 10, 11, 12});
    const auto mixed = mix_step(u, kn, std::vector<double>{1.0, 0.0, 0.5});
    const std::vector<double> mixed_expected = {7, 2, 6, 10, 5, 9};
    for (int i = 0; i < 6; ++i) c.close(mixed.values()[i], mixed_expected[i], t12, "mix_step");

    c.close(rmse(Field(1, 2, std::vector<double>{0, 0}), Field(1, 2, std::vector<double>{3, 4})), std::sqrt(12.5),
            t12, "rmse");

    report(1, "math kernels", c.ok, c.ok ? "all examples within tolerance" : c.first_failure, start);
}

// ---------------------------------------------------------------- criterion 2

void criterion_gradient() {
    const auto start = Clock::now();
    DenoiserArch arch;
    arch.levels = 2;
    arch.hidden = 6;
    arch.kernel = 3;
    arch.blocks = 2;
    arch.embed_dim = 4;
    const auto schedule = build_linear_schedule(30);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    TrainingBatch batch;
    for (int b = 0; b < 3; ++b) {
        Field r(2, 10), x(2, 10), n(2, 10);
        for (double& v : r.values()) v = normal(rng);
        for (double& v : x.values()) v = normal(rng);
        for (double& v : n.values()) v = normal(rng);
        batch.residual.push_back(r);
        batch.xhat_norm.push_back(x);
        batch.noise.push_back(n);
        batch.steps.push_back(1 + static_cast<int>(rng() % 30));
    }
    std::vector<double> theta(parameter_count(arch));
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    for (double& t : theta) t = unif(rng);

    const auto lg = loss_and_grad<double>(arch, theta, batch, schedule);
    std::vector<std::size_t> coords(theta.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(std::min<std::size_t>(coords.size(), 250));
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i : coords) {
        const double t0 = theta[i];
        theta[i] = t0 + h;
        const double up = loss_and_grad<double>(arch, theta, batch, schedule).loss;
        theta[i] = t0 - h;
        const double down = loss_and_grad<double>(arch, theta, batch, schedule).loss;
        theta[i] = t0;
        const double fd = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(fd - lg.grad[i]) / std::max({std::abs(fd), std::abs(lg.grad[i]), 1e-6}));
    }
    const bool pass = coords.size() >= 200 && worst < 1e-4;
    report(2, "gradient check", pass,
           std::to_string(coords.size()) + " of " + std::to_string(theta.size()) +
               " coordinates, worst relative error " + fmt("%.3g", worst) + " (< 1e-4)",
           start);
}

// ------------------------------------------------------------- trained models

Checkpoint trained_model(const ExperimentConfig& cfg, int lead, const fs::path& work) {
    const fs::path ck_path = work / ("model_lead" + std::to_string(lead) + ".ddak");
    const fs::path cfg_path = work / ("model_lead" + std::to_string(lead) + ".config.json");
    const std::string resolved = to_json(cfg);
    if (fs::exists(ck_path) && fs::exists(cfg_path) && read_text(cfg_path) == resolved) {
        std::printf("reusing %s\n", ck_path.string().c_str());
        return load_checkpoint(ck_path);
    }
    const auto start = Clock::now();
    const int total = cfg.train.total_steps;
    const auto ck = train_model(cfg, lead, [&](const TrainLogEntry& e) {
        if ((e.step + 1) % 1000 == 0 || e.step + 1 == total)
            std::printf("  lead %d step %d/%d loss %.4f\n", lead, e.step + 1, total, e.loss);
        std::fflush(stdout);
    });
    std::printf("trained lead-%d model in %.1fs\n", lead,
                std::chrono::duration<double>(Clock::now() - start).count());
    save_checkpoint(ck_path, ck);
    std::ofstream(cfg_path, std::ios::binary) << resolved;
    return ck;
}

// ------------------------------------------------------------ criteria 3 and 4

void criterion_exact_recovery(const ExperimentConfig& cfg, const ExperimentData& data, const Checkpoint& model) {
    const auto start = Clock::now();
    const int K = cfg.grid.points;
    std::vector<int> all(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) all[static_cast<std::size_t>(k)] = k;
    double worst_state = 0.0, worst_forecast = 0.0;
    for (int c = 0; c < cfg.cases; ++c) {
        const int t = case_time(cfg, c);
        const GridState& truth = data.test.truth_states.at(static_cast<std::size_t>(t));
        const GridState x_hat =
            forecast(data.test.truth_states.at(static_cast<std::size_t>(t - cfg.lead)), cfg.lead, cfg.system, cfg.grid);
        const auto obs = observe(truth.values, ObservationOperator(K, all));
        const auto res = assimilate(x_hat, obs, model.params, model.schedule,
                                    assimilation_config(cfg, cfg.sigma_g, case_seed(cfg, c)), data.clim);
        const double norm = rmse(truth.values, Field(truth.levels(), K));
        worst_state = std::max(worst_state, rmse(res.analysis.values, truth.values) / norm);
        const auto fa = forecast(res.analysis, cfg.lead, cfg.system, cfg.grid);
        const auto ft = forecast(truth, cfg.lead, cfg.system, cfg.grid);
        worst_forecast = std::max(worst_forecast, rmse(fa.values, ft.values) / rmse(ft.values, Field(ft.levels(), K)));
    }
    report(3, "exact recovery", worst_state <= 1e-5 && worst_forecast <= 1e-3,
           "worst relative state error " + fmt("%.3g", worst_state) + " (<= 1e-5), worst relative forecast error " +
               fmt("%.3g", worst_forecast) + " (<= 1e-3) over " + std::to_string(cfg.cases) + " cases",
           start);
}

void criterion_degenerate(const ExperimentConfig& cfg, const ExperimentData& data, const Checkpoint& model) {
    const auto start = Clock::now();
    int identical = 0;
    const int checks = 4;
    for (int c = 0; c < checks; ++c) {
        const int t = case_time(cfg, c);
        const GridState x_hat =
            forecast(data.test.truth_states.at(static_cast<std::size_t>(t - cfg.lead)), cfg.lead, cfg.system, cfg.grid);
        const auto acfg = assimilation_config(cfg, cfg.sigma_g, case_seed(cfg, c));
        const auto empty = observe(data.test.truth_states.at(static_cast<std::size_t>(t)).values,
                                   ObservationOperator(cfg.grid.points, {}));
        const auto a = assimilate(x_hat, empty, model.params, model.schedule, acfg, data.clim);
        const auto p = post_process(x_hat, model.params, model.schedule, acfg);
        if (a.analysis.values == p.analysis.values && a.step_norms == p.step_norms) ++identical;
    }
    report(4, "degenerate case", identical == checks,
           std::to_string(identical) + "/" + std::to_string(checks) + " cases bit-identical to post_process", start);
}

// ---------------------------------------------------------------- criterion 5

void criterion_trend(const ExperimentConfig& cfg, const ExperimentData& data, const Checkpoint& model,
                     const fs::path& work) {
    const auto start = Clock::now();
    auto run_cfg = cfg;
    run_cfg.threads = worker_count();
    const auto rec = run_single_step(run_cfg, data, model);
    write_metrics_csv(work / "single_step_metrics.csv", rec);

    std::vector<double> analysis, interp, fc;
    std::string table;
    for (int m : cfg.m_cols) {
        analysis.push_back(mean_of(rec, {"analysis", "all", m}));
        interp.push_back(mean_of(rec, {"interpolation", "all", m}));
        fc.push_back(mean_of(rec, {"forecast", "all", m}));
        table += " m=" + std::to_string(m) + ":" + fmt("%.4f", analysis.back()) + "/" + fmt("%.4f", interp.back()) +
                 "/" + fmt("%.4f", fc.back());
    }
    std::printf("  analysis/interpolation/forecast RMSE:%s\n", table.c_str());

    int inversions = 0;
    bool small = true;
    for (std::size_t i = 1; i < analysis.size(); ++i) {
        if (analysis[i] > analysis[i - 1]) {
            ++inversions;
            small = small && (analysis[i] - analysis[i - 1]) <= 0.05 * analysis[i - 1];
        }
    }
    const bool monotone = inversions == 0 || (inversions == 1 && small);

    // With every column observed the interpolation is exact, so "below the
    // interpolation" cannot hold strictly there; the ordering is checked at
    // the densest partial coverage and the complete case must be exact.
    const int K = cfg.grid.points;
    std::size_t top = analysis.size() - 1;
    bool full_exact = true;
    if (cfg.m_cols[top] == K) {
        full_exact = analysis[top] <= 1e-4;
        --top;
    }
    const bool below_inputs = analysis[top] < interp[top] && analysis[top] < fc[top];
    const std::string literal = analysis.back() < interp.back() && analysis.back() < fc.back() ? "holds" : "fails";
    report(5, "convergence with observations", monotone && below_inputs && full_exact,
           std::to_string(inversions) + " inversion(s); at m=" + std::to_string(cfg.m_cols[top]) + " analysis " +
               fmt("%.4f", analysis[top]) + " < interpolation " + fmt("%.4f", interp[top]) + " and forecast " +
               fmt("%.4f", fc[top]) + (below_inputs ? " (yes)" : " (no)") + "; at m=" + std::to_string(K) +
               " analysis " + fmt("%.2g", analysis.back()) + " (<= 1e-4), strict ordering against exact interpolation " +
               literal,
           start);
}

// ---------------------------------------------------------------- criterion 6

void criterion_postprocess(const ExperimentConfig& cfg, const ExperimentData& data, const Checkpoint& model,
                           const fs::path& work) {
    const auto start = Clock::now();
    auto run_cfg = cfg;
    run_cfg.threads = worker_count();
    const auto rec = run_postprocess(run_cfg, data, model);
    write_metrics_csv(work / "postprocess_metrics.csv", rec);
    const double pp = mean_of(rec, {"postprocess"});
    const double fc = mean_of(rec, {"forecast"});
    report(6, "post-processing", pp <= fc,
           "mean RMSE post-processed " + fmt("%.4f", pp) + " vs forecast " + fmt("%.4f", fc) + " over " +
               std::to_string(cfg.cases) + " cases",
           start);
}

// ---------------------------------------------------------------- criterion 7

void criterion_cycling(const ExperimentConfig& cfg, const ExperimentData& data, const Checkpoint& long_model,
                       const Checkpoint& short_model, const fs::path& work) {
    const auto start = Clock::now();
    auto run_cfg = cfg;
    run_cfg.threads = worker_count();
    std::vector<int> dense;
    for (int m : cfg.cycle_m_cols)
        if (2 * m >= cfg.grid.points) dense.push_back(m);
    run_cfg.cycle_m_cols = dense;

    run_cfg.strategy = "resampled";
    const auto resampled = run_autoregressive(run_cfg, data, long_model, short_model);
    run_cfg.strategy = "fixed";
    const auto fixed = run_autoregressive(run_cfg, data, long_model, short_model);
    auto all = resampled;
    all.insert(all.end(), fixed.begin(), fixed.end());
    write_metrics_csv(work / "autoregressive_metrics.csv", all);

    for (int m : dense) {
        std::string curve;
        for (int i = 1; i <= cfg.cycles; ++i) curve += " " + fmt("%.3f", mean_of(fixed, {"analysis", "all", m, -1.0, i}));
        std::printf("  fixed-location analysis RMSE by cycle, m=%d:%s\n", m, curve.c_str());
    }

    bool pass = !dense.empty();
    std::string detail;
    for (int m : dense) {
        RecordFilter a{"analysis", "all", m};
        a.index_min = 5;
        a.index_max = 20;
        RecordFilter in = a;
        in.metric = "interpolation";
        const double ar = mean_of(resampled, a), ir = mean_of(resampled, in);
        pass = pass && ar < ir;
        detail += (detail.empty() ? "" : "; ") + std::string("m=") + std::to_string(m) + " analysis " +
                  fmt("%.4f", ar) + " vs interpolation " + fmt("%.4f", ir);
    }
    report(7, "autoregressive stability", pass, detail + " (cycles 5-20, resampled)", start);
}

// ---------------------------------------------------------------- criterion 8

void criterion_ablation(const ExperimentConfig& cfg, const ExperimentData& data, const Checkpoint& model,
                        const fs::path& work) {
    const auto start = Clock::now();
    auto run_cfg = cfg;
    run_cfg.threads = worker_count();
    const auto rec = run_sigma_ablation(run_cfg, data, model);
    write_metrics_csv(work / "ablation_metrics.csv", rec);
    write_ablation_table(work / "ablation_table.csv", rec, cfg);
    std::printf("%s", read_text(work / "ablation_table.csv").c_str());

    auto mean_at = [&](double sigma) {
        double sum = 0.0;
        for (int m : cfg.m_cols) sum += mean_of(rec, {"analysis", "all", m, sigma});
        return sum / static_cast<double>(cfg.m_cols.size());
    };
    const double base = mean_at(0.5);
    bool pass = true;
    std::string detail = "sigma 0.5: " + fmt("%.4f", base);
    for (double s : {1.5, 2.0, 2.5}) {
        const double v = mean_at(s);
        pass = pass && v < base;
        detail += ", " + fmt("%.1f", s) + ": " + fmt("%.4f", v);
    }
    report(8, "sigma ablation", pass, "mean analysis RMSE over m_cols, " + detail, start);
}

// ---------------------------------------------------------------- criterion 9

template <typename E, typename F>
bool throws_as(F&& f) {
    try {
        f();
    } catch (const E&) {
        return true;
    } catch (...) {
        return false;
    }
    return false;
}

void criterion_reproducibility(const ExperimentConfig& cfg, const ExperimentData& data, const Checkpoint& model,
                               const fs::path& work) {
    const auto start = Clock::now();
    auto run_cfg = cfg;
    run_cfg.threads = 1;
    run_cfg.cases = 2;
    run_cfg.m_cols = {8, 32};
    write_metrics_csv(work / "repro_a.csv", run_single_step(run_cfg, data, model));
    write_metrics_csv(work / "repro_b.csv", run_single_step(run_cfg, data, model));
    const bool csv_same = read_text(work / "repro_a.csv") == read_text(work / "repro_b.csv");

    save_checkpoint(work / "roundtrip_model.ddak", model);
    const auto ck = load_checkpoint(work / "roundtrip_model.ddak");
    const bool ck_same = ck.params.theta == model.params.theta && ck.params.arch == model.params.arch &&
                         ck.params.norm == model.params.norm && ck.schedule.betas() == model.schedule.betas() && ck.lead_intervals == model.lead_intervals;

    auto ds = data.test;
    ds.truth_states.resize(40);
    attach_forecasts(ds, 2);
    save_dataset(work / "roundtrip_data.ddak", ds);
    const auto back = load_dataset(work / "roundtrip_data.ddak");
    bool ds_same = back.truth_states.size() == ds.truth_states.size() &&
                   back.forecast_states.size() == ds.forecast_states.size() && back.lead_intervals == 2;
    for (std::size_t i = 0; ds_same && i < ds.truth_states.size(); ++i)
        ds_same = back.truth_states[i].values == ds.truth_states[i].values &&
                  back.truth_states[i].time_index == ds.truth_states[i].time_index;
    for (std::size_t i = 0; ds_same && i < ds.forecast_states.size(); ++i)
        ds_same = back.forecast_states[i].values == ds.forecast_states[i].values;

    const std::string good = read_text(work / "roundtrip_model.ddak");
    auto corrupt = [&](const std::string& name, const std::string& bytes) {
        const fs::path p = work / name;
        std::ofstream(p, std::ios::binary) << bytes;
        return p;
    };
    std::string bad_magic = good;
    bad_magic[0] = 'X';
    std::string bad_version = good;
    bad_version[4] = 9;
    const auto p_magic = corrupt("bad_magic.ddak", bad_magic);
    const auto p_version = corrupt("bad_version.ddak", bad_version);
    const auto p_short = corrupt("truncated.ddak", good.substr(0, good.size() - 17));
    const auto p_long = corrupt("trailing.ddak", good + "extra");
    const bool errors = throws_as<BadMagicError>([&] { load_checkpoint(p_magic); }) &&
                        throws_as<VersionError>([&] { load_checkpoint(p_version); }) &&
                        throws_as<TruncatedError>([&] { load_checkpoint(p_short); }) &&
                        throws_as<TruncatedError>([&] { load_checkpoint(p_long); }) &&
                        throws_as<FormatError>([&] { load_dataset(work / "roundtrip_model.ddak"); });

    auto yes = [](bool b) { return b ? std::string("yes") : std::string("no"); };
    report(9, "reproducibility and formats", csv_same && ck_same && ds_same && errors,
           "metrics CSV byte-identical: " + yes(csv_same) + ", checkpoint round trip: " + yes(ck_same) +
               ", dataset round trip: " + yes(ds_same) + ", corrupt files rejected: " + yes(errors),
           start);
}

// ------------------------------------------------------------------ property

// Mean absolute jump of the analysis between ring neighbours where one lies
// inside the soft-mask support and the other outside.
double boundary_jump(const Field& analysis, const std::vector<double>& soft) {
    const int K = analysis.points();
    double sum = 0.0;
    int count = 0;
    for (int k = 0; k < K; ++k) {
        const int n = (k + 1) % K;
        if ((soft[k] > 0.0) == (soft[n] > 0.0)) continue;
        for (int l = 0; l < analysis.levels(); ++l) {
            sum += std::abs(analysis(l, n) - analysis(l, k));
            ++count;
        }
    }
    return count ? sum / count : -1.0;
}

bool property_resampling(const ExperimentConfig& cfg, const ExperimentData& data, const Checkpoint& model) {
    double jump1 = 0.0, jump3 = 0.0;
    int n = 0;
    for (int c = 0; c < cfg.cases; ++c) {
        const int t = case_time(cfg, c);
        const GridState& truth = data.test.truth_states.at(static_cast<std::size_t>(t));
        const GridState x_hat =
            forecast(data.test.truth_states.at(static_cast<std::size_t>(t - cfg.lead)), cfg.lead, cfg.system, cfg.grid);
        auto rng = make_stream(case_seed(cfg, c), {0x7365616d});
        for (int m : {4, 8}) {
            const auto op = sample_columns(cfg.grid.points, m, SamplingStrategy::fixed, 0, rng());
            const auto obs = observe(truth.values, op);
            auto acfg = assimilation_config(cfg, cfg.sigma_g, case_seed(cfg, c));
            const auto soft = softbleed(hard_mask(op, cfg.grid.points), acfg.softbleed);
            acfg.resample_count = 1;
            const double j1 =
                boundary_jump(assimilate(x_hat, obs, model.params, model.schedule, acfg, data.clim).analysis.values, soft);
            acfg.resample_count = 3;
            const double j3 =
                boundary_jump(assimilate(x_hat, obs, model.params, model.schedule, acfg, data.clim).analysis.values, soft);
            if (j1 < 0) continue;
            jump1 += j1;
            jump3 += j3;
            ++n;
        }
    }
    jump1 /= n;
    jump3 /= n;
    const bool pass = jump3 <= jump1;
    std::printf("%s property (resampling does not widen the boundary jump): U=1 %.4f, U=3 %.4f over %d samples\n",
                pass ? "PASS" : "FAIL", jump1, jump3, n);
    std::fflush(stdout);
    return pass;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: acceptance <work_dir>\n");
        return 1;
    }
    const fs::path work = argv[1];
    fs::create_directories(work);
    const auto start = Clock::now();
    try {
        criterion_math_kernels();
        criterion_gradient();

        const ExperimentConfig cfg;
        std::ofstream(work / "config.resolved.json") << to_json(cfg);
        const auto data = make_experiment_data(cfg);
        const auto long_model = trained_model(cfg, cfg.lead, work);
        const auto short_model = trained_model(cfg, 1, work);

        criterion_exact_recovery(cfg, data, long_model);
        criterion_degenerate(cfg, data, long_model);
        criterion_trend(cfg, data, long_model, work);
        criterion_postprocess(cfg, data, long_model, work);
        criterion_cycling(cfg, data, long_model, short_model, work);
        criterion_ablation(cfg, data, long_model, work);
        criterion_reproducibility(cfg, data, long_model, work);
        const bool property = property_resampling(cfg, data, long_model);

        int failed = 0;
        for (const auto& o : g_outcomes) failed += o.pass ? 0 : 1;
        std::printf("%d/%zu criteria passed in %.1fs\n", static_cast<int>(g_outcomes.size()) - failed,
                    g_outcomes.size(), std::chrono::duration<double>(Clock::now() - start).count());
        return failed == 0 && property ? 0 : 1;
    } catch (const std::exception& e) {
        std::printf("FAIL acceptance aborted: %s\n", e.what());
        return 2;
    }
}
