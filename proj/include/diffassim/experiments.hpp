#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "diffassim/config.hpp"
#include "diffassim/io.hpp"
#include "diffassim/metrics.hpp"

namespace diffassim {

/// Shared inputs of every driver: a held-out truth trajectory and the
/// climatology of the training trajectory.
struct ExperimentData {
    TrajectoryDataset test;  // truth only
    ClimatologyStats clim;
};

NoiseSchedule schedule_of(const ExperimentConfig& cfg);
AssimilationConfig assimilation_config(const ExperimentConfig& cfg, double sigma_g, std::uint64_t seed);

/// Training trajectory with forecasts of the given lead attached.
TrajectoryDataset make_training_dataset(const ExperimentConfig& cfg, int lead);
ExperimentData make_experiment_data(const ExperimentConfig& cfg);

/// Trains a model for `lead` intervals on make_training_dataset(cfg, lead).
Checkpoint train_model(const ExperimentConfig& cfg, int lead,
                       const std::function<void(const TrainLogEntry&)>& on_step = {});

/// Truth index of case c.
int case_time(const ExperimentConfig& cfg, int c);
/// Seed owned by case c, independent of every other case.
std::uint64_t case_seed(const ExperimentConfig& cfg, int c);

/// Per case and m: analysis, forecast, interpolation, mixture and
/// forecast_lead_<n> for n = 1..lead.
std::vector<MetricsRecord> run_single_step(const ExperimentConfig& cfg, const ExperimentData& data,
                                           const Checkpoint& long_model);

/// Per case: postprocess and forecast.
std::vector<MetricsRecord> run_postprocess(const ExperimentConfig& cfg, const ExperimentData& data,
                                           const Checkpoint& long_model);

/// Per run, m in cycle_m_cols and cycle index 1..cycles: analysis,
/// background and interpolation. Uses cfg.strategy.
std::vector<MetricsRecord> run_autoregressive(const ExperimentConfig& cfg, const ExperimentData& data,
                                              const Checkpoint& long_model, const Checkpoint& short_model);

/// Per case and m: forecast_from_analysis at the configured lead (index =
/// lead) and forecast_from_truth at lead + delta (index = delta).
std::vector<MetricsRecord> run_forecast_on_assimilated(const ExperimentConfig& cfg, const ExperimentData& data,
                                                       const Checkpoint& long_model);

/// Analysis RMSE over sigmas x m_cols x cases.
std::vector<MetricsRecord> run_sigma_ablation(const ExperimentConfig& cfg, const ExperimentData& data,
                                              const Checkpoint& long_model);

/// Case-averaged ablation table: one row per (variable, m_cols), one
/// column per sigma.
void write_ablation_table(const std::filesystem::path& path, const std::vector<MetricsRecord>& records,
                          const ExperimentConfig& cfg);

/// Arithmetic mean of the matching records' values, summed in input order.
/// Negative m_cols / index and empty strings act as wildcards; NaN if none match.
struct RecordFilter {
    std::string metric;
    std::string variable = "all";
    int m_cols = -1;
    double sigma_g = -1.0;
    int index = -1;
    int index_min = -1;
    int index_max = -1;
};
double mean_of(const std::vector<MetricsRecord>& records, const RecordFilter& filter);

/// Runs `task(c)` for c in [0, count) on `threads` workers.
void parallel_for(int count, int threads, const std::function<void(int)>& task);

}  // namespace diffassim
