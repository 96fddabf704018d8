#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "diffassim/denoiser.hpp"
#include "diffassim/dynamics.hpp"

namespace diffassim {

/// Everything an experiment run needs. Defaults describe the smoothed
/// testbed the experiments are tuned for; the library-level defaults of
/// GridSpec/SystemParams remain the classic Lorenz-96 values.
struct ExperimentConfig {
    std::string experiment = "single_step";  // single_step | autoregressive | forecast_on_assimilated | ablation | postprocess

    GridSpec grid;
    SystemParams system = SystemParams::uniform(4, 15.0, 0.5, 2.0, 4);

    // Data generation.
    int spinup_steps = 2000;
    int train_intervals = 4000;
    std::uint64_t train_seed = 1;
    std::uint64_t test_seed = 99;
    int case_offset = 9;
    int case_stride = 20;

    // Diffusion process and network.
    int diffusion_steps = 200;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    DenoiserArch arch;
    TrainConfig train = default_train();

    // Assimilation.
    double sigma_g = 2.5;
    int diameter = 0;  // 0 selects round(4 sigma) + 1
    int resample_count = 3;

    // Experiment grid.
    std::vector<int> m_cols = {4, 8, 16, 32, 40};
    std::vector<double> sigmas = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    std::vector<int> cycle_m_cols = {20, 32};
    std::string strategy = "resampled";
    int cases = 16;
    int runs = 1;  // autoregressive runs per configuration
    int cycles = 20;
    int lead = 8;
    std::vector<int> delta_ladder = {0, 1, 2, 3, 4, 5, 6, 7, 8};

    std::uint64_t seed = 0;
    int threads = 1;

    // Paths, empty when unused.
    std::string model_long;
    std::string model_short;
    std::string out_dir = "out";

    static TrainConfig default_train();
    void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Fully resolved configuration as pretty-printed JSON.
std::string to_json(const ExperimentConfig& cfg);

}  // namespace diffassim
