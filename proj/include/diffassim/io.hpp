#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "diffassim/assimilate.hpp"
#include "diffassim/denoiser.hpp"
#include "diffassim/diffusion.hpp"
#include "diffassim/dynamics.hpp"
#include "diffassim/observation.hpp"

namespace diffassim {

// Binary container shared by datasets, checkpoints and analyses:
//   "DDAK" | u32 version | u32 header length | UTF-8 JSON header |
//   little-endian float32 arrays in the order listed under "arrays".

inline constexpr char kContainerMagic[4] = {'D', 'D', 'A', 'K'};
inline constexpr std::uint32_t kContainerVersion = 1;

class BadMagicError : public FormatError {
public:
    using FormatError::FormatError;
};
class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};
class TruncatedError : public FormatError {
public:
    using FormatError::FormatError;
};

struct NamedArray {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<float> data;
};

/// Header is serialized JSON text; "arrays" and "endianness" are filled in
/// by the writer.
void write_container(const std::filesystem::path& path, const std::string& header_json,
                     const std::vector<NamedArray>& arrays);

struct Container {
    std::string header_json;
    std::vector<NamedArray> arrays;
};

Container read_container(const std::filesystem::path& path);

void save_dataset(const std::filesystem::path& path, const TrajectoryDataset& dataset);
TrajectoryDataset load_dataset(const std::filesystem::path& path);

struct Checkpoint {
    DenoiserParams params;
    NoiseSchedule schedule;
    int lead_intervals = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Analyses in the dataset container (kind "analysis") plus a JSON
/// diagnostics sidecar at `<path>.json`.
void save_analyses(const std::filesystem::path& path, const std::vector<AnalysisResult>& results,
                   const AssimilationConfig& cfg);
std::vector<GridState> load_analyses(const std::filesystem::path& path);

/// One observation set per assimilation step.
struct ObservationStream {
    int points = 0;
    int levels = 0;
    std::vector<std::int64_t> steps;
    std::vector<ObservationSet> sets;
    std::string strategy = "fixed";
    std::uint64_t seed = 0;
    SoftbleedConfig softbleed;
};

/// CSV (step, level, k, value) plus `<path>.json` sidecar with strategy,
/// seed, sigma_g, d and the grid extents.
void write_observations(const std::filesystem::path& path, const ObservationStream& stream);
ObservationStream read_observations(const std::filesystem::path& path);

/// CSV with columns time_index, level, k, value.
void write_trajectory_csv(const std::filesystem::path& path, const std::vector<GridState>& states);

}  // namespace diffassim
