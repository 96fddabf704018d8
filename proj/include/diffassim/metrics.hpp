#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "diffassim/field.hpp"

namespace diffassim {

/// Unweighted root mean square difference over every level and point.
double rmse(const Field& a, const Field& b);
double rmse(const GridState& a, const GridState& b);
/// One value per level.
std::vector<double> rmse_per_level(const Field& a, const Field& b);

struct MetricsRecord {
    std::string experiment;
    int case_id = 0;
    std::string variable;  // "level<l>" or "all"
    int m_cols = 0;
    double sigma_g = 0.0;
    int index = 0;  // lead or cycle index, 0 when not applicable
    std::string metric;
    double value = 0.0;
};

inline const char* kMetricsHeader = "experiment,case,variable,m_cols,sigma_g,index,metric,value";

/// Appends per-level rows and an "all" row for one comparison.
void append_rmse_records(std::vector<MetricsRecord>& out, const MetricsRecord& proto, const Field& estimate,
                         const Field& truth);

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRecord>& records);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records);

/// Shortest round-trip text for a double; stable across runs.
std::string format_number(double v);

}  // namespace diffassim
