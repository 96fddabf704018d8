#include "diffassim/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include "diffassim/error.hpp"

namespace diffassim {

double rmse(const Field& a, const Field& b) {
    require_same_shape(a, b, "rmse");
    const auto x = a.values();
    const auto y = b.values();
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(x.size()));
}

double rmse(const GridState& a, const GridState& b) { return rmse(a.values, b.values); }

std::vector<double> rmse_per_level(const Field& a, const Field& b) {
    require_same_shape(a, b, "rmse");
    std::vector<double> out;
    for (int l = 0; l < a.levels(); ++l) {
        const auto x = a.level(l);
        const auto y = b.level(l);
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
        out.push_back(std::sqrt(acc / static_cast<double>(x.size())));
    }
    return out;
}

void append_rmse_records(std::vector<MetricsRecord>& out, const MetricsRecord& proto, const Field& estimate,
                         const Field& truth) {
    const auto per_level = rmse_per_level(estimate, truth);
    for (std::size_t l = 0; l < per_level.size(); ++l) {
        MetricsRecord r = proto;
        r.variable = "level" + std::to_string(l);
        r.value = per_level[l];
        out.push_back(std::move(r));
    }
    MetricsRecord r = proto;
    r.variable = "all";
    r.value = rmse(estimate, truth);
    out.push_back(std::move(r));
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRecord>& records) {
    os << kMetricsHeader << '\n';
    for (const auto& r : records)
        os << r.experiment << ',' << r.case_id << ',' << r.variable << ',' << r.m_cols << ','
           << format_number(r.sigma_g) << ',' << r.index << ',' << r.metric << ',' << format_number(r.value) << '\n';
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    write_metrics_csv(out, records);
}

}  // namespace diffassim
