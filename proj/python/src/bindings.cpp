#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "diffassim/experiments.hpp"

namespace py = pybind11;
using namespace diffassim;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Field to_field(const Array& a, const char* what) {
    if (a.ndim() != 2) throw UsageError(std::string(what) + ": expected a (levels, points) array");
    const auto L = static_cast<int>(a.shape(0)), K = static_cast<int>(a.shape(1));
    return Field(L, K, std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_field(const Field& f) {
    Array out({f.levels(), f.points()});
    std::copy(f.values().begin(), f.values().end(), out.mutable_data());
    return out;
}

Array from_states(const std::vector<GridState>& states, const GridSpec& spec) {
    Array out({static_cast<py::ssize_t>(states.size()), static_cast<py::ssize_t>(spec.levels),
               static_cast<py::ssize_t>(spec.points)});
    double* p = out.mutable_data();
    for (const auto& s : states) p = std::copy(s.values.values().begin(), s.values.values().end(), p);
    return out;
}

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

ClimatologyStats climatology_of(const Array& states) {
    if (states.ndim() != 3) throw UsageError("climatology: expected a (n, levels, points) array");
    TrajectoryDataset ds;
    ds.spec.levels = static_cast<int>(states.shape(1));
    ds.spec.points = static_cast<int>(states.shape(2));
    const std::size_t per = static_cast<std::size_t>(ds.spec.levels) * ds.spec.points;
    for (py::ssize_t i = 0; i < states.shape(0); ++i) {
        const double* p = states.data() + i * per;
        ds.truth_states.push_back({Field(ds.spec.levels, ds.spec.points, std::vector<double>(p, p + per)), i});
    }
    return compute_climatology(ds);
}

ObservationSet make_obs(const std::vector<int>& columns, const Array& values, int points) {
    ObservationSet obs;
    obs.op = ObservationOperator(points, columns);
    if (values.ndim() != 2 || static_cast<std::size_t>(values.shape(1)) != columns.size())
        throw UsageError("observations: values must be (levels, len(columns))");
    obs.levels = static_cast<int>(values.shape(0));
    obs.values = to_vector(values);
    return obs;
}

AssimilationConfig assim_cfg(const ExperimentConfig& cfg, std::optional<double> sigma_g,
                             std::optional<int> resample_count, std::uint64_t seed) {
    auto a = assimilation_config(cfg, sigma_g.value_or(cfg.sigma_g), seed);
    if (resample_count) a.resample_count = *resample_count;
    a.validate();
    return a;
}

py::list records_to_python(const std::vector<MetricsRecord>& rec) {
    py::list out;
    for (const auto& r : rec) {
        py::dict d;
        d["experiment"] = r.experiment;
        d["case"] = r.case_id;
        d["variable"] = r.variable;
        d["m_cols"] = r.m_cols;
        d["sigma_g"] = r.sigma_g;
        d["index"] = r.index;
        d["metric"] = r.metric;
        d["value"] = r.value;
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Diffusion-based data assimilation on a multi-level Lorenz-96 system";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<ExperimentConfig>(m, "Config")
        .def(py::init<>())
        .def_static("from_json", &parse_config, py::arg("text"))
        .def_static("load", [](const std::string& path) { return load_config(path); }, py::arg("path"))
        .def("to_json", [](const ExperimentConfig& c) { return to_json(c); })
        .def_readwrite("experiment", &ExperimentConfig::experiment)
        .def_property_readonly("points", [](const ExperimentConfig& c) { return c.grid.points; })
        .def_property_readonly("levels", [](const ExperimentConfig& c) { return c.grid.levels; })
        .def_readwrite("lead", &ExperimentConfig::lead)
        .def_readwrite("cases", &ExperimentConfig::cases)
        .def_readwrite("cycles", &ExperimentConfig::cycles)
        .def_readwrite("sigma_g", &ExperimentConfig::sigma_g)
        .def_readwrite("resample_count", &ExperimentConfig::resample_count)
        .def_readwrite("m_cols", &ExperimentConfig::m_cols)
        .def_readwrite("sigmas", &ExperimentConfig::sigmas)
        .def_readwrite("strategy", &ExperimentConfig::strategy)
        .def_readwrite("seed", &ExperimentConfig::seed)
        .def_readwrite("threads", &ExperimentConfig::threads)
        .def("__repr__", [](const ExperimentConfig& c) {
            std::ostringstream s;
            s << "<Config " << c.experiment << " K=" << c.grid.points << " L=" << c.grid.levels << " lead=" << c.lead
              << ">";
            return s.str();
        });

    py::class_<Checkpoint>(m, "Model")
        .def_static("load", [](const std::string& path) { return load_checkpoint(path); }, py::arg("path"))
        .def("save", [](const Checkpoint& c, const std::string& path) { save_checkpoint(path, c); }, py::arg("path"))
        .def_property_readonly("lead", [](const Checkpoint& c) { return c.lead_intervals; })
        .def_property_readonly("parameter_count", [](const Checkpoint& c) { return c.params.theta.size(); })
        .def_property_readonly("diffusion_steps", [](const Checkpoint& c) { return c.schedule.steps(); })
        .def_property_readonly("train_digest", [](const Checkpoint& c) { return c.params.train_digest; });

    m.def(
        "linear_schedule",
        [](int n, double beta_start, double beta_end) {
            const auto s = build_linear_schedule(n, beta_start, beta_end);
            return py::make_tuple(s.betas(), s.alpha_bars());
        },
        py::arg("steps"), py::arg("beta_start") = 1e-4, py::arg("beta_end") = 0.02,
        "Returns (betas, alpha_bars); alpha_bars[0] is 1.");

    m.def(
        "simulate",
        [](const ExperimentConfig& cfg, int intervals, std::uint64_t seed) {
            const auto ds = generate_truth_trajectory(cfg.grid, cfg.system, cfg.spinup_steps, intervals, seed);
            return from_states(ds.truth_states, cfg.grid);
        },
        py::arg("config"), py::arg("intervals"), py::arg("seed") = 0, "Truth trajectory as an (n, levels, points) array.");

    m.def(
        "forecast",
        [](const ExperimentConfig& cfg, const Array& state, int intervals) {
            return from_field(forecast(GridState{to_field(state, "forecast"), 0}, intervals, cfg.system, cfg.grid).values);
        },
        py::arg("config"), py::arg("state"), py::arg("intervals"), "Runs the (biased) forecast model.");

    m.def("climatology", [](const Array& states) {
        const auto c = climatology_of(states);
        return py::make_tuple(c.mean, c.std);
    }, py::arg("states"), "Per-level (mean, std) of an (n, levels, points) array.");

    m.def(
        "sample_columns",
        [](int points, int m_cols, const std::string& strategy, std::int64_t step, std::uint64_t seed) {
            return sample_columns(points, m_cols, parse_strategy(strategy), step, seed).columns;
        },
        py::arg("points"), py::arg("m_cols"), py::arg("strategy") = "fixed", py::arg("step") = 0, py::arg("seed") = 0);

    m.def(
        "softbleed",
        [](const std::vector<double>& mask, double sigma_g, int diameter) {
            SoftbleedConfig c = SoftbleedConfig::with_sigma(sigma_g);
            if (diameter > 0) c.diameter = diameter;
            return softbleed(mask, c);
        },
        py::arg("mask"), py::arg("sigma_g"), py::arg("diameter") = 0);

    m.def(
        "interpolate",
        [](const std::vector<int>& columns, const Array& values, int points, const std::vector<double>& clim_mean,
           const std::vector<double>& clim_std, double sigma_g) {
            return from_field(interpolate(make_obs(columns, values, points), ClimatologyStats{clim_mean, clim_std},
                                          SoftbleedConfig::with_sigma(sigma_g), points));
        },
        py::arg("columns"), py::arg("values"), py::arg("points"), py::arg("clim_mean"), py::arg("clim_std"),
        py::arg("sigma_g"));

    m.def("rmse", [](const Array& a, const Array& b) { return rmse(to_field(a, "rmse"), to_field(b, "rmse")); });

    m.def(
        "train_model",
        [](const ExperimentConfig& cfg, int lead) {
            py::gil_scoped_release release;
            return train_model(cfg, lead);
        },
        py::arg("config"), py::arg("lead"));

    m.def(
        "assimilate",
        [](const Checkpoint& model, const ExperimentConfig& cfg, const Array& background, const std::vector<int>& columns,
           const Array& values, const std::vector<double>& clim_mean, const std::vector<double>& clim_std,
           std::uint64_t seed, std::optional<double> sigma_g, std::optional<int> resample_count) {
            const Field bg = to_field(background, "assimilate");
            const auto obs = make_obs(columns, values, bg.points());
            const auto acfg = assim_cfg(cfg, sigma_g, resample_count, seed);
            py::gil_scoped_release release;
            const auto res = assimilate(GridState{bg, 0}, obs, model.params, model.schedule, acfg,
                                        ClimatologyStats{clim_mean, clim_std});
            py::gil_scoped_acquire acquire;
            return from_field(res.analysis.values);
        },
        py::arg("model"), py::arg("config"), py::arg("background"), py::arg("columns"), py::arg("values"),
        py::arg("clim_mean"), py::arg("clim_std"), py::arg("seed") = 0, py::arg("sigma_g") = py::none(),
        py::arg("resample_count") = py::none());

    m.def(
        "post_process",
        [](const Checkpoint& model, const ExperimentConfig& cfg, const Array& background, std::uint64_t seed,
           std::optional<int> resample_count) {
            const auto acfg = assim_cfg(cfg, std::nullopt, resample_count, seed);
            return from_field(
                post_process(GridState{to_field(background, "post_process"), 0}, model.params, model.schedule, acfg)
                    .analysis.values);
        },
        py::arg("model"), py::arg("config"), py::arg("background"), py::arg("seed") = 0,
        py::arg("resample_count") = py::none());

    m.def(
        "run_experiment",
        [](const ExperimentConfig& cfg, const Checkpoint& long_model, std::optional<Checkpoint> short_model) {
            std::vector<MetricsRecord> rec;
            {
                py::gil_scoped_release release;
                const auto data = make_experiment_data(cfg);
                if (cfg.experiment == "single_step") rec = run_single_step(cfg, data, long_model);
                else if (cfg.experiment == "postprocess") rec = run_postprocess(cfg, data, long_model);
                else if (cfg.experiment == "forecast_on_assimilated") rec = run_forecast_on_assimilated(cfg, data, long_model);
                else if (cfg.experiment == "ablation") rec = run_sigma_ablation(cfg, data, long_model);
                else if (cfg.experiment == "autoregressive") {
                    if (!short_model) throw UsageError("autoregressive runs need short_model");
                    rec = run_autoregressive(cfg, data, long_model, *short_model);
                } else throw UsageError("unknown experiment " + cfg.experiment);
            }
            return records_to_python(rec);
        },
        py::arg("config"), py::arg("long_model"), py::arg("short_model") = py::none(),
        "Runs cfg.experiment and returns metrics rows as dicts.");
}
