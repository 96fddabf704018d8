#include "diffassim/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "diffassim/metrics.hpp"

namespace diffassim {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
    std::uint32_t v;
    std::memcpy(&v, in.data() + at, 4);
    return v;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void dump(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + path.string());
}

json parse_header(const std::string& text, const fs::path& where) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(where.string() + ": malformed header: " + e.what());
    }
}

template <class T>
T field_of(const json& j, const char* key, const fs::path& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw FormatError(where.string() + ": header field '" + key + "' missing or invalid");
    }
}

json spec_json(const GridSpec& s) {
    return {{"points", s.points}, {"levels", s.levels}, {"dt", s.dt}, {"steps_per_interval", s.steps_per_interval}};
}

GridSpec spec_from(const json& j, const fs::path& p) {
    GridSpec s;
    s.points = field_of<int>(j, "points", p);
    s.levels = field_of<int>(j, "levels", p);
    s.dt = field_of<double>(j, "dt", p);
    s.steps_per_interval = field_of<int>(j, "steps_per_interval", p);
    return s;
}

json params_json(const SystemParams& q) {
    return {{"forcing", q.forcing}, {"coupling", q.coupling}, {"model_bias", q.model_bias}, {"smoothing", q.smoothing}};
}

SystemParams params_from(const json& j, const fs::path& p) {
    SystemParams q;
    q.forcing = field_of<std::vector<double>>(j, "forcing", p);
    q.coupling = field_of<double>(j, "coupling", p);
    q.model_bias = field_of<double>(j, "model_bias", p);
    q.smoothing = j.value("smoothing", 1);
    return q;
}

json norm_json(const NormStats& n) {
    return {{"state_mean", n.state_mean}, {"state_std", n.state_std}, {"residual_scale", n.residual_scale}};
}

NormStats norm_from(const json& j, const fs::path& p) {
    NormStats n;
    n.state_mean = field_of<std::vector<double>>(j, "state_mean", p);
    n.state_std = field_of<std::vector<double>>(j, "state_std", p);
    n.residual_scale = field_of<std::vector<double>>(j, "residual_scale", p);
    return n;
}

NamedArray pack_states(const std::string& name, const std::vector<GridState>& states, int levels, int points) {
    NamedArray a;
    a.name = name;
    a.shape = {states.size(), static_cast<std::size_t>(levels), static_cast<std::size_t>(points)};
    a.data.reserve(states.size() * static_cast<std::size_t>(levels * points));
    for (const auto& s : states)
        for (double v : s.values.storage()) a.data.push_back(static_cast<float>(v));
    return a;
}

std::vector<GridState> unpack_states(const NamedArray& a, const std::vector<std::int64_t>& times, int levels,
                                     int points, const fs::path& p) {
    if (a.shape.size() != 3 || a.shape[1] != static_cast<std::size_t>(levels) ||
        a.shape[2] != static_cast<std::size_t>(points) || a.shape[0] != times.size())
        throw FormatError(p.string() + ": array '" + a.name + "' has inconsistent shape");
    std::vector<GridState> out;
    const std::size_t n = static_cast<std::size_t>(levels * points);
    for (std::size_t i = 0; i < a.shape[0]; ++i) {
        std::vector<double> v(a.data.begin() + static_cast<std::ptrdiff_t>(i * n),
                              a.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
        out.push_back({Field(levels, points, std::move(v)), times[i]});
    }
    return out;
}

std::vector<std::int64_t> times_of(const std::vector<GridState>& states) {
    std::vector<std::int64_t> t;
    for (const auto& s : states) t.push_back(s.time_index);
    return t;
}

const NamedArray& find_array(const Container& c, const std::string& name, const fs::path& p) {
    for (const auto& a : c.arrays)
        if (a.name == name) return a;
    throw FormatError(p.string() + ": missing array '" + name + "'");
}

std::string expect_kind(const json& h, const std::string& kind, const fs::path& p) {
    const auto k = field_of<std::string>(h, "kind", p);
    if (k != kind) throw FormatError(p.string() + ": expected a " + kind + " file, found '" + k + "'");
    return k;
}

fs::path sidecar(const fs::path& p) { return fs::path(p.string() + ".json"); }

}  // namespace

void write_container(const fs::path& path, const std::string& header_json, const std::vector<NamedArray>& arrays) {
    json header = header_json.empty() ? json::object() : json::parse(header_json);
    header["endianness"] = "little";
    json list = json::array();
    for (const auto& a : arrays) {
        std::size_t n = 1;
        for (auto d : a.shape) n *= d;
        if (n != a.data.size()) throw UsageError("array '" + a.name + "' shape does not match its data");
        list.push_back({{"name", a.name}, {"shape", a.shape}, {"dtype", "float32"}});
    }
    header["arrays"] = list;
    const std::string text = header.dump();

    std::string bytes(kContainerMagic, 4);
    put_u32(bytes, kContainerVersion);
    put_u32(bytes, static_cast<std::uint32_t>(text.size()));
    bytes += text;
    for (const auto& a : arrays)
        bytes.append(reinterpret_cast<const char*>(a.data.data()), a.data.size() * sizeof(float));
    dump(path, bytes);
}

Container read_container(const fs::path& path) {
    const std::string bytes = slurp(path);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kContainerMagic, 4) != 0)
        throw BadMagicError(path.string() + ": not a DDAK file");
    if (bytes.size() < 12) throw TruncatedError(path.string() + ": truncated preamble");
    const std::uint32_t version = get_u32(bytes, 4);
    if (version != kContainerVersion)
        throw VersionError(path.string() + ": unsupported DDAK version " + std::to_string(version) + " (expected " +
                           std::to_string(kContainerVersion) + ")");
    const std::uint32_t hlen = get_u32(bytes, 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(hlen))
        throw TruncatedError(path.string() + ": header length " + std::to_string(hlen) + " exceeds file size");

    Container c;
    c.header_json = bytes.substr(12, hlen);
    const json header = parse_header(c.header_json, path);
    if (header.value("endianness", "little") != "little")
        throw FormatError(path.string() + ": unsupported endianness");

    std::size_t at = 12 + hlen;
    for (const auto& d : field_of<json>(header, "arrays", path)) {
        NamedArray a;
        a.name = field_of<std::string>(d, "name", path);
        a.shape = field_of<std::vector<std::size_t>>(d, "shape", path);
        std::size_t n = 1;
        for (auto s : a.shape) n *= s;
        const std::size_t nbytes = n * sizeof(float);
        if (bytes.size() - at < nbytes)
            throw TruncatedError(path.string() + ": array '" + a.name + "' needs " + std::to_string(nbytes) +
                                 " bytes, " + std::to_string(bytes.size() - at) + " remain");
        a.data.resize(n);
        std::memcpy(a.data.data(), bytes.data() + at, nbytes);
        at += nbytes;
        c.arrays.push_back(std::move(a));
    }
    if (at != bytes.size())
        throw TruncatedError(path.string() + ": " + std::to_string(bytes.size() - at) + " trailing bytes");
    return c;
}

void save_dataset(const fs::path& path, const TrajectoryDataset& ds) {
    ds.spec.validate();
    json h;
    h["kind"] = "dataset";
    h["spec"] = spec_json(ds.spec);
    h["params"] = params_json(ds.params);
    h["lead_intervals"] = ds.lead_intervals;
    h["counts"] = {{"truth", ds.truth_states.size()}, {"forecast", ds.forecast_states.size()}};
    h["truth_time_index"] = times_of(ds.truth_states);
    h["forecast_time_index"] = times_of(ds.forecast_states);
    json stats = json::object();
    if (!ds.truth_states.empty()) {
        try {
            const auto clim = compute_climatology(ds);
            stats["climatology"] = {{"mean", clim.mean}, {"std", clim.std}};
            if (ds.pair_count() > 0) stats["norm"] = norm_json(compute_norm_stats(ds));
        } catch (const NumericalError&) {
        }
    }
    h["statistics"] = stats;
    write_container(path, h.dump(),
                    {pack_states("truth", ds.truth_states, ds.spec.levels, ds.spec.points),
                     pack_states("forecast", ds.forecast_states, ds.spec.levels, ds.spec.points)});
}

TrajectoryDataset load_dataset(const fs::path& path) {
    const Container c = read_container(path);
    const json h = parse_header(c.header_json, path);
    expect_kind(h, "dataset", path);
    TrajectoryDataset ds;
    ds.spec = spec_from(field_of<json>(h, "spec", path), path);
    ds.params = params_from(field_of<json>(h, "params", path), path);
    ds.lead_intervals = field_of<int>(h, "lead_intervals", path);
    ds.truth_states = unpack_states(find_array(c, "truth", path), field_of<std::vector<std::int64_t>>(h, "truth_time_index", path),
                                    ds.spec.levels, ds.spec.points, path);
    ds.forecast_states =
        unpack_states(find_array(c, "forecast", path), field_of<std::vector<std::int64_t>>(h, "forecast_time_index", path),
                      ds.spec.levels, ds.spec.points, path);
    const auto& counts = field_of<json>(h, "counts", path);
    if (field_of<std::size_t>(counts, "truth", path) != ds.truth_states.size() ||
        field_of<std::size_t>(counts, "forecast", path) != ds.forecast_states.size())
        throw FormatError(path.string() + ": state counts disagree with header");
    return ds;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ck) {
    ck.params.validate();
    const auto& a = ck.params.arch;
    json h;
    h["kind"] = "checkpoint";
    h["arch"] = {{"levels", a.levels}, {"hidden", a.hidden}, {"kernel", a.kernel}, {"blocks", a.blocks},
                 {"embed_dim", a.embed_dim}};
    h["norm"] = norm_json(ck.params.norm);
    h["schedule"] = {{"N", ck.schedule.steps()},
                     {"beta_start", ck.schedule.beta_start},
                     {"beta_end", ck.schedule.beta_end},
                     {"schedule_kind", ck.schedule.kind}};
    if (ck.schedule.kind != "linear") h["schedule"]["betas"] = ck.schedule.betas();
    h["train_digest"] = ck.params.train_digest;
    h["lead_intervals"] = ck.lead_intervals;
    h["parameter_count"] = ck.params.theta.size();

    std::vector<NamedArray> arrays;
    json order = json::array();
    for (const auto& g : parameter_groups(a)) {
        NamedArray arr;
        arr.name = g.name;
        arr.shape = {static_cast<std::size_t>(g.rows), static_cast<std::size_t>(g.cols)};
        arr.data.assign(ck.params.theta.begin() + static_cast<std::ptrdiff_t>(g.offset),
                        ck.params.theta.begin() + static_cast<std::ptrdiff_t>(g.offset + g.size()));
        order.push_back(g.name);
        arrays.push_back(std::move(arr));
    }
    h["parameter_groups"] = order;
    write_container(path, h.dump(), arrays);
}

Checkpoint load_checkpoint(const fs::path& path) {
    const Container c = read_container(path);
    const json h = parse_header(c.header_json, path);
    expect_kind(h, "checkpoint", path);
    Checkpoint ck;
    const json& a = field_of<json>(h, "arch", path);
    auto& arch = ck.params.arch;
    arch.levels = field_of<int>(a, "levels", path);
    arch.hidden = field_of<int>(a, "hidden", path);
    arch.kernel = field_of<int>(a, "kernel", path);
    arch.blocks = field_of<int>(a, "blocks", path);
    arch.embed_dim = field_of<int>(a, "embed_dim", path);
    try {
        arch.validate();
    } catch (const UsageError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    ck.params.norm = norm_from(field_of<json>(h, "norm", path), path);
    ck.params.train_digest = h.value("train_digest", "");
    ck.lead_intervals = field_of<int>(h, "lead_intervals", path);

    const json& s = field_of<json>(h, "schedule", path);
    const auto kind = field_of<std::string>(s, "schedule_kind", path);
    if (kind == "linear") {
        ck.schedule = build_linear_schedule(field_of<int>(s, "N", path), field_of<double>(s, "beta_start", path),
                                            field_of<double>(s, "beta_end", path));
    } else {
        ck.schedule = NoiseSchedule(field_of<std::vector<double>>(s, "betas", path));
    }

    const std::size_t expected = parameter_count(arch);
    if (field_of<std::size_t>(h, "parameter_count", path) != expected)
        throw FormatError(path.string() + ": parameter count " + std::to_string(h["parameter_count"].get<std::size_t>()) +
                          " does not match architecture (" + std::to_string(expected) + ")");
    ck.params.theta.assign(expected, 0.0f);
    for (const auto& g : parameter_groups(arch)) {
        const NamedArray& arr = find_array(c, g.name, path);
        if (arr.data.size() != g.size())
            throw FormatError(path.string() + ": group '" + g.name + "' has " + std::to_string(arr.data.size()) +
                              " values, expected " + std::to_string(g.size()));
        std::copy(arr.data.begin(), arr.data.end(), ck.params.theta.begin() + static_cast<std::ptrdiff_t>(g.offset));
    }
    std::size_t total = 0;
    for (const auto& arr : c.arrays) total += arr.data.size();
    if (total != expected) throw FormatError(path.string() + ": total parameter count mismatch");
    try {
        ck.params.validate();
    } catch (const Error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return ck;
}

void save_analyses(const fs::path& path, const std::vector<AnalysisResult>& results, const AssimilationConfig& cfg) {
    std::vector<GridState> states;
    for (const auto& r : results) states.push_back(r.analysis);
    const int levels = states.empty() ? 0 : states.front().levels();
    const int points = states.empty() ? 0 : states.front().points();
    json h;
    h["kind"] = "analysis";
    h["levels"] = levels;
    h["points"] = points;
    h["time_index"] = times_of(states);
    h["counts"] = {{"analysis", states.size()}};
    write_container(path, h.dump(), {pack_states("analysis", states, levels, points)});

    json diag;
    diag["resample_count"] = cfg.resample_count;
    diag["sigma_g"] = cfg.softbleed.sigma_g;
    diag["diameter"] = cfg.softbleed.diameter;
    diag["config_digest"] = cfg.digest();
    json items = json::array();
    for (const auto& r : results)
        items.push_back({{"time_index", r.analysis.time_index}, {"seed", r.seed}, {"step_norms", r.step_norms}});
    diag["analyses"] = items;
    dump(sidecar(path), diag.dump(2) + "\n");
}

std::vector<GridState> load_analyses(const fs::path& path) {
    const Container c = read_container(path);
    const json h = parse_header(c.header_json, path);
    expect_kind(h, "analysis", path);
    return unpack_states(find_array(c, "analysis", path), field_of<std::vector<std::int64_t>>(h, "time_index", path),
                         field_of<int>(h, "levels", path), field_of<int>(h, "points", path), path);
}

void write_observations(const fs::path& path, const ObservationStream& stream) {
    if (stream.steps.size() != stream.sets.size()) throw UsageError("observation steps and sets differ in length");
    std::string out = "step,level,k,value\n";
    for (std::size_t i = 0; i < stream.sets.size(); ++i) {
        const auto& o = stream.sets[i];
        o.validate();
        for (int l = 0; l < o.levels; ++l)
            for (std::size_t c = 0; c < o.op.columns.size(); ++c)
                out += std::to_string(stream.steps[i]) + "," + std::to_string(l) + "," +
                       std::to_string(o.op.columns[c]) + "," + format_number(o.y(l, c)) + "\n";
    }
    dump(path, out);

    json meta;
    meta["strategy"] = stream.strategy;
    meta["seed"] = stream.seed;
    meta["sigma_g"] = stream.softbleed.sigma_g;
    meta["d"] = stream.softbleed.diameter;
    meta["points"] = stream.points;
    meta["levels"] = stream.levels;
    meta["steps"] = stream.steps;
    dump(sidecar(path), meta.dump(2) + "\n");
}

ObservationStream read_observations(const fs::path& path) {
    ObservationStream s;
    const json meta = parse_header(slurp(sidecar(path)), sidecar(path));
    s.strategy = field_of<std::string>(meta, "strategy", path);
    s.seed = field_of<std::uint64_t>(meta, "seed", path);
    s.softbleed.sigma_g = field_of<double>(meta, "sigma_g", path);
    s.softbleed.diameter = field_of<int>(meta, "d", path);
    s.points = field_of<int>(meta, "points", path);
    s.levels = field_of<int>(meta, "levels", path);
    s.steps = field_of<std::vector<std::int64_t>>(meta, "steps", path);

    // step -> (k -> per-level values)
    std::map<std::int64_t, std::map<int, std::vector<double>>> rows;
    std::istringstream in(slurp(path));
    std::string line;
    if (!std::getline(in, line) || line != "step,level,k,value")
        throw FormatError(path.string() + ": expected header 'step,level,k,value'");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string f[4];
        for (auto& x : f)
            if (!std::getline(ls, x, ',')) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": short row");
        std::int64_t step;
        int level, k;
        double value;
        try {
            step = std::stoll(f[0]);
            level = std::stoi(f[1]);
            k = std::stoi(f[2]);
            value = std::stod(f[3]);
        } catch (const std::exception&) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": unparsable row");
        }
        if (level < 0 || level >= s.levels || k < 0 || k >= s.points)
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": level or k out of range");
        auto& col = rows[step][k];
        col.resize(static_cast<std::size_t>(s.levels), std::nan(""));
        col[static_cast<std::size_t>(level)] = value;
    }

    for (auto step : s.steps) {
        ObservationSet o;
        o.levels = s.levels;
        o.op.points = s.points;
        const auto it = rows.find(step);
        if (it != rows.end()) {
            for (const auto& [k, col] : it->second) o.op.columns.push_back(k);
            o.values.assign(static_cast<std::size_t>(s.levels) * o.op.columns.size(), 0.0);
            std::size_t c = 0;
            for (const auto& [k, col] : it->second) {
                for (int l = 0; l < s.levels; ++l) {
                    if (std::isnan(col[static_cast<std::size_t>(l)]))
                        throw FormatError(path.string() + ": step " + std::to_string(step) + " column " +
                                          std::to_string(k) + " lacks level " + std::to_string(l));
                    o.values[static_cast<std::size_t>(l) * o.op.columns.size() + c] = col[static_cast<std::size_t>(l)];
                }
                ++c;
            }
        }
        try {
            o.validate();
        } catch (const UsageError& e) {
            throw FormatError(path.string() + ": " + e.what());
        }
        s.sets.push_back(std::move(o));
    }
    return s;
}

void write_trajectory_csv(const fs::path& path, const std::vector<GridState>& states) {
    std::string out = "time_index,level,k,value\n";
    for (const auto& s : states)
        for (int l = 0; l < s.levels(); ++l)
            for (int k = 0; k < s.points(); ++k)
                out += std::to_string(s.time_index) + "," + std::to_string(l) + "," + std::to_string(k) + "," +
                       format_number(s.values(l, k)) + "\n";
    dump(path, out);
}

}  // namespace diffassim
