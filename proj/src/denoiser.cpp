#include "diffassim/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "conv_net.hpp"
#include "digest.hpp"

namespace diffassim {

void DenoiserArch::validate() const {
    require(levels >= 1, "DenoiserArch: levels must be >= 1");
    require(hidden >= 1, "DenoiserArch: hidden must be >= 1");
    require(kernel >= 1 && kernel % 2 == 1, "DenoiserArch: kernel width must be odd");
    require(blocks >= 0, "DenoiserArch: blocks must be >= 0");
    require(embed_dim >= 2 && embed_dim % 2 == 0, "DenoiserArch: embed_dim must be even and >= 2");
}

std::vector<ParamGroup> parameter_groups(const DenoiserArch& a) {
    a.validate();
    std::vector<ParamGroup> groups;
    std::size_t offset = 0;
    auto add = [&](std::string name, int rows, int cols) {
        groups.push_back({std::move(name), rows, cols, offset});
        offset += groups.back().size();
    };
    add("in_conv.weight", a.kernel * 2 * a.levels, a.hidden);
    add("in_conv.bias", 1, a.hidden);
    add("time_embed.weight", a.embed_dim, a.hidden);
    add("time_embed.bias", 1, a.hidden);
    for (int b = 0; b < a.blocks; ++b) {
        const std::string p = "block" + std::to_string(b);
        add(p + ".conv1.weight", a.kernel * a.hidden, a.hidden);
        add(p + ".conv1.bias", 1, a.hidden);
        add(p + ".conv2.weight", a.kernel * a.hidden, a.hidden);
        add(p + ".conv2.bias", 1, a.hidden);
    }
    add("out_conv.weight", a.kernel * a.hidden, a.levels);
    add("out_conv.bias", 1, a.levels);
    return groups;
}

std::size_t parameter_count(const DenoiserArch& arch) {
    const auto groups = parameter_groups(arch);
    return groups.back().offset + groups.back().size();
}

void DenoiserParams::validate() const {
    arch.validate();
    require(theta.size() == parameter_count(arch), "DenoiserParams: parameter count does not match architecture");
    for (float v : theta) {
        if (!std::isfinite(v)) throw NumericalError("DenoiserParams: non-finite parameter");
    }
    norm.validate();
    require(norm.levels() == arch.levels, "DenoiserParams: normalization levels do not match architecture");
}

DenoiserParams init_denoiser(const DenoiserArch& arch, const NormStats& norm, std::uint64_t seed) {
    DenoiserParams p;
    p.arch = arch;
    p.norm = norm;
    p.theta.assign(parameter_count(arch), 0.0f);
    Rng rng = make_stream(seed, {0x696e6974ull});
    for (const auto& g : parameter_groups(arch)) {
        const bool is_weight = g.rows > 1 || g.name.ends_with(".weight");
        if (!is_weight || g.name.starts_with("out_conv")) continue;
        const double bound = 1.0 / std::sqrt(static_cast<double>(g.rows));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (std::size_t i = 0; i < g.size(); ++i) p.theta[g.offset + i] = static_cast<float>(u(rng));
    }
    return p;
}

std::vector<double> step_embedding(int j, int dim) {
    require(dim >= 2 && dim % 2 == 0, "step_embedding: dimension must be even");
    const int half = dim / 2;
    std::vector<double> e(static_cast<std::size_t>(dim));
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
        e[i] = std::sin(j * freq);
        e[half + i] = std::cos(j * freq);
    }
    return e;
}

namespace {

void check_levels(const Field& f, const NormStats& n, const char* what) {
    if (f.levels() != n.levels()) throw UsageError(std::string(what) + ": level count does not match NormStats");
}

}  // namespace

Field normalize_state(const Field& x, const NormStats& n) {
    check_levels(x, n, "normalize_state");
    Field out(x.levels(), x.points());
    for (int l = 0; l < x.levels(); ++l) {
        for (int k = 0; k < x.points(); ++k) out(l, k) = (x(l, k) - n.state_mean[l]) / n.state_std[l];
    }
    return out;
}

Field denormalize_state(const Field& z, const NormStats& n) {
    check_levels(z, n, "denormalize_state");
    Field out(z.levels(), z.points());
    for (int l = 0; l < z.levels(); ++l) {
        for (int k = 0; k < z.points(); ++k) out(l, k) = z(l, k) * n.state_std[l] + n.state_mean[l];
    }
    return out;
}

Field to_residual(const Field& truth, const Field& forecast, const NormStats& n) {
    require_same_shape(truth, forecast, "to_residual");
    check_levels(truth, n, "to_residual");
    Field out(truth.levels(), truth.points());
    for (int l = 0; l < truth.levels(); ++l) {
        for (int k = 0; k < truth.points(); ++k) out(l, k) = (truth(l, k) - forecast(l, k)) / n.residual_scale[l];
    }
    return out;
}

Field from_residual(const Field& forecast, const Field& r, const NormStats& n) {
    require_same_shape(forecast, r, "from_residual");
    check_levels(r, n, "from_residual");
    Field out(r.levels(), r.points());
    for (int l = 0; l < r.levels(); ++l) {
        for (int k = 0; k < r.points(); ++k) out(l, k) = forecast(l, k) + n.residual_scale[l] * r(l, k);
    }
    return out;
}

template <class T>
std::vector<T> eps_forward_batch(const DenoiserArch& arch, std::span<const T> theta, int batch, int points,
                                 std::span<const T> x_j, std::span<const T> xhat_norm, std::span<const int> steps) {
    detail::ConvNet<T> net(arch, theta);
    std::vector<T> out(static_cast<std::size_t>(batch) * arch.levels * points);
    net.forward(batch, points, x_j, xhat_norm, steps, out);
    return out;
}

template std::vector<float> eps_forward_batch<float>(const DenoiserArch&, std::span<const float>, int, int,
                                                     std::span<const float>, std::span<const float>,
                                                     std::span<const int>);
template std::vector<double> eps_forward_batch<double>(const DenoiserArch&, std::span<const double>, int, int,
                                                       std::span<const double>, std::span<const double>,
                                                       std::span<const int>);

struct NoisePredictor::Impl {
    explicit Impl(const DenoiserParams& p) : theta(p.theta), net(p.arch, theta), levels(p.arch.levels) {}
    std::vector<float> theta;
    detail::ConvNet<float> net;
    int levels;
    std::vector<float> xj, xh, out;
};

NoisePredictor::NoisePredictor(const DenoiserParams& params) {
    params.arch.validate();
    require(params.theta.size() == parameter_count(params.arch), "NoisePredictor: parameter count mismatch");
    impl_ = std::make_unique<Impl>(params);
}
NoisePredictor::~NoisePredictor() = default;
NoisePredictor::NoisePredictor(NoisePredictor&&) noexcept = default;
NoisePredictor& NoisePredictor::operator=(NoisePredictor&&) noexcept = default;

void NoisePredictor::predict(std::span<const double> x_j, std::span<const double> xhat_norm, int points, int j,
                             std::span<double> out) {
    auto& s = *impl_;
    const std::size_t n = static_cast<std::size_t>(s.levels) * points;
    if (x_j.size() != n || xhat_norm.size() != n || out.size() != n) {
        throw UsageError("NoisePredictor::predict: shape mismatch");
    }
    s.xj.assign(x_j.begin(), x_j.end());
    s.xh.assign(xhat_norm.begin(), xhat_norm.end());
    s.out.resize(n);
    const int step[1] = {j};
    s.net.forward(1, points, s.xj, s.xh, step, s.out);
    std::copy(s.out.begin(), s.out.end(), out.begin());
}

Field eps_forward(const DenoiserParams& params, const Field& x_j, const Field& xhat_norm, int j,
                  const NoiseSchedule& schedule) {
    require_same_shape(x_j, xhat_norm, "eps_forward");
    require(x_j.levels() == params.arch.levels, "eps_forward: level count does not match the model");
    if (j < 1 || j > schedule.steps()) throw UsageError("eps_forward: diffusion step out of range");
    NoisePredictor predictor(params);
    Field out(x_j.levels(), x_j.points());
    predictor.predict(x_j.values(), xhat_norm.values(), x_j.points(), j, out.values());
    return out;
}

PairSet make_pairs(const TrajectoryDataset& ds, const NormStats& norm) {
    PairSet pairs;
    pairs.residual.reserve(ds.pair_count());
    pairs.xhat_norm.reserve(ds.pair_count());
    for (std::size_t m = 0; m < ds.pair_count(); ++m) {
        const Field& xhat = ds.forecast_states[m].values;
        pairs.residual.push_back(to_residual(ds.truth_for_pair(m).values, xhat, norm));
        pairs.xhat_norm.push_back(normalize_state(xhat, norm));
    }
    return pairs;
}

TrainingBatch sample_batch(const PairSet& pairs, int batch_size, const NoiseSchedule& schedule, Rng& rng) {
    require(pairs.size() > 0, "sample_batch: no training pairs");
    require(batch_size >= 1, "sample_batch: batch size must be >= 1");
    std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
    std::uniform_int_distribution<int> step(1, schedule.steps());
    TrainingBatch b;
    for (int i = 0; i < batch_size; ++i) {
        const std::size_t m = pick(rng);
        b.residual.push_back(pairs.residual[m]);
        b.xhat_norm.push_back(pairs.xhat_norm[m]);
        b.steps.push_back(step(rng));
        Field noise(pairs.residual[m].levels(), pairs.residual[m].points());
        fill_normal(rng, noise.values());
        b.noise.push_back(std::move(noise));
    }
    return b;
}

template <class T>
LossGrad<T> loss_and_grad(const DenoiserArch& arch, std::span<const T> theta, const TrainingBatch& batch,
                          const NoiseSchedule& schedule, const OutputHook<T>& hook) {
    require(batch.size() > 0, "loss_and_grad: empty batch");
    const int n = static_cast<int>(batch.size());
    const int L = batch.residual[0].levels();
    const int K = batch.residual[0].points();
    require(L == arch.levels, "loss_and_grad: level count does not match architecture");
    const std::size_t per = static_cast<std::size_t>(L) * K;

    std::vector<T> xj(per * n), xh(per * n), eps(per * n);
    std::vector<double> diffused(per);
    for (int b = 0; b < n; ++b) {
        require(batch.residual[b].levels() == L && batch.residual[b].points() == K &&
                    batch.xhat_norm[b].same_shape(batch.residual[b]) && batch.noise[b].same_shape(batch.residual[b]),
                "loss_and_grad: inconsistent sample shapes");
        forward_diffuse(batch.residual[b].values(), batch.steps[b], schedule, batch.noise[b].values(), diffused);
        for (std::size_t i = 0; i < per; ++i) {
            xj[b * per + i] = static_cast<T>(diffused[i]);
            xh[b * per + i] = static_cast<T>(batch.xhat_norm[b].values()[i]);
            eps[b * per + i] = static_cast<T>(batch.noise[b].values()[i]);
        }
    }

    detail::ConvNet<T> net(arch, theta);
    std::vector<T> pred(per * n);
    net.forward(n, K, xj, xh, batch.steps, pred);
    if (hook) hook(std::span<T>(pred), std::span<const T>(eps));

    const double count = static_cast<double>(per * n);
    double loss = 0.0;
    std::vector<T> d_out(per * n);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double diff = static_cast<double>(pred[i]) - static_cast<double>(eps[i]);
        loss += diff * diff;
        d_out[i] = static_cast<T>(2.0 * diff / count);
    }
    loss /= count;
    if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "loss_and_grad: non-finite loss for batch of " << n << " (steps:";
        for (int s : batch.steps) msg << ' ' << s;
        msg << ')';
        throw NumericalError(msg.str());
    }

    LossGrad<T> out;
    out.loss = loss;
    out.grad.assign(theta.size(), T(0));
    net.backward(d_out, out.grad);
    return out;
}

template LossGrad<float> loss_and_grad<float>(const DenoiserArch&, std::span<const float>, const TrainingBatch&,
                                              const NoiseSchedule&, const OutputHook<float>&);
template LossGrad<double> loss_and_grad<double>(const DenoiserArch&, std::span<const double>, const TrainingBatch&,
                                                const NoiseSchedule&, const OutputHook<double>&);

void TrainConfig::validate() const {
    require(total_steps >= 1, "TrainConfig: total_steps must be >= 1");
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(lr_start > 0 && lr_peak > 0 && lr_end > 0, "TrainConfig: learning rates must be positive");
    require(warmup_fraction > 0 && warmup_fraction < 1, "TrainConfig: warmup_fraction must lie in (0, 1)");
    require(weight_decay >= 0, "TrainConfig: weight_decay must be >= 0");
    require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0, "TrainConfig: invalid AdamW constants");
    require(lead_intervals >= 1, "TrainConfig: lead_intervals must be >= 1");
}

std::string TrainConfig::digest() const {
    std::ostringstream s;
    s.precision(17);
    s << total_steps << ';' << batch_size << ';' << lr_start << ';' << lr_peak << ';' << lr_end << ';'
      << warmup_fraction << ';' << weight_decay << ';' << beta1 << ';' << beta2 << ';' << eps << ';' << seed << ';'
      << lead_intervals;
    return detail::digest_hex(s.str());
}

double lr_at(int step, const TrainConfig& cfg) {
    cfg.validate();
    if (step < 0 || step > cfg.total_steps) {
        throw UsageError("lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(cfg.total_steps) +
                         "]");
    }
    const double total = cfg.total_steps;
    const double warm = cfg.warmup_fraction * total;
    const double s = step;
    if (s < warm) return cfg.lr_start + (cfg.lr_peak - cfg.lr_start) * (s / warm);
    const double progress = (s - warm) / (total - warm);
    return cfg.lr_end + (cfg.lr_peak - cfg.lr_end) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

template <class T>
void adamw_update(std::span<T> theta, std::span<const T> grad, OptimizerState& st, double lr, const TrainConfig& cfg) {
    require(theta.size() == grad.size(), "adamw_update: gradient shape does not match parameters");
    if (st.m.empty() && st.v.empty()) {
        st.m.assign(theta.size(), 0.0);
        st.v.assign(theta.size(), 0.0);
    }
    require(st.m.size() == theta.size() && st.v.size() == theta.size(),
            "adamw_update: optimizer state shape does not match parameters");
    st.step += 1;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    const double decay = 1.0 - lr * cfg.weight_decay;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i];
        st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
        st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = st.m[i] / c1;
        const double vhat = st.v[i] / c2;
        const double p = static_cast<double>(theta[i]) * decay;
        theta[i] = static_cast<T>(p - lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
}

template void adamw_update<float>(std::span<float>, std::span<const float>, OptimizerState&, double,
                                  const TrainConfig&);
template void adamw_update<double>(std::span<double>, std::span<const double>, OptimizerState&, double,
                                   const TrainConfig&);

TrainResult train(const TrajectoryDataset& dataset, const TrainConfig& cfg, const NoiseSchedule& schedule,
                  const DenoiserArch& arch, const std::function<void(const TrainLogEntry&)>& on_step) {
    cfg.validate();
    arch.validate();
    if (dataset.lead_intervals != cfg.lead_intervals) {
        throw UsageError("train: dataset lead " + std::to_string(dataset.lead_intervals) +
                         " does not match configured lead " + std::to_string(cfg.lead_intervals));
    }
    require(arch.levels == dataset.spec.levels, "train: architecture levels do not match dataset");
    const NormStats norm = compute_norm_stats(dataset);
    const PairSet pairs = make_pairs(dataset, norm);

    TrainResult result;
    result.params = init_denoiser(arch, norm, cfg.seed);
    result.params.train_digest = cfg.digest();
    auto& theta = result.params.theta;
    OptimizerState opt;
    Rng rng = make_stream(cfg.seed, {0x6261746368ull});
    result.log.reserve(static_cast<std::size_t>(cfg.total_steps));

    for (int step = 0; step < cfg.total_steps; ++step) {
        const double lr = lr_at(step, cfg);
        const TrainingBatch batch = sample_batch(pairs, cfg.batch_size, schedule, rng);
        auto lg = loss_and_grad<float>(arch, theta, batch, schedule);
        if (lg.loss > 1e6) {
            throw NumericalError("train: loss diverged to " + std::to_string(lg.loss) + " at step " +
                                 std::to_string(step));
        }
        adamw_update<float>(theta, lg.grad, opt, lr, cfg);
        const TrainLogEntry entry{step, lr, lg.loss};
        result.log.push_back(entry);
        if (on_step) on_step(entry);
    }
    result.params.validate();
    return result;
}

}  // namespace diffassim
