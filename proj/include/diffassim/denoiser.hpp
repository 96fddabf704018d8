#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "diffassim/diffusion.hpp"
#include "diffassim/dynamics.hpp"
#include "diffassim/field.hpp"
#include "diffassim/random.hpp"
#include "diffassim/stats.hpp"

namespace diffassim {

/// Shape of the circular 1-D convolutional noise predictor.
struct DenoiserArch {
    int levels = 4;
    int hidden = 64;
    int kernel = 5;
    int blocks = 3;
    int embed_dim = 16;

    void validate() const;
    friend bool operator==(const DenoiserArch&, const DenoiserArch&) = default;
};

/// One named slice of the flat parameter vector, stored row-major.
struct ParamGroup {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::size_t offset = 0;
    std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

std::vector<ParamGroup> parameter_groups(const DenoiserArch& arch);
std::size_t parameter_count(const DenoiserArch& arch);

struct DenoiserParams {
    DenoiserArch arch;
    std::vector<float> theta;
    NormStats norm;
    std::string train_digest;

    void validate() const;
};

/// Fan-in scaled uniform kernels, zero biases, zero output layer.
DenoiserParams init_denoiser(const DenoiserArch& arch, const NormStats& norm, std::uint64_t seed);

/// Sinusoidal embedding of the diffusion step: sin(j w_i) then cos(j w_i),
/// w_i = 10000^(-i / (E/2)).
std::vector<double> step_embedding(int j, int dim);

// Normalization helpers. Per-level statistics broadcast along the ring.
Field normalize_state(const Field& x, const NormStats& norm);
Field denormalize_state(const Field& z, const NormStats& norm);
/// (truth - forecast) / s
Field to_residual(const Field& truth, const Field& forecast, const NormStats& norm);
/// forecast + s * r
Field from_residual(const Field& forecast, const Field& r, const NormStats& norm);

/// Batched noise prediction at precision T. Inputs are `batch` samples of
/// levels x points each, row-major, concatenated.
template <class T>
std::vector<T> eps_forward_batch(const DenoiserArch& arch, std::span<const T> theta, int batch, int points,
                                 std::span<const T> x_j, std::span<const T> xhat_norm, std::span<const int> steps);

/// Single-sample prediction with the stored float32 weights.
Field eps_forward(const DenoiserParams& params, const Field& x_j, const Field& xhat_norm, int j,
                  const NoiseSchedule& schedule);

/// Reusable float32 evaluator; keeps its workspace between calls.
class NoisePredictor {
public:
    explicit NoisePredictor(const DenoiserParams& params);
    ~NoisePredictor();
    NoisePredictor(NoisePredictor&&) noexcept;
    NoisePredictor& operator=(NoisePredictor&&) noexcept;

    /// x_j and xhat_norm in row-major levels x points; result written to out.
    void predict(std::span<const double> x_j, std::span<const double> xhat_norm, int points, int j,
                 std::span<double> out);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Normalized training pairs: residual r* = (x* - x^) / s and the
/// normalized forecast (x^ - mu) / sigma.
struct PairSet {
    std::vector<Field> residual;
    std::vector<Field> xhat_norm;
    std::size_t size() const { return residual.size(); }
};

PairSet make_pairs(const TrajectoryDataset& dataset, const NormStats& norm);

/// One minibatch with its diffusion steps and noise drawn up front.
struct TrainingBatch {
    std::vector<Field> residual;
    std::vector<Field> xhat_norm;
    std::vector<Field> noise;
    std::vector<int> steps;
    std::size_t size() const { return residual.size(); }
};

TrainingBatch sample_batch(const PairSet& pairs, int batch_size, const NoiseSchedule& schedule, Rng& rng);

template <class T>
struct LossGrad {
    double loss = 0.0;
    std::vector<T> grad;
};

/// Test hook: may overwrite the network output before the loss is formed.
/// Receives (prediction, target noise).
template <class T>
using OutputHook = std::function<void(std::span<T>, std::span<const T>)>;

/// Mean squared error between the sampled noise and the prediction over
/// the whole batch, with its exact gradient.
template <class T>
LossGrad<T> loss_and_grad(const DenoiserArch& arch, std::span<const T> theta, const TrainingBatch& batch,
                          const NoiseSchedule& schedule, const OutputHook<T>& hook = {});

struct TrainConfig {
    int total_steps = 6000;
    int batch_size = 32;
    double lr_start = 1e-5;
    double lr_peak = 1e-4;
    double lr_end = 3e-6;
    double warmup_fraction = 1.0 / 6.0;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    int lead_intervals = 8;

    void validate() const;
    std::string digest() const;
};

/// Linear warm-up lr_start -> lr_peak over warmup_fraction * total_steps,
/// then cosine annealing lr_peak -> lr_end.
double lr_at(int step, const TrainConfig& cfg);

struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;
};

/// Decoupled weight decay theta *= (1 - lr * wd), then the bias-corrected
/// Adam step.
template <class T>
void adamw_update(std::span<T> theta, std::span<const T> grad, OptimizerState& state, double lr,
                  const TrainConfig& cfg);

struct TrainLogEntry {
    int step = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    DenoiserParams params;
    std::vector<TrainLogEntry> log;
};

TrainResult train(const TrajectoryDataset& dataset, const TrainConfig& cfg, const NoiseSchedule& schedule,
                  const DenoiserArch& arch, const std::function<void(const TrainLogEntry&)>& on_step = {});

}  // namespace diffassim
