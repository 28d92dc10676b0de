#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sparnet/matrix.hpp"
#include "sparnet/numerics.hpp"

namespace sparnet::model {

/// Fixed architecture family: input -> [affine -> batchnorm -> tanh]* -> affine.
struct Architecture {
    std::size_t input_dim = 32;
    std::vector<std::size_t> hidden = {64};
    std::size_t classes = 10;

    bool operator==(const Architecture&) const = default;

    /// Trainable parameter count (weights, biases, batchnorm scale/shift).
    std::size_t param_count() const;
};

/// All weights of one classifier, plus per-normalization-layer running
/// statistics. Value type: copying gives an independent model.
struct ModelParams {
    struct HiddenLayer {
        Matrix weight;              // h x in
        std::vector<double> bias;   // h
        std::vector<double> gamma;  // h, batchnorm scale
        std::vector<double> beta;   // h, batchnorm shift
        std::vector<double> running_mean;  // h, not trainable
        std::vector<double> running_var;   // h, not trainable, entries > 0
    };

    Architecture arch;
    std::vector<HiddenLayer> layers;
    Matrix out_weight;               // C x last_in
    std::vector<double> out_bias;    // C

    /// Random initialization: weights ~ N(0, 1/sqrt(fan_in)), biases 0,
    /// gamma 1, beta 0, running stats (0, 1).
    static ModelParams init(const Architecture& arch, std::uint64_t seed);

    /// Canonical flat view of the trainable parameters. Order per hidden
    /// layer: weight (row-major), bias, gamma, beta; then output weight,
    /// output bias.
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> v);

    /// 1 where the flat index is a batchnorm scale/shift entry, else 0.
    std::vector<std::uint8_t> norm_mask() const;

    std::size_t param_count() const { return arch.param_count(); }
};

/// FNV-1a hash over the canonical flat parameter bytes, as a hex string.
std::string flatten_checksum(const ModelParams& p);

enum class NormMode { batch_stats, running_stats };

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;

/// Everything backward() needs to reproduce the executed forward exactly:
/// cached activations, the batch statistics actually used, and copies of the
/// weights as of the forward. Consumable once.
struct ForwardTrace {
    struct LayerCache {
        Matrix input;                  // N x in
        Matrix xhat;                   // N x h, normalized pre-activation
        Matrix tanh_out;               // N x h
        std::vector<double> mu;        // stats used in forward
        std::vector<double> inv_std;   // 1/sqrt(var + eps)
        std::vector<double> gamma;
        Matrix weight;
        std::vector<double> new_running_mean;  // proposed updates (batch_stats)
        std::vector<double> new_running_var;
    };
    NormMode mode = NormMode::running_stats;
    std::size_t batch = 0;
    Architecture arch;
    std::vector<LayerCache> layers;
    Matrix last_input;  // input to the output affine
    Matrix out_weight;
    bool consumed = false;
};

/// Pure forward pass: never mutates params. In batch_stats mode the proposed
/// running-stat updates (momentum 0.1 toward the batch statistics) are left
/// in the trace for an explicit commit.
numerics::LogitsBatch forward_pure(const ModelParams& params, const Matrix& x,
                                   NormMode mode, ForwardTrace* trace = nullptr);

/// Forward pass per the module contract: batch_stats mode normalizes with the
/// current batch's statistics and commits the running-stat update into
/// params; running_stats mode uses the stored statistics and leaves them
/// unchanged.
numerics::LogitsBatch forward(ModelParams& params, const Matrix& x, NormMode mode,
                              ForwardTrace* trace = nullptr);

/// Apply the running-stat updates a batch_stats forward left in the trace.
void commit_running_stats(ModelParams& params, const ForwardTrace& trace);

/// Exact gradient of the scalar loss whose logit-gradient is dlogits, with
/// respect to the flat trainable parameters, including the dependence through
/// batch statistics when the trace was recorded in batch_stats mode.
std::vector<double> backward(ForwardTrace& trace, const Matrix& dlogits);

enum class OptimizerKind { adam, sgd };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> m;  // first moments, length P
    std::vector<double> v;  // second moments, length P
    std::uint64_t step = 0;
};

OptimizerState make_optimizer(OptimizerKind kind, double lr, std::size_t param_count);

/// One optimizer step in place. Refuses the step (state and params untouched)
/// on non-finite gradient entries. Running statistics are never touched.
void optimizer_step(OptimizerState& state, ModelParams& params,
                    std::span<const double> grad);

/// Classification error of params on a dataset, running_stats mode.
double eval_error(const ModelParams& params, const Dataset& data);

struct PretrainConfig {
    double lr = 1e-3;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 60;
    double target_error = 0.05;
    std::uint64_t seed = 0;
};

/// Supervised pretraining on the source task. Returns parameters whose
/// holdout error is at or below the configured target; throws
/// TrainingFailedError (carrying the final error) if max_epochs pass without
/// reaching it.
ModelParams pretrain_source(const Dataset& train, const Dataset& holdout,
                            const Architecture& arch, const PretrainConfig& cfg);

}  // namespace sparnet::model
