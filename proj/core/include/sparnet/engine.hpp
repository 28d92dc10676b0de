#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sparnet/importance.hpp"
#include "sparnet/losses.hpp"
#include "sparnet/mean_teacher.hpp"
#include "sparnet/model.hpp"
#include "sparnet/partition.hpp"
#include "sparnet/streambench.hpp"

namespace sparnet::engine {

enum class Method { sparnet, source, bn_adapt, tent };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

enum class UpdateParams { all, norm_only };

struct EngineConfig {
    Method method = Method::sparnet;
    double e0 = -1.0;       // entropy threshold; < 0 means 0.4 * ln C at run start
    double lambda = 1.8;    // GEM weight
    double beta = 1.0;      // regularizer weight
    double s = 1.0;         // temperature strength
    double alpha = 0.999;   // teacher EMA factor
    std::size_t n_aug = 32;
    model::OptimizerKind optimizer = model::OptimizerKind::adam;
    double lr = 1e-3;
    std::size_t batch_size = 200;
    bool use_gem = true;
    bool use_sce = true;
    bool use_reg = true;
    bool gem_whole_batch = false;  // ablation: GEM over all samples, not just reliable
    UpdateParams update_params = UpdateParams::all;
    std::uint64_t seed = 0;
    std::size_t probe_interval = 10;  // batches between forgetting probes; 0 = final only
    mean_teacher::WeakAugmentParams weak;
    mean_teacher::StrongAugmentParams strong;
};

/// Resolve the auto threshold against the class count.
double resolve_threshold(const EngineConfig& cfg, std::size_t classes);

enum class Group { none, reliable, unreliable };

struct PredictionRecord {
    int pred_class = 0;
    std::vector<double> probs;  // the distribution the prediction was taken from
    double entropy = 0.0;
    Group group = Group::none;
    bool correct = false;  // filled by the metrics consumer
};

/// All mutable state of one adaptation run. theta0 and omega stay frozen.
struct AdaptState {
    model::ModelParams student;
    model::OptimizerState opt;
    mean_teacher::TeacherState teacher;
    std::vector<double> theta0;
    importance::ImportanceVector omega;
    std::uint64_t step = 0;
    Rng rng;
};

AdaptState make_adapt_state(const model::ModelParams& model0, const EngineConfig& cfg,
                            const importance::ImportanceVector* omega);

/// Everything a step's objective depends on besides the student parameters.
/// Frozen before gradient evaluation: augmented views, pseudo-labels, the
/// partition, and the temperature (stop-gradient).
struct StepInputs {
    Matrix x_clean;
    Matrix x_weak;                  // empty when the SCE term is off
    numerics::ProbBatch pseudo;     // full-batch teacher pseudo-labels; empty when off
    partition::SamplePartition part;
    double tau = 1.0;
};

struct LossEval {
    losses::LossBreakdown breakdown;
    std::vector<double> grad;  // d total / d theta, flat
};

/// Deterministic objective evaluation given frozen step inputs; this is the
/// function the optimizer steps on and the one finite-difference tests probe.
LossEval evaluate_objective(const model::ModelParams& student, const StepInputs& in,
                            std::span<const double> theta0,
                            const importance::ImportanceVector& omega,
                            const EngineConfig& cfg);

/// Consume engine randomness to build the frozen inputs for one batch
/// (partition from the clean student forward, teacher pseudo-labels, weak
/// views, temperature).
StepInputs prepare_step_inputs(AdaptState& state, const Matrix& x, const EngineConfig& cfg);

struct StepResult {
    std::vector<PredictionRecord> records;
    losses::LossBreakdown loss;
};

/// One SPARNet adaptation step: predict (student-teacher ensemble, before any
/// update), partition, optimize the combined objective, EMA the teacher.
/// A non-finite objective aborts the step with state untouched.
StepResult sparnet_step(AdaptState& state, const Matrix& x, const EngineConfig& cfg);

/// Continual TENT baseline: entropy minimization over the whole batch,
/// gradients applied to normalization scale/shift only.
StepResult tent_step(AdaptState& state, const Matrix& x, const EngineConfig& cfg);

/// Batch-statistics prediction with the source weights; no state carried.
std::vector<PredictionRecord> bn_adapt_predict(const model::ModelParams& params0,
                                               const Matrix& x);

/// Plain source-model prediction in running_stats mode; stateless.
std::vector<PredictionRecord> source_predict(const model::ModelParams& params0,
                                             const Matrix& x);

struct MetricsRow {
    std::size_t step = 0;
    std::string domain;
    int severity = 0;
    std::string method;
    double batch_err = 0.0;
    double mean_err_so_far = 0.0;
    std::size_t n_reliable = 0;
    std::size_t n_unreliable = 0;
    double loss_total = 0.0;
    double loss_gem = 0.0;
    double loss_sce = 0.0;
    double loss_reg = 0.0;
    bool has_probe = false;
    double probe_src_err = 0.0;
};

struct DomainError {
    std::string domain;
    double error = 0.0;
};

struct MetricsTable {
    std::vector<MetricsRow> rows;
    std::vector<DomainError> domain_errors;
    double mean_error = 0.0;  // mean over domains
    bool has_final_probe = false;
    double final_probe_err = 0.0;
    double theta_drift_inf = 0.0;  // max |theta_T - theta_0| over parameters

    std::string to_csv() const;
};

inline constexpr const char* kMetricsCsvHeader =
    "step,domain,severity,method,batch_err,mean_err_so_far,n_reliable,n_unreliable,"
    "loss_total,loss_gem,loss_sce,loss_reg,probe_src_err";

/// Run the online loop over the whole stream, dispatching on cfg.method.
/// probe_holdout enables the forgetting probe at cfg.probe_interval and on
/// the final batch. Fully deterministic given the config seed.
MetricsTable run_stream(const EngineConfig& cfg, const streambench::DomainStream& stream,
                        const model::ModelParams& model0,
                        const importance::ImportanceVector* omega,
                        const Dataset* probe_holdout);

}  // namespace sparnet::engine
