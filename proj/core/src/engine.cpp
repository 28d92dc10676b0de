#include "sparnet/engine.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "sparnet/errors.hpp"

namespace sparnet::engine {

std::string method_name(Method m) {
    switch (m) {
        case Method::sparnet: return "sparnet";
        case Method::source: return "source";
        case Method::bn_adapt: return "bn_adapt";
        case Method::tent: return "tent";
    }
    throw std::invalid_argument("method_name: unknown method");
}

Method method_from_name(const std::string& name) {
    for (Method m : {Method::sparnet, Method::source, Method::bn_adapt, Method::tent})
        if (method_name(m) == name) return m;
    throw std::invalid_argument("unknown method: " + name);
}

double resolve_threshold(const EngineConfig& cfg, std::size_t classes) {
    if (cfg.e0 >= 0.0) return cfg.e0;
    return partition::default_threshold(classes);
}

namespace {

std::size_t argmax_row(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < v.size(); ++c)
        if (v[c] > v[best]) best = c;
    return best;
}

std::vector<PredictionRecord> records_from_probs(const numerics::ProbBatch& probs) {
    std::vector<PredictionRecord> records(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        auto row = probs.row(i);
        records[i].pred_class = static_cast<int>(argmax_row(row));
        records[i].probs.assign(row.begin(), row.end());
        records[i].entropy = numerics::entropy(row);
    }
    return records;
}

void mask_to_norm_params(std::vector<double>& grad, const model::ModelParams& params) {
    const auto mask = params.norm_mask();
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!mask[i]) grad[i] = 0.0;
}

}  // namespace

AdaptState make_adapt_state(const model::ModelParams& model0, const EngineConfig& cfg,
                            const importance::ImportanceVector* omega) {
    AdaptState state;
    state.student = model0;
    state.opt = model::make_optimizer(cfg.optimizer, cfg.lr, model0.param_count());
    state.teacher = mean_teacher::TeacherState{model0, cfg.alpha, cfg.n_aug};
    state.theta0 = model0.flatten();
    if (omega) state.omega = *omega;
    state.rng = make_rng(cfg.seed, seed_tag::engine);
    return state;
}

StepInputs prepare_step_inputs(AdaptState& state, const Matrix& x, const EngineConfig& cfg) {
    StepInputs in;
    in.x_clean = x;

    const auto logits = model::forward_pure(state.student, x, model::NormMode::batch_stats);
    const auto probs = numerics::softmax_rows(logits, 1.0);
    const double e0 = resolve_threshold(cfg, state.student.arch.classes);
    in.part = partition::partition_by_entropy(probs, e0);

    in.tau = 1.0;
    if (cfg.use_gem) {
        if (cfg.gem_whole_batch) {
            in.tau = numerics::dynamic_temperature(logits, cfg.s);
        } else if (!in.part.reliable_idx.empty()) {
            in.tau = numerics::dynamic_temperature(logits.select_rows(in.part.reliable_idx),
                                                   cfg.s);
        }
    }
    if (cfg.use_sce && !in.part.unreliable_idx.empty()) {
        in.pseudo = mean_teacher::aug_avg_prediction(state.teacher, x, state.rng, cfg.strong);
        in.x_weak = mean_teacher::weak_augment_batch(x, state.rng, cfg.weak);
    }
    return in;
}

LossEval evaluate_objective(const model::ModelParams& student, const StepInputs& in,
                            std::span<const double> theta0,
                            const importance::ImportanceVector& omega,
                            const EngineConfig& cfg) {
    const std::size_t n = in.x_clean.rows();
    const std::size_t c_count = student.arch.classes;

    losses::LossParts parts;
    parts.tau = in.tau;
    parts.n_reliable = in.part.reliable_idx.size();
    parts.n_unreliable = in.part.unreliable_idx.size();

    std::vector<double> grad(student.param_count(), 0.0);
    auto accumulate = [&grad](const std::vector<double>& g, double w) {
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += w * g[i];
    };

    // GEM over the reliable group (or the whole batch under the ablation flag).
    std::vector<std::size_t> gem_idx;
    if (cfg.gem_whole_batch) {
        gem_idx.resize(n);
        for (std::size_t i = 0; i < n; ++i) gem_idx[i] = i;
    } else {
        gem_idx = in.part.reliable_idx;
    }
    if (cfg.use_gem && !gem_idx.empty()) {
        model::ForwardTrace trace;
        const auto logits =
            model::forward_pure(student, in.x_clean, model::NormMode::batch_stats, &trace);
        const auto gem = losses::gem_loss(logits.select_rows(gem_idx), in.tau);
        parts.gem = gem.value;
        Matrix dlogits(n, c_count);
        for (std::size_t r = 0; r < gem_idx.size(); ++r)
            dlogits.set_row(gem_idx[r], gem.dlogits.row(r));
        if (cfg.lambda > 0.0) {
            for (double& v : dlogits.storage()) v *= cfg.lambda;
            accumulate(model::backward(trace, dlogits), 1.0);
        }
    }

    // SCE between teacher pseudo-labels and the student's weak-view
    // predictions, unreliable rows only. The weak forward covers the full
    // batch so batch statistics stay well defined for any group size.
    if (cfg.use_sce && !in.part.unreliable_idx.empty()) {
        model::ForwardTrace trace;
        const auto wlogits =
            model::forward_pure(student, in.x_weak, model::NormMode::batch_stats, &trace);
        const auto wprobs = numerics::softmax_rows(wlogits, 1.0);
        const auto& idx = in.part.unreliable_idx;
        const auto sce =
            losses::sce_loss(in.pseudo.select_rows(idx), wprobs.select_rows(idx));
        parts.sce = sce.value;
        Matrix dlogits(n, c_count);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            numerics::softmax_backward_row(wprobs.row(idx[r]), sce.dstudent_probs.row(r),
                                           dlogits.row(idx[r]));
        }
        accumulate(model::backward(trace, dlogits), 1.0);
    }

    // Importance-weighted drift penalty.
    if (cfg.use_reg) {
        const auto theta = student.flatten();
        const auto reg = losses::reg_loss(theta, theta0, omega.values);
        parts.reg = reg.value;
        if (cfg.beta > 0.0) accumulate(reg.dtheta, cfg.beta);
    }

    LossEval eval;
    if (cfg.gem_whole_batch) {
        // Whole-batch GEM stays active regardless of the reliable count.
        losses::LossParts wp = parts;
        wp.n_reliable = n;
        eval.breakdown = losses::total_objective(wp, cfg.lambda, cfg.beta);
        eval.breakdown.n_reliable = parts.n_reliable;
    } else {
        eval.breakdown = losses::total_objective(parts, cfg.lambda, cfg.beta);
    }
    eval.grad = std::move(grad);
    return eval;
}

StepResult sparnet_step(AdaptState& state, const Matrix& x, const EngineConfig& cfg) {
    if (x.rows() < 2) throw std::invalid_argument("sparnet_step: need N >= 2");

    StepInputs in = prepare_step_inputs(state, x, cfg);

    // Emitted prediction: student-teacher ensemble on the clean batch,
    // computed from the pre-update parameters.
    const auto s_logits = model::forward_pure(state.student, x, model::NormMode::batch_stats);
    const auto s_probs = numerics::softmax_rows(s_logits, 1.0);
    const auto t_logits =
        model::forward_pure(state.teacher.params, x, model::NormMode::batch_stats);
    const auto t_probs = numerics::softmax_rows(t_logits, 1.0);
    numerics::ProbBatch ensemble(x.rows(), s_probs.cols());
    for (std::size_t i = 0; i < ensemble.storage().size(); ++i)
        ensemble.storage()[i] = 0.5 * (s_probs.storage()[i] + t_probs.storage()[i]);

    auto records = records_from_probs(ensemble);
    for (std::size_t i : in.part.reliable_idx) records[i].group = Group::reliable;
    for (std::size_t i : in.part.unreliable_idx) records[i].group = Group::unreliable;
    for (std::size_t i = 0; i < records.size(); ++i) records[i].entropy = in.part.entropies[i];

    LossEval eval = evaluate_objective(state.student, in, state.theta0, state.omega, cfg);
    const auto& b = eval.breakdown;
    const char* bad = nullptr;
    if (!std::isfinite(b.gem)) bad = "gem";
    else if (!std::isfinite(b.sce)) bad = "sce";
    else if (!std::isfinite(b.reg)) bad = "reg";
    else if (!std::isfinite(b.total)) bad = "total";
    if (bad)
        throw NumericalError(std::string("sparnet_step: non-finite loss term '") + bad +
                             "'; step aborted");

    if (cfg.update_params == UpdateParams::norm_only)
        mask_to_norm_params(eval.grad, state.student);
    model::optimizer_step(state.opt, state.student, eval.grad);
    mean_teacher::ema_update(state.teacher, state.student);
    state.step += 1;

    return {std::move(records), eval.breakdown};
}

StepResult tent_step(AdaptState& state, const Matrix& x, const EngineConfig& cfg) {
    if (x.rows() < 2) throw std::invalid_argument("tent_step: need N >= 2");

    model::ForwardTrace trace;
    const auto logits =
        model::forward_pure(state.student, x, model::NormMode::batch_stats, &trace);
    const auto probs = numerics::softmax_rows(logits, 1.0);
    auto records = records_from_probs(probs);

    // Entropy minimization over the whole batch; gem_loss at tau = 1 is the
    // EM loss with its logit gradient.
    const auto em = losses::gem_loss(logits, 1.0);
    if (!std::isfinite(em.value))
        throw NumericalError("tent_step: non-finite entropy loss; step aborted");
    auto grad = model::backward(trace, em.dlogits);
    mask_to_norm_params(grad, state.student);
    model::optimizer_step(state.opt, state.student, grad);
    state.step += 1;

    losses::LossBreakdown b;
    b.total = em.value;
    b.tau_used = 1.0;
    return {std::move(records), b};
}

std::vector<PredictionRecord> bn_adapt_predict(const model::ModelParams& params0,
                                               const Matrix& x) {
    if (x.rows() < 2) throw std::invalid_argument("bn_adapt_predict: need N >= 2");
    const auto logits = model::forward_pure(params0, x, model::NormMode::batch_stats);
    return records_from_probs(numerics::softmax_rows(logits, 1.0));
}

std::vector<PredictionRecord> source_predict(const model::ModelParams& params0,
                                             const Matrix& x) {
    const auto logits = model::forward_pure(params0, x, model::NormMode::running_stats);
    return records_from_probs(numerics::softmax_rows(logits, 1.0));
}

namespace {

void append_csv_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    out += buf;
}

}  // namespace

std::string MetricsTable::to_csv() const {
    std::string out = kMetricsCsvHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += std::to_string(r.step);
        out += ',';
        out += r.domain;
        out += ',';
        out += std::to_string(r.severity);
        out += ',';
        out += r.method;
        out += ',';
        append_csv_double(out, r.batch_err);
        out += ',';
        append_csv_double(out, r.mean_err_so_far);
        out += ',';
        out += std::to_string(r.n_reliable);
        out += ',';
        out += std::to_string(r.n_unreliable);
        out += ',';
        append_csv_double(out, r.loss_total);
        out += ',';
        append_csv_double(out, r.loss_gem);
        out += ',';
        append_csv_double(out, r.loss_sce);
        out += ',';
        append_csv_double(out, r.loss_reg);
        out += ',';
        if (r.has_probe) append_csv_double(out, r.probe_src_err);
        out += '\n';
    }
    return out;
}

MetricsTable run_stream(const EngineConfig& cfg, const streambench::DomainStream& stream,
                        const model::ModelParams& model0,
                        const importance::ImportanceVector* omega,
                        const Dataset* probe_holdout) {
    if (stream.batches.empty()) throw std::invalid_argument("run_stream: empty stream");

    const std::size_t p = model0.param_count();
    if (cfg.method == Method::sparnet && cfg.use_reg) {
        if (!omega || omega->empty())
            throw ConfigError(
                "run_stream: sparnet with use_reg needs an importance vector; "
                "compute one against the source checkpoint first");
        if (omega->values.size() != p)
            throw ConfigError("run_stream: importance vector length mismatch");
        if (!omega->theta0_checksum.empty() &&
            omega->theta0_checksum != model::flatten_checksum(model0))
            throw ConfigError(
                "run_stream: importance vector was computed for different source weights");
    }

    AdaptState state = make_adapt_state(model0, cfg, omega);
    const std::string mname = method_name(cfg.method);

    MetricsTable table;
    double err_sum = 0.0;
    const std::size_t total = stream.batches.size();

    for (std::size_t bi = 0; bi < total; ++bi) {
        const auto& batch = stream.batches[bi];
        MetricsRow row;
        row.step = bi;
        row.domain = batch.domain;
        row.severity = batch.severity;
        row.method = mname;

        std::vector<PredictionRecord> records;
        switch (cfg.method) {
            case Method::sparnet: {
                auto res = sparnet_step(state, batch.x, cfg);
                records = std::move(res.records);
                row.loss_total = res.loss.total;
                row.loss_gem = res.loss.gem;
                row.loss_sce = res.loss.sce;
                row.loss_reg = res.loss.reg;
                row.n_reliable = res.loss.n_reliable;
                row.n_unreliable = res.loss.n_unreliable;
                break;
            }
            case Method::tent: {
                auto res = tent_step(state, batch.x, cfg);
                records = std::move(res.records);
                row.loss_total = res.loss.total;
                break;
            }
            case Method::bn_adapt:
                records = bn_adapt_predict(model0, batch.x);
                break;
            case Method::source:
                records = source_predict(model0, batch.x);
                break;
        }

        std::vector<int> preds(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) preds[i] = records[i].pred_class;
        row.batch_err = streambench::error_rate(preds, batch.labels);
        for (std::size_t i = 0; i < records.size(); ++i)
            records[i].correct = preds[i] == batch.labels[i];
        err_sum += row.batch_err;
        row.mean_err_so_far = err_sum / static_cast<double>(bi + 1);

        const bool adapting = cfg.method == Method::sparnet || cfg.method == Method::tent;
        const bool last = bi + 1 == total;
        if (probe_holdout &&
            (last || (cfg.probe_interval > 0 && (bi + 1) % cfg.probe_interval == 0))) {
            const auto& current = adapting ? state.student : model0;
            row.probe_src_err = streambench::forgetting_probe(current, *probe_holdout);
            row.has_probe = true;
            table.has_final_probe = true;
            table.final_probe_err = row.probe_src_err;
        }
        table.rows.push_back(std::move(row));
    }

    // Per-domain means in stream order, then the mean over domains.
    for (const auto& name : stream.domain_order) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& r : table.rows) {
            if (r.domain == name) {
                sum += r.batch_err;
                ++count;
            }
        }
        table.domain_errors.push_back({name, count ? sum / static_cast<double>(count) : 0.0});
    }
    if (!table.domain_errors.empty()) {
        double sum = 0.0;
        for (const auto& de : table.domain_errors) sum += de.error;
        table.mean_error = sum / static_cast<double>(table.domain_errors.size());
    }

    const auto theta_final = state.student.flatten();
    for (std::size_t i = 0; i < theta_final.size(); ++i)
        table.theta_drift_inf =
            std::max(table.theta_drift_inf, std::abs(theta_final[i] - state.theta0[i]));
    return table;
}

}  // namespace sparnet::engine
