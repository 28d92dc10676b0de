#include "sparnet/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sparnet/errors.hpp"

namespace sparnet::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

// Schema: every known key with its expected shape, mirrored by the reader
// below. Anything else is rejected so typos never pass silently.
const json& schema() {
    static const json s = {
        {"seed", 0},
        {"profile", ""},
        {"task",
         {{"d", 0}, {"C", 0}, {"sigma", 0.0}, {"train_size", 0}, {"holdout_size", 0}}},
        {"model", {{"hidden", json::array()}}},
        {"pretrain",
         {{"lr", 0.0}, {"batch", 0}, {"max_epochs", 0}, {"target_error", 0.0}}},
        {"engine",
         {{"method", ""},
          {"e0", 0.0},
          {"lambda", 0.0},
          {"beta", 0.0},
          {"s", 0.0},
          {"alpha", 0.0},
          {"n_aug", 0},
          {"optimizer", ""},
          {"lr", 0.0},
          {"batch", 0},
          {"use_gem", true},
          {"use_sce", true},
          {"use_reg", true},
          {"gem_whole_batch", true},
          {"update_params", ""},
          {"probe_interval", 0},
          {"weak_jitter_sigma", 0.0},
          {"weak_mask_rate", 0.0},
          {"strong_severity_min", 0},
          {"strong_severity_max", 0}}},
        {"stream", {{"kinds", json::array()}, {"severity", 0}, {"batches_per_domain", 0}}},
        {"importance", {{"samples", 0}}},
        {"corruption",
         {{"feature_scale", 0.0},
          {"gauss_sigma_max", 0.0},
          {"mask_rate_max", 0.0},
          {"rotation_angle_max", 0.0},
          {"scale_factor_max", 0.0},
          {"shift_dist_max", 0.0},
          {"blur_weight_max", 0.0}}},
        {"output", {{"dir", ""}}},
    };
    return s;
}

void reject_unknown_keys(const json& doc, const json& sch, const std::string& prefix) {
    if (!doc.is_object()) fail("expected an object at '" + (prefix.empty() ? "<root>" : prefix) + "'");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!sch.contains(it.key())) fail("unknown key '" + path + "'");
        if (sch.at(it.key()).is_object()) reject_unknown_keys(it.value(), sch.at(it.key()), path);
    }
}

template <typename T>
void read_if(const json& j, const char* key, T& out, const std::string& prefix) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        fail("bad value for '" + prefix + key + "'");
    }
}

json parse_override_value(const std::string& raw) {
    json v = json::parse(raw, nullptr, false);
    if (v.is_discarded()) return json(raw);  // plain string (e.g. method names)
    return v;
}

void apply_dotted(json& doc, const std::string& key, const std::string& value) {
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
        if (part.empty()) fail("bad override key '" + key + "'");
        if (dot == std::string::npos) {
            (*node)[part] = parse_override_value(value);
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

RunConfig config_from_json(json doc) {
    reject_unknown_keys(doc, schema(), "");

    RunConfig cfg;
    read_if(doc, "seed", cfg.seed, "");
    read_if(doc, "profile", cfg.profile, "");
    if (cfg.profile != "cifar" && cfg.profile != "desk")
        fail("profile must be 'cifar' or 'desk'");

    // Profile defaults first, explicit keys after.
    if (cfg.profile == "desk") {
        cfg.engine.batch_size = 64;
        cfg.engine.n_aug = 8;
        cfg.importance_samples = 512;
    }

    if (doc.contains("task")) {
        const auto& t = doc["task"];
        read_if(t, "d", cfg.task.d, "task.");
        read_if(t, "C", cfg.task.classes, "task.");
        read_if(t, "sigma", cfg.task.sigma, "task.");
        read_if(t, "train_size", cfg.task.train_size, "task.");
        read_if(t, "holdout_size", cfg.task.holdout_size, "task.");
    }
    if (doc.contains("model")) read_if(doc["model"], "hidden", cfg.hidden, "model.");
    if (doc.contains("pretrain")) {
        const auto& p = doc["pretrain"];
        read_if(p, "lr", cfg.pretrain.lr, "pretrain.");
        read_if(p, "batch", cfg.pretrain.batch_size, "pretrain.");
        read_if(p, "max_epochs", cfg.pretrain.max_epochs, "pretrain.");
        read_if(p, "target_error", cfg.pretrain.target_error, "pretrain.");
    }
    if (doc.contains("engine")) {
        const auto& e = doc["engine"];
        std::string method = engine::method_name(cfg.engine.method);
        read_if(e, "method", method, "engine.");
        try {
            cfg.engine.method = engine::method_from_name(method);
        } catch (const std::invalid_argument& ex) {
            fail(ex.what());
        }
        read_if(e, "e0", cfg.engine.e0, "engine.");
        read_if(e, "lambda", cfg.engine.lambda, "engine.");
        read_if(e, "beta", cfg.engine.beta, "engine.");
        read_if(e, "s", cfg.engine.s, "engine.");
        read_if(e, "alpha", cfg.engine.alpha, "engine.");
        read_if(e, "n_aug", cfg.engine.n_aug, "engine.");
        std::string opt = cfg.engine.optimizer == model::OptimizerKind::adam ? "adam" : "sgd";
        read_if(e, "optimizer", opt, "engine.");
        if (opt == "adam")
            cfg.engine.optimizer = model::OptimizerKind::adam;
        else if (opt == "sgd")
            cfg.engine.optimizer = model::OptimizerKind::sgd;
        else
            fail("engine.optimizer must be 'adam' or 'sgd'");
        read_if(e, "lr", cfg.engine.lr, "engine.");
        read_if(e, "batch", cfg.engine.batch_size, "engine.");
        read_if(e, "use_gem", cfg.engine.use_gem, "engine.");
        read_if(e, "use_sce", cfg.engine.use_sce, "engine.");
        read_if(e, "use_reg", cfg.engine.use_reg, "engine.");
        read_if(e, "gem_whole_batch", cfg.engine.gem_whole_batch, "engine.");
        std::string up = cfg.engine.update_params == engine::UpdateParams::all ? "all" : "norm_only";
        read_if(e, "update_params", up, "engine.");
        if (up == "all")
            cfg.engine.update_params = engine::UpdateParams::all;
        else if (up == "norm_only")
            cfg.engine.update_params = engine::UpdateParams::norm_only;
        else
            fail("engine.update_params must be 'all' or 'norm_only'");
        read_if(e, "probe_interval", cfg.engine.probe_interval, "engine.");
        read_if(e, "weak_jitter_sigma", cfg.engine.weak.jitter_sigma, "engine.");
        read_if(e, "weak_mask_rate", cfg.engine.weak.mask_rate, "engine.");
        read_if(e, "strong_severity_min", cfg.engine.strong.severity_min, "engine.");
        read_if(e, "strong_severity_max", cfg.engine.strong.severity_max, "engine.");
    }
    if (doc.contains("stream")) {
        const auto& s = doc["stream"];
        read_if(s, "kinds", cfg.stream.kinds, "stream.");
        read_if(s, "severity", cfg.stream.severity, "stream.");
        read_if(s, "batches_per_domain", cfg.stream.batches_per_domain, "stream.");
    }
    if (doc.contains("importance"))
        read_if(doc["importance"], "samples", cfg.importance_samples, "importance.");
    if (doc.contains("corruption")) {
        const auto& c = doc["corruption"];
        read_if(c, "feature_scale", cfg.corruption.feature_scale, "corruption.");
        read_if(c, "gauss_sigma_max", cfg.corruption.gauss_sigma_max, "corruption.");
        read_if(c, "mask_rate_max", cfg.corruption.mask_rate_max, "corruption.");
        read_if(c, "rotation_angle_max", cfg.corruption.rotation_angle_max, "corruption.");
        read_if(c, "scale_factor_max", cfg.corruption.scale_factor_max, "corruption.");
        read_if(c, "shift_dist_max", cfg.corruption.shift_dist_max, "corruption.");
        read_if(c, "blur_weight_max", cfg.corruption.blur_weight_max, "corruption.");
    }
    if (doc.contains("output")) read_if(doc["output"], "dir", cfg.out_dir, "output.");

    // Validate enumerated stream kinds early.
    for (const auto& k : cfg.stream.kinds) {
        try {
            streambench::corruption_from_name(k);
        } catch (const std::invalid_argument& ex) {
            fail(std::string("stream.kinds: ") + ex.what());
        }
    }
    if (cfg.stream.severity < 1 || cfg.stream.severity > 5)
        fail("stream.severity must be in [1, 5]");

    cfg.engine.strong.corruption = cfg.corruption;
    cfg.pretrain.seed = cfg.seed;
    return cfg;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::vector<KeyValue>& overrides) {
    json doc;
    try {
        doc = text.empty() ? json::object() : json::parse(text);
    } catch (const json::exception& e) {
        fail(std::string("parse failure: ") + e.what());
    }
    for (const auto& [key, value] : overrides) apply_dotted(doc, key, value);
    return config_from_json(std::move(doc));
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<KeyValue>& overrides) {
    std::ifstream f(path);
    if (!f) fail("cannot open " + path.string());
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_run_config(buf.str(), overrides);
}

std::string resolved_config_json(const RunConfig& cfg) {
    json doc;
    doc["seed"] = cfg.seed;
    doc["profile"] = cfg.profile;
    doc["task"] = {{"d", cfg.task.d},
                   {"C", cfg.task.classes},
                   {"sigma", cfg.task.sigma},
                   {"train_size", cfg.task.train_size},
                   {"holdout_size", cfg.task.holdout_size}};
    doc["model"] = {{"hidden", cfg.hidden}};
    doc["pretrain"] = {{"lr", cfg.pretrain.lr},
                       {"batch", cfg.pretrain.batch_size},
                       {"max_epochs", cfg.pretrain.max_epochs},
                       {"target_error", cfg.pretrain.target_error}};
    doc["engine"] = {{"method", engine::method_name(cfg.engine.method)},
                     {"e0", cfg.engine.e0},
                     {"lambda", cfg.engine.lambda},
                     {"beta", cfg.engine.beta},
                     {"s", cfg.engine.s},
                     {"alpha", cfg.engine.alpha},
                     {"n_aug", cfg.engine.n_aug},
                     {"optimizer",
                      cfg.engine.optimizer == model::OptimizerKind::adam ? "adam" : "sgd"},
                     {"lr", cfg.engine.lr},
                     {"batch", cfg.engine.batch_size},
                     {"use_gem", cfg.engine.use_gem},
                     {"use_sce", cfg.engine.use_sce},
                     {"use_reg", cfg.engine.use_reg},
                     {"gem_whole_batch", cfg.engine.gem_whole_batch},
                     {"update_params",
                      cfg.engine.update_params == engine::UpdateParams::all ? "all"
                                                                            : "norm_only"},
                     {"probe_interval", cfg.engine.probe_interval},
                     {"weak_jitter_sigma", cfg.engine.weak.jitter_sigma},
                     {"weak_mask_rate", cfg.engine.weak.mask_rate},
                     {"strong_severity_min", cfg.engine.strong.severity_min},
                     {"strong_severity_max", cfg.engine.strong.severity_max}};
    doc["stream"] = {{"kinds", cfg.stream.kinds},
                     {"severity", cfg.stream.severity},
                     {"batches_per_domain", cfg.stream.batches_per_domain}};
    doc["importance"] = {{"samples", cfg.importance_samples}};
    doc["corruption"] = {{"feature_scale", cfg.corruption.feature_scale},
                         {"gauss_sigma_max", cfg.corruption.gauss_sigma_max},
                         {"mask_rate_max", cfg.corruption.mask_rate_max},
                         {"rotation_angle_max", cfg.corruption.rotation_angle_max},
                         {"scale_factor_max", cfg.corruption.scale_factor_max},
                         {"shift_dist_max", cfg.corruption.shift_dist_max},
                         {"blur_weight_max", cfg.corruption.blur_weight_max}};
    doc["output"] = {{"dir", cfg.out_dir}};
    return doc.dump(2) + "\n";
}

model::Architecture architecture_of(const RunConfig& cfg) {
    model::Architecture arch;
    arch.input_dim = cfg.task.d;
    arch.hidden = cfg.hidden;
    arch.classes = cfg.task.classes;
    return arch;
}

streambench::SourceTask make_task(const RunConfig& cfg) {
    streambench::SourceTaskConfig tc;
    tc.sigma = cfg.task.sigma;
    tc.train_size = cfg.task.train_size;
    tc.holdout_size = cfg.task.holdout_size;
    return streambench::make_source_task(cfg.task.d, cfg.task.classes,
                                         derive_seed(cfg.seed, seed_tag::task), tc);
}

std::vector<streambench::CorruptionKind> stream_kinds(const RunConfig& cfg) {
    std::vector<streambench::CorruptionKind> kinds;
    for (const auto& name : cfg.stream.kinds)
        kinds.push_back(streambench::corruption_from_name(name));
    return kinds;
}

}  // namespace sparnet::cli
