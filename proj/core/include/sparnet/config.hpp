#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sparnet/engine.hpp"
#include "sparnet/streambench.hpp"

namespace sparnet::cli {

/// One document describing a full run: task, model, pretraining, engine,
/// stream, and outputs. Every field has a default; unknown keys are rejected
/// at parse time. The resolved document is echoed into the run directory.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string profile = "cifar";  // "cifar" (paper-scale defaults) or "desk"

    struct Task {
        std::size_t d = 32;
        std::size_t classes = 10;
        double sigma = 0.25;
        std::size_t train_size = 4000;
        std::size_t holdout_size = 1000;
    } task;

    std::vector<std::size_t> hidden = {64};

    model::PretrainConfig pretrain;

    engine::EngineConfig engine;

    struct Stream {
        std::vector<std::string> kinds = {"gauss_noise", "impulse_mask", "rotation",
                                          "scale",       "shift",        "blur_avg"};
        int severity = 5;
        std::size_t batches_per_domain = 50;
    } stream;

    std::size_t importance_samples = 2000;  // desk profile lowers this to 512

    streambench::CorruptionConfig corruption;

    std::string out_dir = "runs/out";
};

using KeyValue = std::pair<std::string, std::string>;

/// Parse a JSON config document, apply the profile, then dotted-path
/// overrides (e.g. {"engine.lambda", "1.8"}). Throws ConfigError on unknown
/// keys, bad types, or unparseable values.
RunConfig parse_run_config(const std::string& text,
                           const std::vector<KeyValue>& overrides = {});

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<KeyValue>& overrides = {});

/// The fully resolved document (all defaults filled in), suitable for the
/// run-directory echo; parsing it back yields the same config.
std::string resolved_config_json(const RunConfig& cfg);

/// Derived helpers shared by the CLI commands.
model::Architecture architecture_of(const RunConfig& cfg);
streambench::SourceTask make_task(const RunConfig& cfg);
std::vector<streambench::CorruptionKind> stream_kinds(const RunConfig& cfg);

}  // namespace sparnet::cli
