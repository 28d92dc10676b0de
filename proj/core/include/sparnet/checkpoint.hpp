#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "sparnet/importance.hpp"
#include "sparnet/model.hpp"

namespace sparnet::checkpoint {

/// On-disk model snapshot: architecture, trainable parameters in canonical
/// order, running statistics, and (optionally) the importance vector with the
/// checksum of the parameters it was computed against.
struct Checkpoint {
    model::ModelParams params;
    std::string rng_note;
    std::optional<importance::ImportanceVector> omega;
};

/// Serialize as a self-describing UTF-8 JSON document; floats carry 17
/// significant digits so load(save(p)) is bit-exact.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Parse and validate; throws FormatError naming the offending field on a
/// corrupt or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws FormatError naming the mismatched field when the checkpoint's
/// architecture differs from what the run expects.
void check_architecture(const model::ModelParams& loaded,
                        const model::Architecture& expected);

}  // namespace sparnet::checkpoint
