#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sparnet::report {

/// One run's digest, parsed from a per-batch metrics CSV. lambda/beta/seed
/// come from the sibling config.resolved.json when present.
struct RunSummary {
    std::string method;
    std::vector<std::pair<std::string, double>> domain_errors;  // stream order
    double mean_error = 0.0;
    std::optional<double> lambda;
    std::optional<double> beta;
    std::optional<std::uint64_t> seed;
    std::string source_path;
};

/// Parse one metrics CSV (header must match the engine's exactly; throws
/// FormatError otherwise).
RunSummary summarize_metrics_csv(const std::filesystem::path& csv_path);

/// Methods-by-domains comparison. Best (lowest) per column marked with '*'.
std::string comparison_text(const std::vector<RunSummary>& runs);
std::string comparison_csv(const std::vector<RunSummary>& runs);

struct SweepPoint {
    double value = 0.0;
    double mean_error = 0.0;
};

/// When the inputs span several lambda (resp. beta) values for one method,
/// collapse them into one mean-error point per swept value (seeds averaged).
std::vector<SweepPoint> lambda_sweep(const std::vector<RunSummary>& runs);
std::vector<SweepPoint> beta_sweep(const std::vector<RunSummary>& runs);

std::string sweep_text(const std::string& name, const std::vector<SweepPoint>& points);

}  // namespace sparnet::report
