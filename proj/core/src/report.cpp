#include "sparnet/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "sparnet/engine.hpp"
#include "sparnet/errors.hpp"

namespace sparnet::report {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

RunSummary summarize_metrics_csv(const std::filesystem::path& csv_path) {
    std::ifstream f(csv_path);
    if (!f) throw FormatError("report: cannot open " + csv_path.string());

    std::string line;
    if (!std::getline(f, line)) throw FormatError("report: empty file " + csv_path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != engine::kMetricsCsvHeader)
        throw FormatError("report: header mismatch in " + csv_path.string());

    RunSummary summary;
    summary.source_path = csv_path.string();
    std::vector<std::string> domain_order;
    std::map<std::string, std::pair<double, std::size_t>> acc;

    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 13)
            throw FormatError("report: bad row in " + csv_path.string());
        const std::string& domain = cells[1];
        if (summary.method.empty()) summary.method = cells[3];
        double err = 0.0;
        try {
            err = std::stod(cells[4]);
        } catch (const std::exception&) {
            throw FormatError("report: non-numeric batch_err in " + csv_path.string());
        }
        if (!acc.count(domain)) domain_order.push_back(domain);
        auto& slot = acc[domain];
        slot.first += err;
        slot.second += 1;
    }
    if (domain_order.empty()) throw FormatError("report: no rows in " + csv_path.string());

    double sum = 0.0;
    for (const auto& d : domain_order) {
        const auto& slot = acc[d];
        const double mean = slot.first / static_cast<double>(slot.second);
        summary.domain_errors.emplace_back(d, mean);
        sum += mean;
    }
    summary.mean_error = sum / static_cast<double>(domain_order.size());

    // Sibling resolved config, when the CSV sits inside a run directory.
    const auto cfg_path = csv_path.parent_path() / "config.resolved.json";
    std::ifstream cf(cfg_path);
    if (cf) {
        try {
            nlohmann::json j = nlohmann::json::parse(cf);
            if (j.contains("engine")) {
                if (j["engine"].contains("lambda")) summary.lambda = j["engine"]["lambda"].get<double>();
                if (j["engine"].contains("beta")) summary.beta = j["engine"]["beta"].get<double>();
            }
            if (j.contains("seed")) summary.seed = j["seed"].get<std::uint64_t>();
        } catch (const nlohmann::json::exception&) {
            // Config echo unreadable; the summary simply lacks lambda/beta.
        }
    }
    return summary;
}

namespace {

std::vector<std::string> union_domains(const std::vector<RunSummary>& runs) {
    std::vector<std::string> domains;
    for (const auto& r : runs)
        for (const auto& [d, e] : r.domain_errors)
            if (std::find(domains.begin(), domains.end(), d) == domains.end())
                domains.push_back(d);
    return domains;
}

std::optional<double> domain_error(const RunSummary& r, const std::string& domain) {
    for (const auto& [d, e] : r.domain_errors)
        if (d == domain) return e;
    return std::nullopt;
}

std::string run_label(const RunSummary& r, bool disambiguate) {
    std::string label = r.method;
    if (disambiguate) {
        if (r.lambda) label += " l=" + fmt(*r.lambda);
        if (r.beta) label += " b=" + fmt(*r.beta);
        if (r.seed) label += " s" + std::to_string(*r.seed);
    }
    return label;
}

}  // namespace

std::string comparison_text(const std::vector<RunSummary>& runs) {
    const auto domains = union_domains(runs);

    // Labels need disambiguation when a method name repeats.
    std::map<std::string, int> method_count;
    for (const auto& r : runs) method_count[r.method]++;

    std::vector<std::string> labels;
    std::size_t label_w = 6;
    for (const auto& r : runs) {
        labels.push_back(run_label(r, method_count[r.method] > 1));
        label_w = std::max(label_w, labels.back().size());
    }

    // Best per column.
    std::vector<double> best(domains.size() + 1, 1e300);
    for (const auto& r : runs) {
        for (std::size_t c = 0; c < domains.size(); ++c) {
            const auto e = domain_error(r, domains[c]);
            if (e) best[c] = std::min(best[c], *e);
        }
        best[domains.size()] = std::min(best[domains.size()], r.mean_error);
    }

    std::ostringstream os;
    os << std::string(label_w, ' ');
    for (const auto& d : domains) os << "  " << d;
    os << "  mean\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& r = runs[i];
        os << labels[i] << std::string(label_w - labels[i].size(), ' ');
        for (std::size_t c = 0; c < domains.size(); ++c) {
            const auto e = domain_error(r, domains[c]);
            std::string cell = e ? fmt(*e) : "-";
            if (e && *e == best[c]) cell += "*";
            os << "  " << cell << std::string(domains[c].size() > cell.size()
                                                  ? domains[c].size() - cell.size()
                                                  : 0,
                                              ' ');
        }
        std::string cell = fmt(r.mean_error);
        if (r.mean_error == best[domains.size()]) cell += "*";
        os << "  " << cell << "\n";
    }
    return os.str();
}

std::string comparison_csv(const std::vector<RunSummary>& runs) {
    const auto domains = union_domains(runs);
    std::ostringstream os;
    os << "method,lambda,beta,seed";
    for (const auto& d : domains) os << "," << d;
    os << ",mean\n";
    for (const auto& r : runs) {
        os << r.method << ",";
        if (r.lambda) os << *r.lambda;
        os << ",";
        if (r.beta) os << *r.beta;
        os << ",";
        if (r.seed) os << *r.seed;
        for (const auto& d : domains) {
            os << ",";
            const auto e = domain_error(r, d);
            if (e) os << fmt(*e);
        }
        os << "," << fmt(r.mean_error) << "\n";
    }
    return os.str();
}

namespace {

std::vector<SweepPoint> sweep_over(const std::vector<RunSummary>& runs, bool over_lambda) {
    std::map<double, std::pair<double, std::size_t>> acc;
    for (const auto& r : runs) {
        const auto& v = over_lambda ? r.lambda : r.beta;
        if (!v) continue;
        auto& slot = acc[*v];
        slot.first += r.mean_error;
        slot.second += 1;
    }
    std::vector<SweepPoint> points;
    if (acc.size() < 2) return points;  // not a sweep
    for (const auto& [value, slot] : acc)
        points.push_back({value, slot.first / static_cast<double>(slot.second)});
    return points;
}

}  // namespace

std::vector<SweepPoint> lambda_sweep(const std::vector<RunSummary>& runs) {
    return sweep_over(runs, true);
}

std::vector<SweepPoint> beta_sweep(const std::vector<RunSummary>& runs) {
    return sweep_over(runs, false);
}

std::string sweep_text(const std::string& name, const std::vector<SweepPoint>& points) {
    std::ostringstream os;
    os << name << " sweep:\n";
    for (const auto& p : points) os << "  " << name << "=" << fmt(p.value) << "  mean_err=" << fmt(p.mean_error) << "\n";
    return os.str();
}

}  // namespace sparnet::report
