#include "sparnet/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sparnet/errors.hpp"

namespace sparnet::checkpoint {

namespace {

using nlohmann::json;

void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

void append_array(std::string& out, std::span<const double> values) {
    out += '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        append_double(out, values[i]);
    }
    out += ']';
}

std::vector<double> collect_running(const model::ModelParams& p, bool variance) {
    std::vector<double> v;
    for (const auto& l : p.layers) {
        const auto& src = variance ? l.running_var : l.running_mean;
        v.insert(v.end(), src.begin(), src.end());
    }
    return v;
}

const json& require_field(const json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end()) throw FormatError(std::string("checkpoint: missing field '") + name + "'");
    return *it;
}

std::vector<double> read_double_array(const json& j, const char* name) {
    const json& arr = require_field(j, name);
    if (!arr.is_array()) throw FormatError(std::string("checkpoint: field '") + name + "' is not an array");
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_number()) throw FormatError(std::string("checkpoint: non-numeric entry in '") + name + "'");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto& p = ckpt.params;
    std::string out;
    out.reserve(32 * p.param_count());
    out += "{\n\"format_version\": 1,\n\"architecture\": {\"d\": ";
    out += std::to_string(p.arch.input_dim);
    out += ", \"hidden\": [";
    for (std::size_t i = 0; i < p.arch.hidden.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(p.arch.hidden[i]);
    }
    out += "], \"C\": ";
    out += std::to_string(p.arch.classes);
    out += "},\n\"params\": ";
    append_array(out, p.flatten());
    out += ",\n\"running_mean\": ";
    append_array(out, collect_running(p, false));
    out += ",\n\"running_var\": ";
    append_array(out, collect_running(p, true));
    out += ",\n\"rng_note\": ";
    out += json(ckpt.rng_note).dump();
    if (ckpt.omega.has_value()) {
        out += ",\n\"omega\": ";
        append_array(out, ckpt.omega->values);
        out += ",\n\"omega_sample_count\": ";
        out += std::to_string(ckpt.omega->sample_count);
        out += ",\n\"theta0_checksum\": ";
        out += json(ckpt.omega->theta0_checksum).dump();
    }
    out += "\n}\n";

    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("checkpoint: cannot open for writing: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("checkpoint: cannot open: " + path.string());
    std::stringstream buf;
    buf << f.rdbuf();

    json j;
    try {
        j = json::parse(buf.str());
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: parse failure: ") + e.what());
    }

    const json& ver = require_field(j, "format_version");
    if (!ver.is_number_integer() || ver.get<int>() != 1)
        throw FormatError("checkpoint: unsupported 'format_version'");

    const json& arch_j = require_field(j, "architecture");
    model::Architecture arch;
    const json& d = require_field(arch_j, "d");
    const json& hidden = require_field(arch_j, "hidden");
    const json& c = require_field(arch_j, "C");
    if (!d.is_number_unsigned() || !c.is_number_unsigned() || !hidden.is_array())
        throw FormatError("checkpoint: malformed 'architecture'");
    arch.input_dim = d.get<std::size_t>();
    arch.classes = c.get<std::size_t>();
    arch.hidden.clear();
    for (const auto& h : hidden) {
        if (!h.is_number_unsigned()) throw FormatError("checkpoint: malformed 'hidden'");
        arch.hidden.push_back(h.get<std::size_t>());
    }

    Checkpoint ckpt;
    ckpt.params = model::ModelParams::init(arch, 0);

    const auto flat = read_double_array(j, "params");
    if (flat.size() != arch.param_count())
        throw FormatError("checkpoint: 'params' length does not match architecture");
    ckpt.params.unflatten(flat);

    auto rm = read_double_array(j, "running_mean");
    auto rv = read_double_array(j, "running_var");
    std::size_t stat_count = 0;
    for (std::size_t h : arch.hidden) stat_count += h;
    if (rm.size() != stat_count) throw FormatError("checkpoint: 'running_mean' length mismatch");
    if (rv.size() != stat_count) throw FormatError("checkpoint: 'running_var' length mismatch");
    std::size_t pos = 0;
    for (auto& l : ckpt.params.layers) {
        for (std::size_t f2 = 0; f2 < l.running_mean.size(); ++f2, ++pos) {
            if (!(rv[pos] > 0.0)) throw FormatError("checkpoint: 'running_var' entry not positive");
            l.running_mean[f2] = rm[pos];
            l.running_var[f2] = rv[pos];
        }
    }

    const json& note = require_field(j, "rng_note");
    if (!note.is_string()) throw FormatError("checkpoint: 'rng_note' is not a string");
    ckpt.rng_note = note.get<std::string>();

    if (j.contains("omega")) {
        importance::ImportanceVector omega;
        omega.values = read_double_array(j, "omega");
        if (omega.values.size() != arch.param_count())
            throw FormatError("checkpoint: 'omega' length does not match architecture");
        for (double v : omega.values)
            if (v < 0.0) throw FormatError("checkpoint: negative 'omega' entry");
        const json& q = require_field(j, "omega_sample_count");
        if (!q.is_number_unsigned()) throw FormatError("checkpoint: malformed 'omega_sample_count'");
        omega.sample_count = q.get<std::size_t>();
        const json& ck = require_field(j, "theta0_checksum");
        if (!ck.is_string()) throw FormatError("checkpoint: 'theta0_checksum' is not a string");
        omega.theta0_checksum = ck.get<std::string>();
        ckpt.omega = std::move(omega);
    }
    return ckpt;
}

void check_architecture(const model::ModelParams& loaded,
                        const model::Architecture& expected) {
    const auto& a = loaded.arch;
    if (a.input_dim != expected.input_dim)
        throw FormatError("checkpoint: architecture mismatch on 'd' (checkpoint " +
                          std::to_string(a.input_dim) + ", run " +
                          std::to_string(expected.input_dim) + ")");
    if (a.hidden != expected.hidden)
        throw FormatError("checkpoint: architecture mismatch on 'hidden'");
    if (a.classes != expected.classes)
        throw FormatError("checkpoint: architecture mismatch on 'C' (checkpoint " +
                          std::to_string(a.classes) + ", run " +
                          std::to_string(expected.classes) + ")");
}

}  // namespace sparnet::checkpoint
