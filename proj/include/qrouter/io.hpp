#pragma once

// Output plumbing: deterministic number formatting, CSV assembly with the
// resolved parameter set embedded as comment headers, JSON sidecar helpers,
// and atomic file writes (temp file + rename). Outputs carry no timestamps
// or environment details, so re-running a spec byte-reproduces every file.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qrouter/params.hpp"
#include "qrouter/version.hpp"

namespace qrouter {

using ordered_json = nlohmann::ordered_json;

// Shortest decimal form that round-trips to the same double; NaN prints as
// "nan" (the undefined-value marker in CSV columns).
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_int(long long v) { return std::to_string(v); }

// `# key = value` header lines carrying the code version, the schema
// version, and the full resolved parameter set.
inline std::string csv_param_header(const Params& p, int schema_version = kCsvSchemaVersion) {
    std::ostringstream os;
    os << "# " << kVersion << "\n";
    os << "# schema_version = " << schema_version << "\n";
    for (const auto& [key, value] : to_key_values(p)) os << "# " << key << " = " << value << "\n";
    return os.str();
}

class CsvBuilder {
public:
    CsvBuilder(const Params& p, std::vector<std::string> columns)
        : columns_(std::move(columns)) {
        body_ << csv_param_header(p);
        for (std::size_t i = 0; i < columns_.size(); ++i)
            body_ << (i ? "," : "") << columns_[i];
        body_ << "\n";
    }

    void add_row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_.size())
            throw std::invalid_argument("CSV row width mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) body_ << (i ? "," : "") << cells[i];
        body_ << "\n";
    }

    std::string str() const { return body_.str(); }

private:
    std::vector<std::string> columns_;
    std::ostringstream body_;
};

inline ordered_json params_json(const Params& p) {
    ordered_json j;
    j["n_parties"] = p.n_parties;
    j["mem_per_party"] = p.mem_per_party;
    j["max_conn_len"] = p.max_conn_len;
    j["transmittivity"] = p.transmittivity;
    j["decoherence_rounds"] = p.decoherence_rounds;
    j["p_ghz"] = p.p_ghz;
    j["strategy"] = to_string(p.strategy);
    if (p.cutoff)
        j["cutoff"] = *p.cutoff;
    else
        j["cutoff"] = nullptr;
    j["total_rounds"] = p.total_rounds;
    j["samples"] = p.samples;
    j["rng_seed"] = p.rng_seed;
    return j;
}

inline ordered_json json_sidecar_base(const Params& p) {
    ordered_json j;
    j["version"] = kVersion;
    j["schema_version"] = kJsonSchemaVersion;
    j["params"] = params_json(p);
    return j;
}

// Write via a temporary file in the same directory, then rename over the
// destination, so readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path dir = path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline void write_json_atomic(const std::filesystem::path& path, const ordered_json& j) {
    write_file_atomic(path, j.dump(2) + "\n");
}

} // namespace qrouter
