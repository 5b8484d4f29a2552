#pragma once

// Experiment parameters, validation, and the flat key-value config format.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qrouter {

// Tie-break rule among maximum matchings (ages in completed storage rounds):
//   S0  - first maximum matching in canonical enumeration order
//   S1a - minimize sum of pairwise age differences |delta_bi - delta_a|
//   S1b - maximize the same sum
//   S2  - minimize the sum of all ages in the matching
enum class Strategy { S0, S1a, S1b, S2 };

inline const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::S0: return "S0";
        case Strategy::S1a: return "S1a";
        case Strategy::S1b: return "S1b";
        case Strategy::S2: return "S2";
    }
    return "?";
}

inline std::optional<Strategy> parse_strategy(const std::string& s) {
    if (s == "S0") return Strategy::S0;
    if (s == "S1a") return Strategy::S1a;
    if (s == "S1b") return Strategy::S1b;
    if (s == "S2") return Strategy::S2;
    return std::nullopt;
}

// Implementation limits. The analytic engine is additionally guarded at
// n_parties * mem_per_party <= 12 (see analytic.hpp).
inline constexpr int kMaxParties = 16;
inline constexpr int kMaxMemoriesPerParty = 64;

struct Params {
    int n_parties = 3;            // N >= 2
    int mem_per_party = 4;        // m >= 1 memories per party in the router
    int max_conn_len = 1;         // w, 0 <= w <= m-1 (m-1 = full range)
    double transmittivity = 0.1;  // eta, per-round fill probability of an empty slot
    int decoherence_rounds = 100; // tau, white-noise parameter p(delta)=exp(-delta/tau)
    double p_ghz = 1.0;           // success probability of one GHZ measurement
    Strategy strategy = Strategy::S0;
    std::optional<int> cutoff;    // s_cutoff, max allowed storage age (absent = none)
    int total_rounds = 50;        // s_c
    int samples = 1000;           // Monte Carlo repetitions
    std::uint64_t rng_seed = 12345;

    int total_memories() const { return n_parties * mem_per_party; }
    bool full_range() const { return max_conn_len == mem_per_party - 1; }
};

// Collects every violated invariant; empty result means valid.
inline std::vector<std::string> validate(const Params& p) {
    std::vector<std::string> errors;
    if (p.n_parties < 2) errors.push_back("n_parties must be >= 2");
    if (p.n_parties > kMaxParties)
        errors.push_back("n_parties exceeds implementation limit " + std::to_string(kMaxParties));
    if (p.mem_per_party < 1) errors.push_back("mem_per_party must be >= 1");
    if (p.mem_per_party > kMaxMemoriesPerParty)
        errors.push_back("mem_per_party exceeds implementation limit " +
                         std::to_string(kMaxMemoriesPerParty));
    if (p.max_conn_len < 0) errors.push_back("max_conn_len must be >= 0");
    if (p.mem_per_party >= 1 && p.max_conn_len > p.mem_per_party - 1)
        errors.push_back("max_conn_len exceeds mem_per_party - 1");
    if (!(p.transmittivity >= 0.0 && p.transmittivity <= 1.0))
        errors.push_back("transmittivity out of [0,1]");
    if (!(p.p_ghz >= 0.0 && p.p_ghz <= 1.0)) errors.push_back("p_ghz out of [0,1]");
    if (p.decoherence_rounds < 1) errors.push_back("decoherence_rounds must be >= 1");
    if (p.cutoff && *p.cutoff < 1) errors.push_back("cutoff must be >= 1 when set");
    if (p.total_rounds < 1) errors.push_back("total_rounds must be >= 1");
    if (p.samples < 1) errors.push_back("samples must be >= 1");
    return errors;
}

// Exact analytic computations become infeasible beyond 12 total memories;
// callers of the analytic engine should warn (or require --force) past this.
inline constexpr int kAnalyticDimensionLimit = 12;

inline bool analytic_feasible(const Params& p) {
    return p.total_memories() <= kAnalyticDimensionLimit;
}

// Party-router distance implied by a channel transmittivity eta, for a fiber
// attenuation of alpha dB/km: d = -10/alpha * log10(eta). At the default
// alpha = 0.2 this gives d = 50 km for eta = 0.1.
inline double distance_km(double eta, double alpha_db_per_km = 0.2) {
    return -10.0 / alpha_db_per_km * std::log10(eta);
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

} // namespace detail

// Applies one "key = value" assignment. Throws std::invalid_argument on an
// unknown key or a malformed value.
inline void apply_setting(Params& p, const std::string& key, const std::string& value) {
    auto as_int = [&](const std::string& v) {
        std::size_t pos = 0;
        long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("invalid integer for " + key + ": " + v);
        return x;
    };
    auto as_real = [&](const std::string& v) {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("invalid number for " + key + ": " + v);
        return x;
    };

    if (key == "n_parties") p.n_parties = static_cast<int>(as_int(value));
    else if (key == "mem_per_party") p.mem_per_party = static_cast<int>(as_int(value));
    else if (key == "max_conn_len") p.max_conn_len = static_cast<int>(as_int(value));
    else if (key == "transmittivity") p.transmittivity = as_real(value);
    else if (key == "decoherence_rounds") p.decoherence_rounds = static_cast<int>(as_int(value));
    else if (key == "p_ghz") p.p_ghz = as_real(value);
    else if (key == "strategy") {
        auto s = parse_strategy(value);
        if (!s) throw std::invalid_argument("unknown strategy: " + value);
        p.strategy = *s;
    } else if (key == "cutoff") {
        if (value == "none") p.cutoff.reset();
        else p.cutoff = static_cast<int>(as_int(value));
    } else if (key == "total_rounds") p.total_rounds = static_cast<int>(as_int(value));
    else if (key == "samples") p.samples = static_cast<int>(as_int(value));
    else if (key == "rng_seed") p.rng_seed = static_cast<std::uint64_t>(as_int(value));
    else throw std::invalid_argument("unknown config key: " + key);
}

// Flat UTF-8 config: one `key = value` per line, `#` starts a comment.
inline Params parse_config(std::istream& in) {
    Params p;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        apply_setting(p, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return p;
}

inline Params load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    return parse_config(in);
}

// Canonical serialization: every key, fixed order, round-trips exactly.
inline std::vector<std::pair<std::string, std::string>> to_key_values(const Params& p) {
    auto real = [](double x) {
        std::ostringstream os;
        os.precision(17);
        os << x;
        return os.str();
    };
    return {
        {"n_parties", std::to_string(p.n_parties)},
        {"mem_per_party", std::to_string(p.mem_per_party)},
        {"max_conn_len", std::to_string(p.max_conn_len)},
        {"transmittivity", real(p.transmittivity)},
        {"decoherence_rounds", std::to_string(p.decoherence_rounds)},
        {"p_ghz", real(p.p_ghz)},
        {"strategy", to_string(p.strategy)},
        {"cutoff", p.cutoff ? std::to_string(*p.cutoff) : "none"},
        {"total_rounds", std::to_string(p.total_rounds)},
        {"samples", std::to_string(p.samples)},
        {"rng_seed", std::to_string(p.rng_seed)},
    };
}

inline std::string serialize_config(const Params& p) {
    std::string out;
    for (const auto& [k, v] : to_key_values(p)) out += k + " = " + v + "\n";
    return out;
}

} // namespace qrouter
