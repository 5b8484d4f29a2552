#pragma once

// Experiment front end shared by the CLI: command implementations that run
// the engines, write versioned CSV/JSON artifacts, and the self-verification
// suite cross-checking every engine against an independent oracle.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qrouter/analytic.hpp"
#include "qrouter/density_oracle.hpp"
#include "qrouter/io.hpp"
#include "qrouter/key_pipeline.hpp"
#include "qrouter/matching.hpp"
#include "qrouter/memory_state.hpp"
#include "qrouter/noise.hpp"
#include "qrouter/params.hpp"
#include "qrouter/rng.hpp"
#include "qrouter/simulator.hpp"
#include "qrouter/version.hpp"

namespace qrouter {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitVerification = 3;

struct ExperimentSpec {
    Params params;
    std::string output_dir = "out";
    bool force = false;
    bool quick = false;
    int threads = 1;
    // sweep-cutoff targets; nullopt = run without cutoff
    std::vector<std::optional<int>> cutoffs = {8, 9, 10, 11, 12, 13};
    // verify-only fault injection: corrupts the closed-form lambdas so the
    // oracle comparison must detect the mismatch
    bool inject_lambda_fault = false;
};

namespace detail {

inline int report_validation(const Params& p, std::ostream& log) {
    const auto errors = validate(p);
    for (const auto& e : errors) log << "config error: " << e << "\n";
    return errors.empty() ? kExitOk : kExitValidation;
}

inline std::filesystem::path out_path(const ExperimentSpec& spec, const std::string& file) {
    return std::filesystem::path(spec.output_dir) / file;
}

inline std::string cutoff_label(const std::optional<int>& c) {
    return c ? std::to_string(*c) : std::string("none");
}

} // namespace detail

// ---------------------------------------------------------------------------
// analytic-rate
// ---------------------------------------------------------------------------

inline int cmd_analytic_rate(const ExperimentSpec& spec, std::ostream& log) {
    const Params& p = spec.params;
    if (int rc = detail::report_validation(p, log)) return rc;
    if (p.cutoff) {
        log << "config error: the analytic engine does not support a memory cutoff\n";
        return kExitValidation;
    }
    if (!analytic_feasible(p) && !spec.force) {
        log << "config error: n_parties*mem_per_party = " << p.total_memories() << " exceeds "
            << kAnalyticDimensionLimit << " (rerun with --force to override)\n";
        return kExitValidation;
    }

    AnalyticRates rates;
    try {
        rates = analytic_rates(p, spec.force);
    } catch (const std::exception& e) {
        log << "config error: " << e.what() << "\n";
        return kExitValidation;
    }

    std::vector<std::string> columns{"round"};
    for (int l = 0; l <= p.mem_per_party; ++l) columns.push_back("prob_lambda_" + std::to_string(l));
    for (int l = 0; l <= p.mem_per_party; ++l) columns.push_back("prob_sigma_" + std::to_string(l));
    columns.push_back("expected_l");
    columns.push_back("router_rate");

    CsvBuilder csv(p, columns);
    for (int s = 1; s <= p.total_rounds; ++s) {
        std::vector<std::string> row{std::to_string(s)};
        for (double v : rates.prob_lambda[s - 1]) row.push_back(format_double(v));
        for (double v : rates.prob_sigma[s - 1]) row.push_back(format_double(v));
        row.push_back(format_double(rates.expected_l[s - 1]));
        row.push_back(format_double(rates.rate[s - 1]));
        csv.add_row(row);
    }
    write_file_atomic(detail::out_path(spec, "analytic_rate.csv"), csv.str());

    ordered_json j = json_sidecar_base(p);
    j["converged"] = rates.converged;
    j["convergence_round"] = rates.converged ? ordered_json(rates.convergence_round)
                                             : ordered_json(nullptr);
    j["asymptotic_rate"] = rates.asymptotic_rate;
    j["final_rate"] = rates.rate.back();
    write_json_atomic(detail::out_path(spec, "analytic_rate.json"), j);

    log << "analytic-rate: R(" << p.total_rounds << ") = " << format_double(rates.rate.back())
        << ", asymptotic " << format_double(rates.asymptotic_rate) << "\n";
    log << "wrote " << detail::out_path(spec, "analytic_rate.csv").string() << "\n";
    log << "wrote " << detail::out_path(spec, "analytic_rate.json").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

inline ordered_json age_stats_json(const EnsembleStats& stats) {
    ordered_json marginals = ordered_json::array();
    ordered_json joint = ordered_json::array();
    for (int s = 1; s <= stats.rounds; ++s) {
        ordered_json per_party = ordered_json::array();
        for (int q = 0; q < stats.n_parties; ++q)
            per_party.push_back(stats.age_marginal[s - 1][q]);
        marginals.push_back(std::move(per_party));

        ordered_json tuples = ordered_json::array();
        for (const auto& [tuple, count] : stats.joint_age[s - 1]) {
            ordered_json entry;
            std::vector<std::uint32_t> ages(tuple.begin(), tuple.begin() + stats.n_parties);
            entry["ages"] = ages;
            entry["count"] = count;
            tuples.push_back(std::move(entry));
        }
        joint.push_back(std::move(tuples));
    }
    ordered_json j;
    j["age_marginals"] = std::move(marginals);
    j["joint_age_tuples"] = std::move(joint);
    return j;
}

inline int cmd_simulate(const ExperimentSpec& spec, std::ostream& log) {
    const Params& p = spec.params;
    if (int rc = detail::report_validation(p, log)) return rc;

    EnsembleOptions opt;
    opt.collect_age_stats = true;
    opt.threads = spec.threads;
    const EnsembleStats stats = run_ensemble(p, opt);

    CsvBuilder csv(p, {"round", "mean_l", "stderr_l", "router_rate"});
    for (int s = 1; s <= p.total_rounds; ++s)
        csv.add_row({std::to_string(s), format_double(stats.mean_l(s)),
                     format_double(stats.stderr_l(s)), format_double(stats.router_rate(s))});
    write_file_atomic(detail::out_path(spec, "simulate.csv"), csv.str());

    ordered_json j = json_sidecar_base(p);
    j["samples"] = stats.samples;
    j["final_router_rate"] = stats.router_rate(p.total_rounds);
    j.update(age_stats_json(stats));
    write_json_atomic(detail::out_path(spec, "simulate.json"), j);

    log << "simulate: R(" << p.total_rounds << ") = "
        << format_double(stats.router_rate(p.total_rounds)) << " from " << stats.samples
        << " samples\n";
    log << "wrote " << detail::out_path(spec, "simulate.csv").string() << "\n";
    log << "wrote " << detail::out_path(spec, "simulate.json").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// key-rate (shared by compare-strategies and sweep-cutoff)
// ---------------------------------------------------------------------------

inline std::string key_rate_csv(const Params& p, const std::vector<KeyRatePoint>& curve) {
    std::vector<std::string> columns{"round", "router_rate"};
    for (const char* mode : {"joint", "marginal"}) {
        columns.push_back(std::string("q_x_") + mode);
        for (int i = 1; i < p.n_parties; ++i)
            columns.push_back("q_ab" + std::to_string(i) + "_" + mode);
        columns.push_back(std::string("secret_fraction_") + mode);
        columns.push_back(std::string("key_rate_") + mode);
    }
    CsvBuilder csv(p, columns);
    for (const auto& pt : curve) {
        std::vector<std::string> row{std::to_string(pt.round), format_double(pt.router_rate)};
        for (int mode = 0; mode < 2; ++mode) {
            const QberSet& q = mode == 0 ? pt.qber_joint : pt.qber_marginal;
            row.push_back(format_double(q.q_x));
            for (double v : q.q_ab) row.push_back(format_double(v));
            row.push_back(format_double(mode == 0 ? pt.secret_fraction_joint
                                                  : pt.secret_fraction_marginal));
            row.push_back(format_double(mode == 0 ? pt.key_rate_joint : pt.key_rate_marginal));
        }
        csv.add_row(row);
    }
    return csv.str();
}

// Count of successful measurements whose age tuple contains no fresh qubit.
// The tripartite analysis assumes one fidelity is 1 in every measurement;
// this is not guaranteed, so occurrences are reported, not enforced.
inline std::uint64_t tuples_without_fresh_qubit(const EnsembleStats& stats) {
    std::uint64_t count = 0;
    for (const auto& per_round : stats.joint_age)
        for (const auto& [tuple, c] : per_round) {
            bool fresh = false;
            for (int q = 0; q < stats.n_parties && !fresh; ++q) fresh = tuple[q] == 0;
            if (!fresh) count += c;
        }
    return count;
}

inline ordered_json key_rate_summary_json(const Params& p, const EnsembleStats& stats,
                                          const std::vector<KeyRatePoint>& curve) {
    ordered_json j = json_sidecar_base(p);
    const KeyRatePoint& last = curve.back();
    j["samples"] = stats.samples;
    j["final_router_rate"] = last.router_rate;
    j["final_key_rate_joint"] = last.key_rate_joint;
    j["final_key_rate_marginal"] = last.key_rate_marginal;
    j["final_secret_fraction_joint"] = last.secret_fraction_joint;
    j["final_secret_fraction_marginal"] = last.secret_fraction_marginal;
    j["peak_round_joint"] = key_rate_peak_round(curve, QberMode::joint);
    j["peak_round_marginal"] = key_rate_peak_round(curve, QberMode::marginal);
    j["tuples_without_fresh_qubit"] = tuples_without_fresh_qubit(stats);
    return j;
}

inline int check_key_rate_supported(const Params& p, std::ostream& log) {
    if (int rc = detail::report_validation(p, log)) return rc;
    if (p.n_parties > kOracleMaxParties) {
        log << "config error: QBER evaluation supports at most " << kOracleMaxParties
            << " parties (got " << p.n_parties << ")\n";
        return kExitValidation;
    }
    return kExitOk;
}

inline int cmd_key_rate(const ExperimentSpec& spec, std::ostream& log) {
    const Params& p = spec.params;
    if (int rc = check_key_rate_supported(p, log)) return rc;

    EnsembleOptions opt;
    opt.collect_age_stats = true;
    opt.threads = spec.threads;
    const EnsembleStats stats = run_ensemble(p, opt);
    const auto curve = key_rate_curve(stats, p.decoherence_rounds);

    write_file_atomic(detail::out_path(spec, "key_rate.csv"), key_rate_csv(p, curve));
    write_json_atomic(detail::out_path(spec, "key_rate.json"),
                      key_rate_summary_json(p, stats, curve));

    log << "key-rate: K(" << p.total_rounds << ") joint = "
        << format_double(curve.back().key_rate_joint) << ", marginal = "
        << format_double(curve.back().key_rate_marginal) << ", peak round "
        << key_rate_peak_round(curve, QberMode::joint) << "\n";
    log << "wrote " << detail::out_path(spec, "key_rate.csv").string() << "\n";
    log << "wrote " << detail::out_path(spec, "key_rate.json").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// compare-strategies
// ---------------------------------------------------------------------------

inline int cmd_compare_strategies(const ExperimentSpec& spec, std::ostream& log) {
    if (int rc = check_key_rate_supported(spec.params, log)) return rc;

    const std::array<Strategy, 4> strategies{Strategy::S0, Strategy::S1a, Strategy::S1b,
                                             Strategy::S2};
    ordered_json summary = json_sidecar_base(spec.params);
    ordered_json per_strategy;
    std::map<Strategy, std::vector<KeyRatePoint>> curves;

    for (Strategy strat : strategies) {
        Params p = spec.params;
        p.strategy = strat; // identical seed: paired samples share storage randomness
        EnsembleOptions opt;
        opt.collect_age_stats = true;
        opt.threads = spec.threads;
        const EnsembleStats stats = run_ensemble(p, opt);
        auto curve = key_rate_curve(stats, p.decoherence_rounds);

        const std::string name = to_string(strat);
        write_file_atomic(detail::out_path(spec, "key_rate_" + name + ".csv"),
                          key_rate_csv(p, curve));
        ordered_json entry;
        entry["final_key_rate_joint"] = curve.back().key_rate_joint;
        entry["final_key_rate_marginal"] = curve.back().key_rate_marginal;
        entry["final_router_rate"] = curve.back().router_rate;
        entry["peak_round_joint"] = key_rate_peak_round(curve, QberMode::joint);
        per_strategy[name] = std::move(entry);
        log << "strategy " << name << ": K(" << p.total_rounds << ") joint = "
            << format_double(curve.back().key_rate_joint) << "\n";
        curves[strat] = std::move(curve);
    }

    // Soft observations (logged, not enforced): S2 should dominate in the
    // long run; S1a tends to beat S0 early with a crossover later.
    const double k_s0 = curves[Strategy::S0].back().key_rate_joint;
    const double k_s1a = curves[Strategy::S1a].back().key_rate_joint;
    const double k_s1b = curves[Strategy::S1b].back().key_rate_joint;
    const double k_s2 = curves[Strategy::S2].back().key_rate_joint;
    const bool s2_dominates = k_s2 >= k_s0 && k_s2 >= k_s1a && k_s2 >= k_s1b;

    bool s1a_early_lead = false;
    const int early_limit = std::min<int>(20, spec.params.total_rounds);
    for (int s = 1; s <= early_limit && !s1a_early_lead; ++s)
        s1a_early_lead = curves[Strategy::S1a][s - 1].key_rate_joint >
                         curves[Strategy::S0][s - 1].key_rate_joint;

    summary["strategies"] = std::move(per_strategy);
    summary["s2_dominates_long_run"] = s2_dominates;
    summary["s1a_leads_s0_early"] = s1a_early_lead;
    summary["s0_beats_s1a_long_run"] = k_s0 >= k_s1a;
    write_json_atomic(detail::out_path(spec, "compare_strategies.json"), summary);

    log << "note: S2 dominates long run: " << (s2_dominates ? "yes" : "no")
        << "; S1a leads S0 early: " << (s1a_early_lead ? "yes" : "no") << "\n";
    log << "wrote " << detail::out_path(spec, "compare_strategies.json").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep-cutoff
// ---------------------------------------------------------------------------

inline int cmd_sweep_cutoff(const ExperimentSpec& spec, std::ostream& log) {
    if (int rc = check_key_rate_supported(spec.params, log)) return rc;
    if (spec.cutoffs.empty()) {
        log << "config error: sweep-cutoff needs a non-empty cutoff list\n";
        return kExitValidation;
    }
    for (const auto& c : spec.cutoffs)
        if (c && *c < 1) {
            log << "config error: cutoff must be >= 1 (got " << *c << ")\n";
            return kExitValidation;
        }

    ordered_json summary = json_sidecar_base(spec.params);
    ordered_json entries = ordered_json::array();
    std::string best_label;
    double best_key = -1.0;
    std::vector<std::pair<std::optional<int>, double>> final_rates;

    for (const auto& cutoff : spec.cutoffs) {
        Params p = spec.params;
        p.cutoff = cutoff;
        EnsembleOptions opt;
        opt.collect_age_stats = true;
        opt.threads = spec.threads;
        const EnsembleStats stats = run_ensemble(p, opt);
        const auto curve = key_rate_curve(stats, p.decoherence_rounds);
        const std::string label = detail::cutoff_label(cutoff);

        write_file_atomic(detail::out_path(spec, "key_rate_cutoff_" + label + ".csv"),
                          key_rate_csv(p, curve));

        ordered_json entry;
        entry["cutoff"] = cutoff ? ordered_json(*cutoff) : ordered_json(nullptr);
        entry["final_key_rate_joint"] = curve.back().key_rate_joint;
        entry["final_key_rate_marginal"] = curve.back().key_rate_marginal;
        entry["final_router_rate"] = curve.back().router_rate;
        entry["peak_round_joint"] = key_rate_peak_round(curve, QberMode::joint);
        entries.push_back(std::move(entry));

        final_rates.emplace_back(cutoff, curve.back().router_rate);
        if (curve.back().key_rate_joint > best_key) {
            best_key = curve.back().key_rate_joint;
            best_label = label;
        }
        log << "cutoff " << label << ": K(" << p.total_rounds << ") joint = "
            << format_double(curve.back().key_rate_joint) << ", R = "
            << format_double(curve.back().router_rate) << "\n";
    }

    // Router rate should not decrease when the cutoff is relaxed (compared
    // over the integer cutoffs in ascending order).
    std::vector<std::pair<int, double>> integer_rates;
    for (const auto& [c, r] : final_rates)
        if (c) integer_rates.emplace_back(*c, r);
    std::sort(integer_rates.begin(), integer_rates.end());
    bool rate_monotone = true;
    for (std::size_t i = 1; i < integer_rates.size(); ++i)
        rate_monotone = rate_monotone && integer_rates[i].second >= integer_rates[i - 1].second;

    summary["sweep"] = std::move(entries);
    summary["best_cutoff"] = best_label;
    summary["router_rate_non_decreasing_in_cutoff"] = rate_monotone;
    write_json_atomic(detail::out_path(spec, "sweep_cutoff.json"), summary);

    log << "best cutoff by long-run key rate: " << best_label << "\n";
    log << "wrote " << detail::out_path(spec, "sweep_cutoff.json").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// debug-instance
// ---------------------------------------------------------------------------

inline int cmd_debug_instance(const std::vector<std::string>& party_bits, int w,
                              std::ostream& log) {
    if (party_bits.size() < 2) {
        log << "config error: need at least two parties of 0/1 slot flags\n";
        return kExitValidation;
    }
    const std::size_t m = party_bits[0].size();
    std::vector<std::vector<int>> rows;
    for (const auto& s : party_bits) {
        if (s.size() != m || m == 0) {
            log << "config error: party bit strings must be equal, non-empty lengths\n";
            return kExitValidation;
        }
        std::vector<int> row;
        for (char ch : s) {
            if (ch != '0' && ch != '1') {
                log << "config error: bit strings may contain only 0 and 1\n";
                return kExitValidation;
            }
            row.push_back(ch - '0');
        }
        rows.push_back(std::move(row));
    }
    if (w < 0 || w > static_cast<int>(m) - 1) {
        log << "config error: max_conn_len must lie in [0, m-1]\n";
        return kExitValidation;
    }
    log << format_instance(make_config(rows), w);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

namespace verify_detail {

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

inline BitConfiguration random_config(Xoshiro256& rng, int n, int m, double fill) {
    BitConfiguration c(n, m);
    for (auto& b : c.bits) b = rng.bernoulli(fill) ? 1 : 0;
    return c;
}

// Independent exhaustive enumeration of every matching (all pairwise
// disjoint hyperedge subsets), used as the oracle for the search solvers.
inline void collect_matchings(const std::vector<Hyperedge>& edges, int n_parties,
                              std::size_t from, std::array<std::uint64_t, kMaxParties>& used,
                              std::vector<Hyperedge>& current, std::vector<Matching>& out) {
    Matching m;
    m.edges = current;
    out.push_back(std::move(m));
    for (std::size_t i = from; i < edges.size(); ++i) {
        const Hyperedge& e = edges[i];
        bool clash = false;
        for (int p = 0; p < n_parties && !clash; ++p) clash = (used[p] >> e.slot[p]) & 1ull;
        if (clash) continue;
        for (int p = 0; p < n_parties; ++p) used[p] |= 1ull << e.slot[p];
        current.push_back(e);
        collect_matchings(edges, n_parties, i + 1, used, current, out);
        current.pop_back();
        for (int p = 0; p < n_parties; ++p) used[p] &= ~(1ull << e.slot[p]);
    }
}

inline std::vector<Matching> all_matchings(const HypergraphInstance& inst) {
    std::array<std::uint64_t, kMaxParties> used{};
    std::vector<Hyperedge> current;
    std::vector<Matching> out;
    collect_matchings(inst.hyperedges, inst.filled.n_parties, 0, used, current, out);
    return out;
}

inline bool lex_less(const Matching& a, const Matching& b) {
    return std::lexicographical_compare(a.edges.begin(), a.edges.end(), b.edges.begin(),
                                        b.edges.end());
}

inline Check check_worked_example(bool /*quick*/) {
    Check c{"worked_matching_example", false, ""};
    const BitConfiguration config =
        make_config({{1, 0, 1, 0}, {1, 1, 0, 1}, {0, 0, 1, 1}});
    const int expect_card[4] = {0, 1, 2, 2}; // indexed by w
    for (int w = 0; w <= 3; ++w) {
        const int l = canonical_max_matching(config, w).size();
        if (l != expect_card[w]) {
            c.detail = "w=" + std::to_string(w) + " cardinality " + std::to_string(l) +
                       " != " + std::to_string(expect_card[w]);
            return c;
        }
    }
    const auto edges = enumerate_hyperedges(config, 1);
    std::vector<std::string> shown;
    for (const auto& e : edges) shown.push_back(format_hyperedge(e));
    const std::vector<std::string> expect = {"{2,3,3}", "{2,3,4}", "{4,3,3}", "{4,3,4}"};
    if (shown != expect) {
        c.detail = "w=1 hyperedge set mismatch";
        return c;
    }
    const Matching pick = canonical_max_matching(config, 1);
    if (pick.size() != 1 || format_hyperedge(pick.edges[0]) != "{2,3,3}") {
        c.detail = "canonical w=1 pick is not {2,3,3}";
        return c;
    }
    c.pass = true;
    c.detail = "cardinalities (w=3,2,1,0) = 2,2,1,0; hyperedges and canonical pick match";
    return c;
}

inline Check check_lambda_oracle(bool quick, bool inject_fault) {
    Check c{"lambda_closed_form_vs_circuit_oracle", false, ""};
    const int trials = quick ? 200 : 1000;
    Xoshiro256 rng(0x5eedbeefULL);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const double fa = 0.25 + 0.75 * rng.next_double();
        const double fb1 = 0.25 + 0.75 * rng.next_double();
        const double fb2 = 0.25 + 0.75 * rng.next_double();
        GhzDiagonal3 closed = ghz_diag_lambdas(fa, fb1, fb2);
        if (inject_fault) closed.lambda0_minus = -closed.lambda0_minus;
        const GhzDiagonal3 oracle = circuit_oracle_3(fa, fb1, fb2);
        worst = std::max({worst, std::abs(closed.lambda0_plus - oracle.lambda0_plus),
                          std::abs(closed.lambda0_minus - oracle.lambda0_minus),
                          std::abs(closed.lambda1 - oracle.lambda1),
                          std::abs(closed.lambda2 - oracle.lambda2),
                          std::abs(closed.lambda3 - oracle.lambda3)});
        const DensityMatrix rho = circuit_oracle_state({fa, fb1, fb2});
        const double off = max_off_ghz_diagonal(rho);
        worst = std::max(worst, off);
    }
    c.pass = worst < 1e-10;
    std::ostringstream os;
    os << trials << " random fidelity triples, max deviation " << worst;
    c.detail = os.str();
    return c;
}

inline Check check_lambda_grid(bool quick) {
    Check c{"lambda_grid_normalization", false, ""};
    const int grid = quick ? 12 : 50;
    double worst_trace = 0.0, worst_negative = 0.0;
    bool monotone = true;
    std::vector<double> fs(grid);
    for (int i = 0; i < grid; ++i) fs[i] = 0.25 + 0.75 * i / (grid - 1);
    std::vector<double> prev_f0(grid * grid, -1.0);
    for (int ia = 0; ia < grid; ++ia)
        for (int ib = 0; ib < grid; ++ib)
            for (int ic = 0; ic < grid; ++ic) {
                const GhzDiagonal3 lam = ghz_diag_lambdas(fs[ia], fs[ib], fs[ic]);
                worst_trace = std::max(worst_trace, std::abs(lam.trace() - 1.0));
                for (double v : {lam.lambda0_plus, lam.lambda0_minus, lam.lambda1, lam.lambda2,
                                 lam.lambda3})
                    worst_negative = std::max(worst_negative, -v);
                // lambda0_plus (the GHZ fidelity) must grow along the A axis
                double& prev = prev_f0[ib * grid + ic];
                if (prev >= 0.0 && lam.lambda0_plus < prev - 1e-12) monotone = false;
                prev = lam.lambda0_plus;
            }
    c.pass = worst_trace < 1e-12 && worst_negative < 1e-12 && monotone;
    std::ostringstream os;
    os << grid << "^3 grid: |trace-1| <= " << worst_trace << ", min lambda >= "
       << -worst_negative << ", fidelity monotone: " << (monotone ? "yes" : "no");
    c.detail = os.str();
    return c;
}

inline Check check_flow_vs_bruteforce(bool quick) {
    Check c{"flow3_vs_bruteforce", false, ""};
    const int trials = quick ? 60 : 200;
    Xoshiro256 rng(0xf10f10ULL);
    for (int t = 0; t < trials; ++t) {
        const int m = 2 + static_cast<int>(rng.next_u64() % 4); // 2..5
        const int w = static_cast<int>(rng.next_u64() % m);     // 0..m-1
        const double fill = 0.25 + 0.5 * rng.next_double();
        const BitConfiguration config = random_config(rng, 3, m, fill);
        const Matching flow = max_matching_flow3(config, w);
        const Matching brute = max_matching_bruteforce(build_instance(config, w));
        if (flow.size() != brute.size()) {
            c.detail = "cardinality mismatch at trial " + std::to_string(t) + ": flow " +
                       std::to_string(flow.size()) + " vs brute " + std::to_string(brute.size());
            return c;
        }
        if (!is_disjoint(flow, 3) || !is_disjoint(brute, 3)) {
            c.detail = "non-disjoint matching at trial " + std::to_string(t);
            return c;
        }
    }
    c.pass = true;
    c.detail = std::to_string(trials) + " random tripartite instances agree";
    return c;
}

inline Check check_bounds(bool quick) {
    Check c{"cardinality_bounds", false, ""};
    const int trials = quick ? 40 : 120;
    Xoshiro256 rng(0xb0d5ULL);
    int lower_violations = 0;
    for (int t = 0; t < trials; ++t) {
        const int n = 4 + static_cast<int>(rng.next_u64() % 2); // 4 or 5
        const int m = 2 + static_cast<int>(rng.next_u64() % 2); // 2 or 3
        const int w = static_cast<int>(rng.next_u64() % m);
        const BitConfiguration config = random_config(rng, n, m, 0.5);
        const CardinalityBounds bounds = cardinality_bounds(config, w);
        const int l = max_matching_bruteforce(build_instance(config, w)).size();
        if (l > bounds.upper) {
            c.detail = "upper bound violated at trial " + std::to_string(t);
            return c;
        }
        if (l < bounds.lower) ++lower_violations; // reported, not asserted
    }
    c.pass = true;
    c.detail = std::to_string(trials) + " N=4,5 instances obey the upper bound; " +
               std::to_string(lower_violations) +
               " stated-lower-bound shortfalls observed (reported only)";
    return c;
}

inline Check check_solver_regimes(bool quick) {
    Check c{"trivial_regime_solvers", false, ""};
    const int trials = quick ? 60 : 200;
    Xoshiro256 rng(0x7e91ULL);
    for (int t = 0; t < trials; ++t) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 3); // 2..4
        const int m = 2 + static_cast<int>(rng.next_u64() % 3); // 2..4
        const BitConfiguration config = random_config(rng, n, m, 0.5);
        const int parallel = max_matching_parallel(config).size();
        const int brute0 = max_matching_bruteforce(build_instance(config, 0)).size();
        if (parallel != brute0) {
            c.detail = "w=0 mismatch at trial " + std::to_string(t);
            return c;
        }
        const int full = max_matching_fullrange(config).size();
        const int bruteF = max_matching_bruteforce(build_instance(config, m - 1)).size();
        if (full != bruteF) {
            c.detail = "w=m-1 mismatch at trial " + std::to_string(t);
            return c;
        }
    }
    c.pass = true;
    c.detail = std::to_string(trials) + " random configs: parallel and full-range agree with "
               "exhaustive search";
    return c;
}

inline Check check_weighted_strategies(bool quick) {
    Check c{"weighted_strategy_optima", false, ""};
    const int trials = quick ? 30 : 100;
    Xoshiro256 rng(0x57a7ULL);
    for (int t = 0; t < trials; ++t) {
        const int n = 3;
        const int m = 2 + static_cast<int>(rng.next_u64() % 3); // 2..4
        const int w = std::max(1, static_cast<int>(rng.next_u64() % m));
        MemoryState state(n, m);
        for (auto& age : state.ages)
            if (rng.bernoulli(0.6)) age = static_cast<int>(rng.next_u64() % 7);
        const BitConfiguration config = to_bit_configuration(state);
        const HypergraphInstance inst = build_instance(config, w);
        if (inst.hyperedges.size() > 12) {
            --t;
            continue;
        }
        const auto everything = all_matchings(inst);
        int max_card = 0;
        for (const auto& mm : everything) max_card = std::max(max_card, mm.size());

        for (Strategy strat : {Strategy::S1a, Strategy::S1b, Strategy::S2}) {
            const Matching got = max_matching_weighted(inst, state, strat);
            if (got.size() != max_card) {
                c.detail = to_string(strat) + std::string(" lost cardinality at trial ") +
                           std::to_string(t);
                return c;
            }
            auto weight = [&](const Matching& mm) {
                long long sum = 0;
                for (const auto& e : mm.edges)
                    sum += strat == Strategy::S2 ? edge_weight_w2(e, state)
                                                 : edge_weight_w1(e, state);
                return sum;
            };
            const Matching* best = nullptr;
            for (const auto& mm : everything) {
                if (mm.size() != max_card) continue;
                if (!best) {
                    best = &mm;
                    continue;
                }
                const long long wm = weight(mm), wb = weight(*best);
                const bool better = strat == Strategy::S1b ? wm > wb : wm < wb;
                if (better || (wm == wb && lex_less(mm, *best))) best = &mm;
            }
            if (weight(got) != weight(*best) ||
                !std::equal(got.edges.begin(), got.edges.end(), best->edges.begin(),
                            best->edges.end())) {
                c.detail = to_string(strat) + std::string(" optimum mismatch at trial ") +
                           std::to_string(t);
                return c;
            }
        }
    }
    c.pass = true;
    c.detail = std::to_string(trials) +
               " random aged instances: S1a/S1b/S2 match exhaustive optima with lex tie-break";
    return c;
}

inline Check check_storage_stochastic(bool /*quick*/) {
    Check c{"storage_transition_stochastic", false, ""};
    Xoshiro256 rng(0xe9e9ULL);
    double worst = 0.0;
    for (int t = 0; t < 25; ++t) {
        const int n = 2, m = 1 + static_cast<int>(rng.next_u64() % 3); // up to 6 bits
        const double eta = rng.next_double();
        const BitConfiguration from = random_config(rng, n, m, 0.5);
        double sum = 0.0;
        const std::size_t count = std::size_t{1} << (n * m);
        for (std::size_t idx = 0; idx < count; ++idx)
            sum += storage_transition_prob(from, index_to_config(static_cast<std::uint32_t>(idx),
                                                                 n, m), eta);
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    // the in-place storage pass must conserve probability mass as well
    TransitionModel model(2, 3, 1);
    ConfigDistribution dist = empty_start_distribution(2, 3);
    for (int s = 0; s < 5; ++s) {
        model.apply_storage(dist, 0.37);
        double sum = 0.0;
        for (double v : dist) sum += v;
        worst = std::max(worst, std::abs(sum - 1.0));
        ConfigDistribution scratch;
        model.apply_measurement(dist, scratch);
    }
    c.pass = worst < 1e-12;
    std::ostringstream os;
    os << "row sums and evolved mass within " << worst << " of 1";
    c.detail = os.str();
    return c;
}

inline Check check_analytic_vs_mc(bool quick) {
    Check c{"analytic_vs_monte_carlo", false, ""};
    struct Case {
        int n, m, w;
    };
    const std::vector<Case> cases = {{2, 1, 0}, {2, 2, 1}, {3, 2, 1}};
    const int samples = quick ? 5000 : 20000;
    double worst_z = 0.0, worst_rate = 0.0;
    for (const auto& cs : cases) {
        Params p;
        p.n_parties = cs.n;
        p.mem_per_party = cs.m;
        p.max_conn_len = cs.w;
        p.transmittivity = 0.3;
        p.p_ghz = 1.0;
        p.strategy = Strategy::S0;
        p.total_rounds = 20;
        p.samples = samples;
        p.rng_seed = 424242;
        const AnalyticRates ana = analytic_rates(p);
        const EnsembleStats mc = run_ensemble(p);
        for (int s = 1; s <= p.total_rounds; ++s) {
            double second = 0.0;
            for (std::size_t l = 0; l < ana.prob_sigma[s - 1].size(); ++l)
                second += static_cast<double>(l) * l * ana.prob_sigma[s - 1][l];
            const double mean = ana.expected_l[s - 1];
            const double se = std::sqrt(std::max(0.0, second - mean * mean) / p.samples);
            if (se == 0.0) {
                if (mc.mean_l(s) != mean) {
                    c.detail = "deterministic round mismatch";
                    return c;
                }
                continue;
            }
            worst_z = std::max(worst_z, std::abs(mc.mean_l(s) - mean) / se);
        }
        const double ra = ana.rate.back();
        const double rm = mc.router_rate(p.total_rounds);
        worst_rate = std::max(worst_rate, std::abs(rm - ra) / ra);
    }
    c.pass = worst_z < 4.5 && worst_rate < 0.03;
    std::ostringstream os;
    os << cases.size() << " configs at " << samples << " samples: max |z| = " << worst_z
       << ", max rate rel. diff = " << worst_rate;
    c.detail = os.str();
    return c;
}

inline Check check_qber_model(bool quick) {
    Check c{"qber_model_vs_closed_form", false, ""};
    const int trials = quick ? 50 : 200;
    const QberModel model(3);
    Xoshiro256 rng(0x9b3aULL);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const std::vector<double> f = {0.25 + 0.75 * rng.next_double(),
                                       0.25 + 0.75 * rng.next_double(),
                                       0.25 + 0.75 * rng.next_double()};
        const QberSet closed = qbers_3(ghz_diag_lambdas(f[0], f[1], f[2]));
        const QberSet fitted = model.evaluate(f);
        worst = std::max({worst, std::abs(closed.q_x - fitted.q_x),
                          std::abs(closed.q_ab[0] - fitted.q_ab[0]),
                          std::abs(closed.q_ab[1] - fitted.q_ab[1])});
    }
    c.pass = worst < 1e-10;
    std::ostringstream os;
    os << trials << " random triples: max |closed - multilinear fit| = " << worst;
    c.detail = os.str();
    return c;
}

inline Check check_entropy_threshold(bool /*quick*/) {
    Check c{"entropy_and_threshold", false, ""};
    const bool edges = binary_entropy(0.0) == 0.0 && binary_entropy(1.0) == 0.0 &&
                       binary_entropy(0.5) == 1.0;
    QberSet q;
    q.q_x = 0.11;
    q.q_ab = {0.11, 0.11};
    const double r_threshold = secret_fraction(q);
    bool above_zero = true;
    for (double qv : {0.111, 0.12, 0.2, 0.35, 0.5}) {
        q.q_x = qv;
        q.q_ab = {qv, qv};
        above_zero = above_zero && secret_fraction(q) == 0.0;
    }
    q.q_x = 0.0;
    q.q_ab = {0.0, 0.0};
    const bool perfect = secret_fraction(q) == 1.0;
    c.pass = edges && r_threshold >= 0.0 && r_threshold < 0.01 && above_zero && perfect;
    std::ostringstream os;
    os << "r(0.11,0.11) = " << r_threshold << "; r = 0 for QBER >= 0.111";
    c.detail = os.str();
    return c;
}

} // namespace verify_detail

inline int cmd_verify(const ExperimentSpec& spec, std::ostream& log) {
    using namespace verify_detail;
    std::vector<Check> checks;
    checks.push_back(check_worked_example(spec.quick));
    checks.push_back(check_lambda_oracle(spec.quick, spec.inject_lambda_fault));
    checks.push_back(check_lambda_grid(spec.quick));
    checks.push_back(check_qber_model(spec.quick));
    checks.push_back(check_flow_vs_bruteforce(spec.quick));
    checks.push_back(check_bounds(spec.quick));
    checks.push_back(check_solver_regimes(spec.quick));
    checks.push_back(check_weighted_strategies(spec.quick));
    checks.push_back(check_storage_stochastic(spec.quick));
    checks.push_back(check_analytic_vs_mc(spec.quick));
    checks.push_back(check_entropy_threshold(spec.quick));

    int passed = 0;
    for (const auto& c : checks) {
        log << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << "\n";
        passed += c.pass;
    }
    log << "verification: " << passed << "/" << checks.size() << " checks passed\n";
    return passed == static_cast<int>(checks.size()) ? kExitOk : kExitVerification;
}

} // namespace qrouter
