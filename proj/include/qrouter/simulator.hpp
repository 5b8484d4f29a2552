#pragma once

// Monte Carlo execution of the multiplexing protocol.
//
// One protocol round:
//   1. storage    every empty slot fills with probability eta (fresh age 0)
//   2. measure    the strategy's maximum matching is found; each matched
//                 hyperedge attempts a GHZ measurement succeeding with
//                 probability p_ghz; matched slots are cleared regardless of
//                 success (the measurement consumes the qubits), and the age
//                 tuples of successful measurements are recorded
//   3. ageing     surviving qubits age by one round
//   4. cutoff     qubits whose age now exceeds s_cutoff are discarded
//
// Ensembles aggregate many independent protocol runs. All aggregation uses
// exact integer counters, so merged results are identical for any worker
// partitioning and the ensemble output is byte-reproducible for a fixed
// seed. Per-sample randomness comes from counter-derived streams: substream
// 0 drives storage, substream 1 drives GHZ successes. Storage draws one
// variate per slot per round whether or not the slot is empty, which keeps
// paired-seed runs of different strategies on identical storage histories.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <thread>
#include <vector>

#include "qrouter/matching.hpp"
#include "qrouter/memory_state.hpp"
#include "qrouter/params.hpp"
#include "qrouter/rng.hpp"

namespace qrouter {

// Ages of one successful measurement, (delta_a, delta_b1, ...); entries
// beyond n_parties stay 0.
using AgeTuple = std::array<std::uint32_t, kMaxParties>;

struct RoundRecord {
    int round = 0;
    int num_measurements = 0;          // successful GHZ measurements
    std::vector<AgeTuple> age_tuples;  // one per success
};

inline void step_storage(MemoryState& state, double eta, Xoshiro256& rng) {
    for (auto& age : state.ages) {
        const bool fill = rng.bernoulli(eta);
        if (age == kEmptySlot && fill) age = 0;
    }
}

inline RoundRecord step_measure(MemoryState& state, int round, const Params& p,
                                Xoshiro256& ghz_rng,
                                long long node_limit = kDefaultNodeLimit) {
    RoundRecord rec;
    rec.round = round;
    const Matching match = strategy_max_matching(state, p.max_conn_len, p.strategy, node_limit);
    for (const auto& e : match.edges) {
        bool success = true;
        if (p.p_ghz < 1.0)
            success = p.p_ghz > 0.0 && ghz_rng.bernoulli(p.p_ghz);
        if (success) {
            AgeTuple t{};
            for (int q = 0; q < p.n_parties; ++q)
                t[q] = static_cast<std::uint32_t>(state.at(q, e.slot[q]));
            rec.age_tuples.push_back(t);
        }
        for (int q = 0; q < p.n_parties; ++q) state.at(q, e.slot[q]) = kEmptySlot;
    }
    rec.num_measurements = static_cast<int>(rec.age_tuples.size());
    return rec;
}

inline void increment_ages(MemoryState& state) {
    for (auto& age : state.ages)
        if (age != kEmptySlot) ++age;
}

// Discard every qubit whose age exceeds the cutoff. Runs on post-increment
// ages: a qubit stored s_cutoff rounds is kept, one stored s_cutoff + 1 is
// removed.
inline void step_cutoff(MemoryState& state, int s_cutoff) {
    if (s_cutoff < 1) throw std::invalid_argument("cutoff must be >= 1");
    for (auto& age : state.ages)
        if (age > s_cutoff) age = kEmptySlot;
}

// One full protocol run; sample_index selects the random streams.
inline std::vector<RoundRecord> run_protocol(const Params& p, std::uint64_t sample_index = 0,
                                             long long node_limit = kDefaultNodeLimit) {
    Xoshiro256 storage_rng = derive_stream(p.rng_seed, sample_index, 0);
    Xoshiro256 ghz_rng = derive_stream(p.rng_seed, sample_index, 1);
    MemoryState state(p.n_parties, p.mem_per_party);
    std::vector<RoundRecord> records;
    records.reserve(p.total_rounds);
    for (int s = 1; s <= p.total_rounds; ++s) {
        step_storage(state, p.transmittivity, storage_rng);
        records.push_back(step_measure(state, s, p, ghz_rng, node_limit));
        increment_ages(state);
        if (p.cutoff) step_cutoff(state, *p.cutoff);
    }
    return records;
}

// Ensemble aggregates. Everything is an exact integer count; derived means
// and errors are computed on demand. Age statistics (per-party marginals and
// joint age tuples per round) are optional because rate studies do not need
// them and they dominate memory when enabled.
struct EnsembleStats {
    int n_parties = 0;
    int mem_per_party = 0;
    int rounds = 0;
    long long samples = 0;
    bool has_age_stats = false;

    std::vector<std::uint64_t> success_sum;    // [round-1]: sum of l over samples
    std::vector<std::uint64_t> success_sq_sum; // [round-1]: sum of l^2
    std::uint64_t total_sum = 0;               // sum over samples of per-run totals
    std::uint64_t total_sq_sum = 0;            // sum of squared per-run totals

    // [round-1][party][age]: successful-measurement age counts
    std::vector<std::vector<std::vector<std::uint64_t>>> age_marginal;
    // [round-1]: age tuple -> count
    std::vector<std::map<AgeTuple, std::uint64_t>> joint_age;

    void init(const Params& p, bool age_stats) {
        n_parties = p.n_parties;
        mem_per_party = p.mem_per_party;
        rounds = p.total_rounds;
        samples = 0;
        has_age_stats = age_stats;
        success_sum.assign(rounds, 0);
        success_sq_sum.assign(rounds, 0);
        total_sum = total_sq_sum = 0;
        if (age_stats) {
            age_marginal.assign(
                rounds, std::vector<std::vector<std::uint64_t>>(
                            n_parties, std::vector<std::uint64_t>()));
            for (int s = 1; s <= rounds; ++s)
                for (auto& per_party : age_marginal[s - 1]) per_party.assign(s, 0);
            joint_age.assign(rounds, {});
        }
    }

    void add_run(const std::vector<RoundRecord>& records) {
        std::uint64_t total = 0;
        for (const auto& rec : records) {
            const int idx = rec.round - 1;
            const std::uint64_t l = rec.num_measurements;
            success_sum[idx] += l;
            success_sq_sum[idx] += l * l;
            total += l;
            if (has_age_stats)
                for (const auto& t : rec.age_tuples) {
                    for (int q = 0; q < n_parties; ++q) ++age_marginal[idx][q][t[q]];
                    ++joint_age[idx][t];
                }
        }
        total_sum += total;
        total_sq_sum += total * total;
        ++samples;
    }

    void merge(const EnsembleStats& other) {
        samples += other.samples;
        for (int i = 0; i < rounds; ++i) {
            success_sum[i] += other.success_sum[i];
            success_sq_sum[i] += other.success_sq_sum[i];
        }
        total_sum += other.total_sum;
        total_sq_sum += other.total_sq_sum;
        if (has_age_stats) {
            for (int i = 0; i < rounds; ++i) {
                for (int q = 0; q < n_parties; ++q)
                    for (std::size_t a = 0; a < age_marginal[i][q].size(); ++a)
                        age_marginal[i][q][a] += other.age_marginal[i][q][a];
                for (const auto& [tuple, count] : other.joint_age[i])
                    joint_age[i][tuple] += count;
            }
        }
    }

    // <l>(s), its standard error, and the router rate R(s_c).
    double mean_l(int s) const {
        return static_cast<double>(success_sum[s - 1]) / static_cast<double>(samples);
    }
    double stderr_l(int s) const {
        const double n = static_cast<double>(samples);
        const double mean = mean_l(s);
        const double var =
            static_cast<double>(success_sq_sum[s - 1]) / n - mean * mean;
        return var > 0.0 ? std::sqrt(var / n) : 0.0;
    }
    double router_rate(int s_c) const {
        std::uint64_t cumulative = 0;
        for (int s = 1; s <= s_c; ++s) cumulative += success_sum[s - 1];
        return static_cast<double>(cumulative) /
               (static_cast<double>(samples) * mem_per_party * s_c);
    }
    // Standard error of R at the final round (per-run totals are tracked
    // only there).
    double router_rate_stderr_final() const {
        const double n = static_cast<double>(samples);
        const double mean = static_cast<double>(total_sum) / n;
        const double var = static_cast<double>(total_sq_sum) / n - mean * mean;
        const double scale = static_cast<double>(mem_per_party) * rounds;
        return var > 0.0 ? std::sqrt(var / n) / scale : 0.0;
    }
};

struct EnsembleOptions {
    bool collect_age_stats = false;
    int threads = 1;
    long long node_limit = kDefaultNodeLimit;
};

// Run `p.samples` independent protocol runs and aggregate. The sample space
// is split into contiguous chunks per worker; since all accumulators are
// exact integer counts and sample streams depend only on (seed, sample
// index), the result is identical for every thread count.
inline EnsembleStats run_ensemble(const Params& p, const EnsembleOptions& opt = {}) {
    const int threads = std::max(1, opt.threads);
    std::vector<EnsembleStats> partial(threads);
    for (auto& st : partial) st.init(p, opt.collect_age_stats);

    auto worker = [&](int t) {
        const long long lo = p.samples * t / threads;
        const long long hi = p.samples * (t + 1) / threads;
        for (long long i = lo; i < hi; ++i)
            partial[t].add_run(run_protocol(p, static_cast<std::uint64_t>(i), opt.node_limit));
    };

    if (threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }

    EnsembleStats& out = partial[0];
    for (int t = 1; t < threads; ++t) out.merge(partial[t]);
    return out;
}

} // namespace qrouter
