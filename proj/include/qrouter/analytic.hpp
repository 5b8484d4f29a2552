#pragma once

// Exact evolution of the router's memory occupation as a Markov chain over
// bit configurations.
//
// State space: all 2^(N*m) occupation patterns. One protocol round is
//   storage      each empty slot fills independently with probability eta
//                (occupied slots stay occupied; no spontaneous loss),
//   measurement  the canonical maximum matching is removed from the pattern.
// The matching-size distribution Prob[Lambda = l](s) is read off after the
// storage step of round s; imperfect GHZ measurements thin it binomially to
// Prob[Sigma = l](s), from which the expected matchings per round and the
// router rate follow.
//
// The chain is age-blind, so it covers the age-independent strategy without
// memory cutoff exactly. Dimension guard: N*m <= kAnalyticDimensionLimit.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qrouter/matching.hpp"
#include "qrouter/memory_state.hpp"
#include "qrouter/params.hpp"

namespace qrouter {

// Hard wall for --force runs: 2^24 configurations (~100 MB of tables).
inline constexpr int kAnalyticForcedLimit = 24;

// Single-slot storage transition probability: empty slots fill with
// probability eta, occupied slots persist.
inline double slot_transition_prob(int from, int to, double eta) {
    return (1.0 - eta) * (1 - to) * (1 - from) + eta * to * (1 - from) +
           static_cast<double>(to * from);
}

// Full transition probability between occupation patterns (product over
// slots). Zero whenever `to` drops an occupied slot.
inline double storage_transition_prob(const BitConfiguration& from, const BitConfiguration& to,
                                      double eta) {
    double p = 1.0;
    for (std::size_t i = 0; i < from.bits.size(); ++i)
        p *= slot_transition_prob(from.bits[i], to.bits[i], eta);
    return p;
}

// Probability distribution over configuration indices.
using ConfigDistribution = std::vector<double>;

inline ConfigDistribution empty_start_distribution(int n_parties, int mem_per_party) {
    ConfigDistribution d(std::size_t{1} << (n_parties * mem_per_party), 0.0);
    d[0] = 1.0;
    return d;
}

// Precomputed per-configuration matching data for fixed (N, m, w).
class TransitionModel {
public:
    // `force` lifts the standard dimension guard (up to a hard memory wall).
    TransitionModel(int n_parties, int mem_per_party, int w, bool force = false)
        : n_(n_parties), m_(mem_per_party), w_(w) {
        const int bits = n_ * m_;
        const int limit = force ? kAnalyticForcedLimit : kAnalyticDimensionLimit;
        if (bits > limit)
            throw std::invalid_argument(
                "analytic engine limited to n_parties*mem_per_party <= " +
                std::to_string(limit) + " (got " + std::to_string(bits) + ")");
        const std::size_t count = std::size_t{1} << bits;
        matching_size_.resize(count);
        measured_.resize(count);
        for (std::size_t idx = 0; idx < count; ++idx) {
            const BitConfiguration c = index_to_config(idx, n_, m_);
            const Matching match = canonical_max_matching(c, w_);
            matching_size_[idx] = static_cast<std::uint8_t>(match.size());
            BitConfiguration after = c;
            for (const auto& e : match.edges)
                for (int p = 0; p < n_; ++p) after.set(p, e.slot[p], false);
            measured_[idx] = static_cast<std::uint32_t>(config_to_index(after));
        }
    }

    int n_parties() const { return n_; }
    int mem_per_party() const { return m_; }
    int max_conn_len() const { return w_; }
    std::size_t state_count() const { return matching_size_.size(); }

    int matching_size(std::size_t idx) const { return matching_size_[idx]; }
    std::size_t measured_index(std::size_t idx) const { return measured_[idx]; }

    // Storage step, in place. Slots fill independently, so one pass per bit
    // (splitting each configuration's mass between "stays empty" and
    // "fills") reproduces the joint transition.
    void apply_storage(ConfigDistribution& dist, double eta) const {
        const int bits = n_ * m_;
        for (int b = 0; b < bits; ++b) {
            const std::size_t bit = std::size_t{1} << b;
            for (std::size_t c = 0; c < dist.size(); ++c) {
                if (c & bit) continue;
                const double p = dist[c];
                if (p == 0.0) continue;
                dist[c] = p * (1.0 - eta);
                dist[c | bit] += p * eta;
            }
        }
    }

    // Measurement step: collapse every configuration onto its pattern with
    // the canonical maximum matching removed.
    void apply_measurement(ConfigDistribution& dist, ConfigDistribution& scratch) const {
        scratch.assign(dist.size(), 0.0);
        for (std::size_t c = 0; c < dist.size(); ++c)
            if (dist[c] != 0.0) scratch[measured_[c]] += dist[c];
        dist.swap(scratch);
    }

    // Prob[Lambda = l] under the given configuration distribution.
    std::vector<double> lambda_distribution(const ConfigDistribution& dist) const {
        std::vector<double> out(static_cast<std::size_t>(m_) + 1, 0.0);
        for (std::size_t c = 0; c < dist.size(); ++c) out[matching_size_[c]] += dist[c];
        return out;
    }

    // Number of configurations whose maximum matching has cardinality l.
    std::vector<long long> size_histogram() const {
        std::vector<long long> h(static_cast<std::size_t>(m_) + 1, 0);
        for (std::size_t c = 0; c < matching_size_.size(); ++c) ++h[matching_size_[c]];
        return h;
    }

private:
    int n_, m_, w_;
    std::vector<std::uint8_t> matching_size_;
    std::vector<std::uint32_t> measured_;
};

inline long long binomial_coefficient(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    long long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// Thin the matching-size distribution by independent measurement successes:
// Prob[Sigma = l] = sum_{i >= l} C(i, l) Prob[Lambda = i] p^l (1-p)^(i-l).
inline std::vector<double> sigma_distribution(const std::vector<double>& prob_lambda,
                                              double p_ghz) {
    const int max_l = static_cast<int>(prob_lambda.size()) - 1;
    std::vector<double> out(prob_lambda.size(), 0.0);
    for (int l = 0; l <= max_l; ++l)
        for (int i = l; i <= max_l; ++i)
            out[l] += static_cast<double>(binomial_coefficient(i, l)) * prob_lambda[i] *
                      std::pow(p_ghz, l) * std::pow(1.0 - p_ghz, i - l);
    return out;
}

inline double expected_value(const std::vector<double>& prob) {
    double e = 0.0;
    for (std::size_t l = 0; l < prob.size(); ++l) e += static_cast<double>(l) * prob[l];
    return e;
}

struct AnalyticRates {
    // index s-1 holds round s (read after that round's storage step)
    std::vector<std::vector<double>> prob_lambda;
    std::vector<std::vector<double>> prob_sigma;
    std::vector<double> expected_l; // <l>(s) = E[Sigma](s)
    std::vector<double> rate;       // R(s_c) = (1/s_c) sum_{s<=s_c} <l>(s)/m

    bool converged = false;
    int convergence_round = 0;    // first round with |<l>(s) - <l>(s-1)| < tol
    double asymptotic_rate = 0.0; // <l>(last)/m
};

// Evolve the chain from the empty router for `rounds` rounds. `tol` controls
// the steady-state detector on consecutive <l>(s) values.
inline AnalyticRates analytic_rates(const TransitionModel& model, double eta, double p_ghz,
                                    int rounds, double tol = 1e-12) {
    if (rounds < 1) throw std::invalid_argument("analytic_rates needs rounds >= 1");
    AnalyticRates out;
    ConfigDistribution dist =
        empty_start_distribution(model.n_parties(), model.mem_per_party());
    ConfigDistribution scratch;
    double cumulative = 0.0;
    for (int s = 1; s <= rounds; ++s) {
        model.apply_storage(dist, eta);
        std::vector<double> lambda = model.lambda_distribution(dist);
        std::vector<double> sigma = sigma_distribution(lambda, p_ghz);
        const double el = expected_value(sigma);
        cumulative += el / model.mem_per_party();
        out.rate.push_back(cumulative / s);
        if (!out.converged && s >= 2 &&
            std::abs(el - out.expected_l.back()) < tol) {
            out.converged = true;
            out.convergence_round = s;
        }
        out.expected_l.push_back(el);
        out.prob_lambda.push_back(std::move(lambda));
        out.prob_sigma.push_back(std::move(sigma));
        model.apply_measurement(dist, scratch);
    }
    out.asymptotic_rate = out.expected_l.back() / model.mem_per_party();
    return out;
}

// Convenience wrapper driven by a full parameter set. The chain carries no
// memory ages, so it cannot honor a cutoff, and it always measures the
// canonical matching (the age-dependent tie-breaks need the simulator).
inline AnalyticRates analytic_rates(const Params& p, bool force = false, double tol = 1e-12) {
    if (p.cutoff.has_value())
        throw std::invalid_argument("analytic engine does not support a memory cutoff");
    TransitionModel model(p.n_parties, p.mem_per_party, p.max_conn_len, force);
    return analytic_rates(model, p.transmittivity, p.p_ghz, p.total_rounds, tol);
}

} // namespace qrouter
