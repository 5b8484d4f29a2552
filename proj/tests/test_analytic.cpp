#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "qrouter/analytic.hpp"

using namespace qrouter;

namespace {

// Reference storage step: dense transition matrix built entry by entry from
// the per-configuration transition probability (no per-bit shortcut).
ConfigDistribution dense_storage(const ConfigDistribution& dist, int n, int m, double eta) {
    ConfigDistribution out(dist.size(), 0.0);
    for (std::size_t from = 0; from < dist.size(); ++from) {
        if (dist[from] == 0.0) continue;
        const BitConfiguration cf = index_to_config(static_cast<std::uint32_t>(from), n, m);
        for (std::size_t to = 0; to < dist.size(); ++to) {
            const BitConfiguration ct = index_to_config(static_cast<std::uint32_t>(to), n, m);
            out[to] += dist[from] * storage_transition_prob(cf, ct, eta);
        }
    }
    return out;
}

} // namespace

TEST_CASE("single-slot transition probabilities", "[analytic]") {
    const double eta = 0.3;
    CHECK(slot_transition_prob(0, 0, eta) == Catch::Approx(0.7));
    CHECK(slot_transition_prob(0, 1, eta) == Catch::Approx(0.3));
    CHECK(slot_transition_prob(1, 1, eta) == Catch::Approx(1.0));
    CHECK(slot_transition_prob(1, 0, eta) == Catch::Approx(0.0)); // no spontaneous loss
}

TEST_CASE("configuration transitions multiply slot factors", "[analytic]") {
    const double eta = 0.25;
    const BitConfiguration from = index_to_config(0b0011, 2, 2);
    SECTION("gains multiply eta factors") {
        const BitConfiguration to = index_to_config(0b1011, 2, 2);
        CHECK(storage_transition_prob(from, to, eta) == Catch::Approx(eta * (1 - eta)));
    }
    SECTION("dropping an occupied slot is impossible") {
        const BitConfiguration to = index_to_config(0b0001, 2, 2);
        CHECK(storage_transition_prob(from, to, eta) == 0.0);
    }
    SECTION("rows sum to one") {
        for (std::uint32_t f = 0; f < 16; ++f) {
            double sum = 0.0;
            const BitConfiguration cf = index_to_config(f, 2, 2);
            for (std::uint32_t t = 0; t < 16; ++t)
                sum += storage_transition_prob(cf, index_to_config(t, 2, 2), eta);
            CHECK(sum == Catch::Approx(1.0));
        }
    }
}

TEST_CASE("in-place storage pass equals the dense transition matrix", "[analytic]") {
    for (const auto& [n, m, eta] : {std::tuple{2, 2, 0.37}, {3, 1, 0.8}, {2, 3, 0.05}}) {
        TransitionModel model(n, m, 0);
        ConfigDistribution dist = empty_start_distribution(n, m);
        ConfigDistribution reference = dist;
        ConfigDistribution scratch;
        for (int round = 0; round < 6; ++round) {
            model.apply_storage(dist, eta);
            reference = dense_storage(reference, n, m, eta);
            for (std::size_t i = 0; i < dist.size(); ++i)
                REQUIRE(dist[i] == Catch::Approx(reference[i]).margin(1e-14));
            model.apply_measurement(dist, scratch);
            // mirror the measurement on the reference distribution
            ConfigDistribution collapsed(reference.size(), 0.0);
            for (std::size_t i = 0; i < reference.size(); ++i)
                collapsed[model.measured_index(i)] += reference[i];
            reference.swap(collapsed);
        }
    }
}

TEST_CASE("two-party single-memory chain matches a hand recursion", "[analytic]") {
    // States (a, b) for N=2, m=1, w=0. Storage fills each empty slot with
    // probability eta; a measurement clears (1,1). Track the four-state
    // distribution explicitly.
    const double eta = 0.3;
    Params p;
    p.n_parties = 2;
    p.mem_per_party = 1;
    p.max_conn_len = 0;
    p.transmittivity = eta;
    p.total_rounds = 10;
    const AnalyticRates rates = analytic_rates(p);

    double p00 = 1.0, p01 = 0.0, p10 = 0.0, p11 = 0.0;
    double cumulative = 0.0;
    for (int s = 1; s <= p.total_rounds; ++s) {
        const double q00 = p00 * (1 - eta) * (1 - eta);
        const double q01 = p00 * eta * (1 - eta) + p01 * (1 - eta);
        const double q10 = p00 * (1 - eta) * eta + p10 * (1 - eta);
        const double q11 = p00 * eta * eta + p01 * eta + p10 * eta + p11;
        REQUIRE(rates.prob_lambda[s - 1][1] == Catch::Approx(q11).margin(1e-13));
        REQUIRE(rates.expected_l[s - 1] == Catch::Approx(q11).margin(1e-13));
        cumulative += q11;
        REQUIRE(rates.rate[s - 1] == Catch::Approx(cumulative / s).margin(1e-13));
        p00 = q00 + q11; // measurement returns (1,1) to (0,0)
        p01 = q01;
        p10 = q10;
        p11 = 0.0;
    }
    CHECK(rates.prob_lambda[0][1] == Catch::Approx(eta * eta));
}

TEST_CASE("binomial coefficients are exact", "[analytic]") {
    CHECK(binomial_coefficient(0, 0) == 1);
    CHECK(binomial_coefficient(5, 2) == 10);
    CHECK(binomial_coefficient(10, 10) == 1);
    CHECK(binomial_coefficient(10, 11) == 0);
    CHECK(binomial_coefficient(10, -1) == 0);
    CHECK(binomial_coefficient(52, 5) == 2598960);
}

TEST_CASE("ghz-success thinning of the matching distribution", "[analytic]") {
    SECTION("deterministic two successes thin binomially") {
        const std::vector<double> lambda = {0.0, 0.0, 1.0};
        const auto sigma = sigma_distribution(lambda, 0.5);
        CHECK(sigma[0] == Catch::Approx(0.25));
        CHECK(sigma[1] == Catch::Approx(0.5));
        CHECK(sigma[2] == Catch::Approx(0.25));
    }
    SECTION("perfect measurements leave the distribution unchanged") {
        const std::vector<double> lambda = {0.2, 0.5, 0.3};
        const auto sigma = sigma_distribution(lambda, 1.0);
        for (std::size_t l = 0; l < lambda.size(); ++l)
            CHECK(sigma[l] == Catch::Approx(lambda[l]));
    }
    SECTION("failing measurements collapse to zero") {
        const std::vector<double> lambda = {0.2, 0.5, 0.3};
        const auto sigma = sigma_distribution(lambda, 0.0);
        CHECK(sigma[0] == Catch::Approx(1.0));
        CHECK(sigma[1] == 0.0);
        CHECK(sigma[2] == 0.0);
    }
    SECTION("hand-computed mixed case") {
        const std::vector<double> lambda = {0.5, 0.3, 0.2};
        const auto sigma = sigma_distribution(lambda, 0.6);
        CHECK(sigma[0] == Catch::Approx(0.5 + 0.3 * 0.4 + 0.2 * 0.16));
        CHECK(sigma[1] == Catch::Approx(0.3 * 0.6 + 0.2 * 2 * 0.6 * 0.4));
        CHECK(sigma[2] == Catch::Approx(0.2 * 0.36));
        CHECK(expected_value(sigma) == Catch::Approx(0.6 * expected_value(lambda)));
    }
}

TEST_CASE("transition model tabulates matchings per configuration", "[analytic]") {
    TransitionModel model(2, 2, 1);
    CHECK(model.state_count() == 16);

    const auto hist = model.size_histogram();
    long long total = 0;
    for (long long h : hist) total += h;
    CHECK(total == 16);
    CHECK(hist[0] > 0);
    CHECK(hist[2] == 1); // only the fully occupied pattern yields two matchings

    BitConfiguration full(2, 2);
    for (auto& b : full.bits) b = 1;
    const std::size_t idx = config_to_index(full);
    CHECK(model.matching_size(idx) == 2);
    CHECK(model.measured_index(idx) == 0); // both edges consumed

    double mass = 0.0;
    ConfigDistribution dist = empty_start_distribution(2, 2);
    model.apply_storage(dist, 0.42);
    for (double v : dist) mass += v;
    CHECK(mass == Catch::Approx(1.0));
    CHECK(expected_value(model.lambda_distribution(dist)) > 0.0);
}

TEST_CASE("analytic engine guards dimension and cutoff", "[analytic]") {
    CHECK_THROWS_AS(TransitionModel(4, 4, 1), std::invalid_argument);
    CHECK_NOTHROW(TransitionModel(13, 1, 0, true));
    CHECK_THROWS_AS(TransitionModel(13, 1, 0, false), std::invalid_argument);

    Params p;
    p.n_parties = 2;
    p.mem_per_party = 2;
    p.max_conn_len = 1;
    p.cutoff = 5;
    CHECK_THROWS_AS(analytic_rates(p), std::invalid_argument);

    TransitionModel small(2, 1, 0);
    CHECK_THROWS_AS(analytic_rates(small, 0.5, 1.0, 0), std::invalid_argument);
}

TEST_CASE("steady state is detected on a long run", "[analytic]") {
    Params p;
    p.n_parties = 2;
    p.mem_per_party = 1;
    p.max_conn_len = 0;
    p.transmittivity = 0.5;
    p.total_rounds = 80;
    const AnalyticRates rates = analytic_rates(p, false, 1e-12);
    CHECK(rates.converged);
    CHECK(rates.convergence_round > 1);
    CHECK(rates.convergence_round <= 80);
    CHECK(rates.asymptotic_rate ==
          Catch::Approx(rates.expected_l.back() / p.mem_per_party));
    // after convergence the per-round expectation is flat
    const double last = rates.expected_l.back();
    CHECK(rates.expected_l[rates.convergence_round - 1] ==
          Catch::Approx(last).margin(1e-9));

    Params brief = p;
    brief.total_rounds = 2;
    CHECK_FALSE(analytic_rates(brief).converged);
}

TEST_CASE("rate aggregates expected matchings per memory per round", "[analytic]") {
    Params p;
    p.n_parties = 3;
    p.mem_per_party = 2;
    p.max_conn_len = 1;
    p.transmittivity = 0.35;
    p.p_ghz = 0.7;
    p.total_rounds = 12;
    const AnalyticRates rates = analytic_rates(p);
    double cumulative = 0.0;
    for (int s = 1; s <= p.total_rounds; ++s) {
        cumulative += rates.expected_l[s - 1] / p.mem_per_party;
        CHECK(rates.rate[s - 1] == Catch::Approx(cumulative / s));
        CHECK(expected_value(rates.prob_sigma[s - 1]) ==
              Catch::Approx(rates.expected_l[s - 1]));
        CHECK(expected_value(rates.prob_lambda[s - 1]) * p.p_ghz ==
              Catch::Approx(rates.expected_l[s - 1]));
    }
}
