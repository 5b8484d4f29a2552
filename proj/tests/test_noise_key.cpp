#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qrouter/density_oracle.hpp"
#include "qrouter/key_pipeline.hpp"
#include "qrouter/noise.hpp"
#include "qrouter/rng.hpp"

using namespace qrouter;

TEST_CASE("white-noise survival and fidelity decay", "[noise_key]") {
    CHECK(white_noise_prob(0, 100) == 1.0);
    CHECK(white_noise_prob(100, 100) == Catch::Approx(std::exp(-1.0)));
    CHECK(fidelity_after(0, 100) == 1.0);
    CHECK(fidelity_after(100, 100) == Catch::Approx(0.25 + 0.75 * std::exp(-1.0)));
    CHECK(fidelity_after(1000000, 10) == Catch::Approx(0.25).margin(1e-12));
    CHECK_THROWS_AS(white_noise_prob(-1, 100), std::domain_error);
    CHECK_THROWS_AS(white_noise_prob(5, 0), std::domain_error);

    const Fidelities f = fidelities_from_ages({0, 3, 7}, 10);
    REQUIRE(f.f.size() == 3);
    CHECK(f.f[0] == 1.0);
    CHECK(f.f[1] == Catch::Approx(fidelity_after(3, 10)));
    CHECK(f.f[2] == Catch::Approx(fidelity_after(7, 10)));
}

TEST_CASE("lambda coefficients at the exact corners", "[noise_key]") {
    SECTION("perfect fidelities give a pure GHZ state") {
        const GhzDiagonal3 lam = ghz_diag_lambdas(1.0, 1.0, 1.0);
        CHECK(lam.lambda0_plus == Catch::Approx(1.0));
        CHECK(lam.lambda0_minus == Catch::Approx(0.0).margin(1e-15));
        CHECK(lam.lambda1 == Catch::Approx(0.0).margin(1e-15));
        CHECK(lam.lambda2 == Catch::Approx(0.0).margin(1e-15));
        CHECK(lam.lambda3 == Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("fully depolarized inputs give the maximally mixed state") {
        const GhzDiagonal3 lam = ghz_diag_lambdas(0.25, 0.25, 0.25);
        CHECK(lam.lambda0_plus == Catch::Approx(0.125));
        CHECK(lam.lambda0_minus == Catch::Approx(0.125));
        CHECK(lam.lambda1 == Catch::Approx(0.125));
        CHECK(lam.lambda2 == Catch::Approx(0.125));
        CHECK(lam.lambda3 == Catch::Approx(0.125));
    }
    SECTION("one degraded pair: GHZ fidelity equals that pair's fidelity") {
        for (double f : {0.3, 0.6, 0.85}) {
            const GhzDiagonal3 lam = ghz_diag_lambdas(1.0, f, 1.0);
            CHECK(lam.lambda0_plus == Catch::Approx(f));
            CHECK(lam.lambda0_minus == Catch::Approx((1.0 - f) / 3.0));
            CHECK(lam.lambda2 == Catch::Approx((1.0 - f) / 3.0));
            CHECK(lam.lambda1 == Catch::Approx(0.0).margin(1e-15));
            CHECK(lam.lambda3 == Catch::Approx(0.0).margin(1e-15));
            const QberSet q = qbers_3(lam);
            CHECK(q.q_ab[0] == Catch::Approx(2.0 * (1.0 - f) / 3.0));
            CHECK(q.q_ab[1] == Catch::Approx(0.0).margin(1e-15));
        }
    }
    CHECK_THROWS_AS(ghz_diag_lambdas(0.2, 1.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(ghz_diag_lambdas(1.0, 1.2, 1.0), std::domain_error);
}

TEST_CASE("closed form matches the circuit oracle", "[noise_key]") {
    Xoshiro256 rng(0xfeed);
    double worst = 0.0;
    for (int t = 0; t < 300; ++t) {
        const double fa = 0.25 + 0.75 * rng.next_double();
        const double fb1 = 0.25 + 0.75 * rng.next_double();
        const double fb2 = 0.25 + 0.75 * rng.next_double();
        const GhzDiagonal3 closed = ghz_diag_lambdas(fa, fb1, fb2);
        const GhzDiagonal3 oracle = circuit_oracle_3(fa, fb1, fb2);
        worst = std::max({worst, std::abs(closed.lambda0_plus - oracle.lambda0_plus),
                          std::abs(closed.lambda0_minus - oracle.lambda0_minus),
                          std::abs(closed.lambda1 - oracle.lambda1),
                          std::abs(closed.lambda2 - oracle.lambda2),
                          std::abs(closed.lambda3 - oracle.lambda3)});
        CHECK(closed.trace() == Catch::Approx(1.0).margin(1e-12));

        const DensityMatrix rho = circuit_oracle_state({fa, fb1, fb2});
        CHECK(rho.trace() == Catch::Approx(1.0).margin(1e-12));
        CHECK(max_off_ghz_diagonal(rho) < 1e-12);

        // QBERs from the density matrix agree with the lambda formulas
        const QberSet via_lambda = qbers_3(closed);
        const QberSet via_density = qbers_from_density(rho);
        CHECK(via_lambda.q_x == Catch::Approx(via_density.q_x).margin(1e-12));
        CHECK(via_lambda.q_ab[0] == Catch::Approx(via_density.q_ab[0]).margin(1e-12));
        CHECK(via_lambda.q_ab[1] == Catch::Approx(via_density.q_ab[1]).margin(1e-12));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("lambda reconstruction round-trips through a density matrix", "[noise_key]") {
    const GhzDiagonal3 lam = ghz_diag_lambdas(0.9, 0.8, 0.7);
    const DensityMatrix rho = density_from_ghz_diagonal(lam);
    CHECK(rho.trace() == Catch::Approx(1.0));
    CHECK(ghz_weight(rho, 0, +1) == Catch::Approx(lam.lambda0_plus));
    CHECK(ghz_weight(rho, 0, -1) == Catch::Approx(lam.lambda0_minus));
    CHECK(ghz_weight(rho, 2, +1) == Catch::Approx(lam.lambda2));
    const QberSet direct = qbers_3(lam);
    const QberSet via = qbers_from_density(rho);
    CHECK(direct.q_x == Catch::Approx(via.q_x));
    CHECK(direct.q_ab[0] == Catch::Approx(via.q_ab[0]));
    CHECK(direct.q_ab[1] == Catch::Approx(via.q_ab[1]));
}

TEST_CASE("binary entropy and the secret fraction threshold", "[noise_key]") {
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(1.0) == 0.0);
    CHECK(binary_entropy(0.5) == 1.0);
    CHECK(binary_entropy(0.2) == Catch::Approx(binary_entropy(0.8)));
    CHECK_THROWS_AS(binary_entropy(-0.01), std::domain_error);
    CHECK_THROWS_AS(binary_entropy(1.01), std::domain_error);

    QberSet q;
    q.q_x = 0.0;
    q.q_ab = {0.0, 0.0};
    CHECK(secret_fraction(q) == 1.0);

    q.q_x = 0.11;
    q.q_ab = {0.11, 0.11};
    const double near_threshold = secret_fraction(q);
    CHECK(near_threshold >= 0.0);
    CHECK(near_threshold < 0.01);

    for (double qv : {0.111, 0.12, 0.2, 0.35, 0.5}) {
        q.q_x = qv;
        q.q_ab = {qv, qv};
        CHECK(secret_fraction(q) == 0.0);
    }

    // the worst pairwise QBER is the one that counts
    q.q_x = 0.01;
    q.q_ab = {0.0, 0.5};
    CHECK(secret_fraction(q) == 0.0);
    CHECK(secret_key_rate(0.25, 0.1) == Catch::Approx(0.025));
}

TEST_CASE("multilinear qber model reproduces the oracle for N=3 and N=4", "[noise_key]") {
    Xoshiro256 rng(0x40404);
    const QberModel m3(3);
    for (int t = 0; t < 50; ++t) {
        const std::vector<double> f = {0.25 + 0.75 * rng.next_double(),
                                       0.25 + 0.75 * rng.next_double(),
                                       0.25 + 0.75 * rng.next_double()};
        const QberSet closed = qbers_3(ghz_diag_lambdas(f[0], f[1], f[2]));
        const QberSet fit = m3.evaluate(f);
        CHECK(fit.q_x == Catch::Approx(closed.q_x).margin(1e-11));
        CHECK(fit.q_ab[0] == Catch::Approx(closed.q_ab[0]).margin(1e-11));
        CHECK(fit.q_ab[1] == Catch::Approx(closed.q_ab[1]).margin(1e-11));
    }

    const QberModel m4(4);
    for (int t = 0; t < 10; ++t) {
        const std::vector<double> f = {0.25 + 0.75 * rng.next_double(),
                                       0.25 + 0.75 * rng.next_double(),
                                       0.25 + 0.75 * rng.next_double(),
                                       0.25 + 0.75 * rng.next_double()};
        const QberSet direct = qbers_from_density(circuit_oracle_state(f));
        const QberSet fit = m4.evaluate(f);
        REQUIRE(fit.q_ab.size() == 3);
        CHECK(fit.q_x == Catch::Approx(direct.q_x).margin(1e-11));
        for (int i = 0; i < 3; ++i)
            CHECK(fit.q_ab[i] == Catch::Approx(direct.q_ab[i]).margin(1e-11));
    }

    // perfect fidelities: no errors for any party count
    for (int n = 2; n <= 5; ++n) {
        const QberSet q = qbers_from_density(circuit_oracle_state(std::vector<double>(n, 1.0)));
        CHECK(q.q_x == Catch::Approx(0.0).margin(1e-12));
        for (double v : q.q_ab) CHECK(v == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("qber evaluator caches fidelities and dispatches by N", "[noise_key]") {
    const QberEvaluator e3(3, 50);
    CHECK(e3.fidelity(0) == 1.0);
    CHECK(e3.fidelity(25) == Catch::Approx(fidelity_after(25, 50)));
    AgeTuple t{};
    t[0] = 0;
    t[1] = 10;
    t[2] = 0;
    const QberSet q = e3.from_ages(t);
    const QberSet ref =
        qbers_3(ghz_diag_lambdas(1.0, fidelity_after(10, 50), 1.0));
    CHECK(q.q_x == Catch::Approx(ref.q_x));
    CHECK(q.q_ab[0] == Catch::Approx(ref.q_ab[0]));
    CHECK_THROWS_AS(e3.from_fidelities({1.0, 1.0}), std::invalid_argument);

    const QberEvaluator e4(4, 50);
    const QberSet q4 = e4.from_fidelities({1.0, 1.0, 1.0, 1.0});
    CHECK(q4.q_x == Catch::Approx(0.0).margin(1e-12));
}

namespace {

// Hand-built ensemble: two rounds, four successes in round 2 with chosen age
// tuples, so the key pipeline's estimators can be checked against literal
// definitions.
EnsembleStats handmade_stats(const Params& p,
                             const std::vector<std::pair<AgeTuple, int>>& tuples) {
    EnsembleStats stats;
    stats.init(p, true);
    stats.samples = p.samples;
    for (const auto& [tuple, count] : tuples) {
        stats.success_sum[1] += count;
        stats.joint_age[1][tuple] += count;
        for (int q = 0; q < p.n_parties; ++q)
            stats.age_marginal[1][q][tuple[q]] += count;
    }
    stats.success_sq_sum[1] = stats.success_sum[1] * stats.success_sum[1];
    stats.total_sum = stats.success_sum[1];
    return stats;
}

AgeTuple tuple3(std::uint32_t a, std::uint32_t b1, std::uint32_t b2) {
    AgeTuple t{};
    t[0] = a;
    t[1] = b1;
    t[2] = b2;
    return t;
}

} // namespace

TEST_CASE("joint and marginal estimators on handcrafted ensembles", "[noise_key]") {
    Params p;
    p.n_parties = 3;
    p.mem_per_party = 2;
    p.total_rounds = 2;
    p.samples = 4;
    p.decoherence_rounds = 5; // strong decay amplifies any discrepancy
    const long long tau = p.decoherence_rounds;
    const QberEvaluator eval(3, tau);

    SECTION("product-form ages: joint equals marginal exactly") {
        const auto stats = handmade_stats(
            p, {{tuple3(0, 0, 0), 1}, {tuple3(0, 1, 0), 1}, {tuple3(1, 0, 0), 1},
                {tuple3(1, 1, 0), 1}});
        const auto curve = key_rate_curve(stats, tau);
        REQUIRE(curve.size() == 2);
        const KeyRatePoint& pt = curve[1];

        // literal product-measure average over all age combinations
        double qx = 0.0, qab1 = 0.0, qab2 = 0.0;
        for (int a = 0; a <= 1; ++a)
            for (int b = 0; b <= 1; ++b) {
                const QberSet q = eval.from_ages(tuple3(a, b, 0));
                qx += 0.25 * q.q_x;
                qab1 += 0.25 * q.q_ab[0];
                qab2 += 0.25 * q.q_ab[1];
            }
        CHECK(pt.qber_marginal.q_x == Catch::Approx(qx).margin(1e-12));
        CHECK(pt.qber_marginal.q_ab[0] == Catch::Approx(qab1).margin(1e-12));
        CHECK(pt.qber_marginal.q_ab[1] == Catch::Approx(qab2).margin(1e-12));
        CHECK(pt.qber_joint.q_x == Catch::Approx(pt.qber_marginal.q_x).margin(1e-12));
        CHECK(pt.qber_joint.q_ab[0] ==
              Catch::Approx(pt.qber_marginal.q_ab[0]).margin(1e-12));
    }

    SECTION("correlated ages: joint and marginal split apart") {
        const auto stats =
            handmade_stats(p, {{tuple3(0, 0, 0), 2}, {tuple3(1, 1, 1), 2}});
        const auto curve = key_rate_curve(stats, tau);
        const KeyRatePoint& pt = curve[1];

        const QberSet fresh = eval.from_ages(tuple3(0, 0, 0));
        const QberSet aged = eval.from_ages(tuple3(1, 1, 1));
        CHECK(pt.qber_joint.q_x ==
              Catch::Approx(0.5 * (fresh.q_x + aged.q_x)).margin(1e-12));

        double qx_product = 0.0;
        for (int a = 0; a <= 1; ++a)
            for (int b = 0; b <= 1; ++b)
                for (int c = 0; c <= 1; ++c)
                    qx_product += 0.125 * eval.from_ages(tuple3(a, b, c)).q_x;
        CHECK(pt.qber_marginal.q_x == Catch::Approx(qx_product).margin(1e-12));
        CHECK(std::abs(pt.qber_joint.q_x - pt.qber_marginal.q_x) > 1e-4);
    }

    SECTION("rounds without successes yield NaN QBERs and zero key") {
        EnsembleStats empty;
        empty.init(p, true);
        empty.samples = p.samples;
        const auto curve = key_rate_curve(empty, tau);
        CHECK(std::isnan(curve[0].qber_joint.q_x));
        CHECK(std::isnan(curve[0].secret_fraction_marginal));
        CHECK(curve[0].key_rate_joint == 0.0);
        CHECK(curve[0].router_rate == 0.0);

        EnsembleStats no_ages;
        no_ages.init(p, false);
        CHECK_THROWS_AS(key_rate_curve(no_ages, tau), std::invalid_argument);
    }
}

TEST_CASE("key rate curve wires rates and fractions together", "[noise_key]") {
    Params p;
    p.n_parties = 3;
    p.mem_per_party = 2;
    p.total_rounds = 2;
    p.samples = 4;
    p.decoherence_rounds = 50;
    const auto stats = handmade_stats(p, {{tuple3(0, 0, 0), 4}});
    const auto curve = key_rate_curve(stats, p.decoherence_rounds);
    const KeyRatePoint& pt = curve[1];
    // 4 successes / (4 samples * 2 memories * 2 rounds)
    CHECK(pt.router_rate == Catch::Approx(0.25));
    // all-fresh tuples: no errors, full secret fraction
    CHECK(pt.qber_joint.q_x == Catch::Approx(0.0).margin(1e-12));
    CHECK(pt.secret_fraction_joint == Catch::Approx(1.0).margin(1e-9));
    CHECK(pt.key_rate_joint == Catch::Approx(0.25).margin(1e-9));
    CHECK(key_rate_peak_round(curve, QberMode::joint) == 2);
    CHECK(key_rate_peak_round(curve, QberMode::marginal) == 2);

    const auto totals = total_qber(stats, p.decoherence_rounds, QberMode::joint);
    REQUIRE(totals.size() == 2);
    CHECK(std::isnan(totals[0].q_x));
    CHECK(totals[1].q_x == Catch::Approx(0.0).margin(1e-12));
}
