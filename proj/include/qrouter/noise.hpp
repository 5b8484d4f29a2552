#pragma once

// Memory decoherence model and the tripartite conference-key formulas:
// white-noise survival probability, Bell-pair fidelity after storage, the
// closed-form GHZ-diagonal coefficients of the post-measurement state for
// N = 3, QBERs, binary entropy, and the asymptotic secret fraction.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace qrouter {

// p(delta) = exp(-delta / tau): probability that a qubit stored for delta
// rounds is unaffected by the depolarizing memory noise.
inline double white_noise_prob(long long delta, long long tau) {
    if (delta < 0) throw std::domain_error("storage age must be non-negative");
    if (tau < 1) throw std::domain_error("decoherence parameter must be >= 1");
    return std::exp(-static_cast<double>(delta) / static_cast<double>(tau));
}

// Fidelity of a depolarized Bell pair after delta storage rounds:
// F = 1/4 + (3/4) p(delta). Fresh qubits (delta = 0) have fidelity 1.
inline double fidelity_after(long long delta, long long tau) {
    return 0.25 + 0.75 * white_noise_prob(delta, tau);
}

struct Fidelities {
    std::vector<double> f; // index 0 = A, then B1, B2, ...
};

inline Fidelities fidelities_from_ages(const std::vector<long long>& ages, long long tau) {
    Fidelities out;
    out.f.reserve(ages.size());
    for (long long d : ages) out.f.push_back(fidelity_after(d, tau));
    return out;
}

// Diagonal weights of the tripartite post-measurement state in the GHZ
// basis. lambda0 splits into +/- components; the other weights are doubly
// degenerate (the |GHZ_j^+> and |GHZ_j^-> weights coincide), so the trace
// condition reads lambda0p + lambda0m + 2(lambda1 + lambda2 + lambda3) = 1.
// Index convention: lambda1 <-> B2 flipped, lambda2 <-> B1 flipped,
// lambda3 <-> both flipped.
struct GhzDiagonal3 {
    double lambda0_plus = 0.0;
    double lambda0_minus = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;

    double trace() const {
        return lambda0_plus + lambda0_minus + 2.0 * (lambda1 + lambda2 + lambda3);
    }
};

inline void check_fidelity_range(double f, const char* name) {
    if (!(f >= 0.25 - 1e-12 && f <= 1.0 + 1e-12))
        throw std::domain_error(std::string(name) + " fidelity " + std::to_string(f) +
                                " outside [1/4, 1]");
}

// Closed-form GHZ-diagonal coefficients as polynomials in the three Bell
// fidelities. lambda0_plus is the GHZ fidelity of the distributed state.
inline GhzDiagonal3 ghz_diag_lambdas(double fa, double fb1, double fb2) {
    check_fidelity_range(fa, "A");
    check_fidelity_range(fb1, "B1");
    check_fidelity_range(fb2, "B2");
    GhzDiagonal3 lam;
    lam.lambda0_plus = (4.0 - fa - fb1 - fb2 - 2.0 * fa * fb1 - 2.0 * fb1 * fb2 -
                        2.0 * fa * fb2 + 32.0 * fa * fb1 * fb2) /
                       27.0;
    lam.lambda0_minus = (5.0 - 5.0 * fa - 5.0 * fb1 - 5.0 * fb2 + 14.0 * fa * fb1 +
                         14.0 * fb1 * fb2 + 14.0 * fa * fb2 - 32.0 * fa * fb1 * fb2) /
                        27.0;
    lam.lambda1 = (1.0 + fb2 + 2.0 * fa * fb1 - 2.0 * fa * fb2 - 2.0 * fb1 * fb2) / 9.0;
    lam.lambda2 = (1.0 + fb1 - 2.0 * fa * fb1 + 2.0 * fa * fb2 - 2.0 * fb1 * fb2) / 9.0;
    lam.lambda3 = (1.0 + fa - 2.0 * fa * fb1 - 2.0 * fa * fb2 + 2.0 * fb1 * fb2) / 9.0;
    return lam;
}

// QBERs of the distributed state: q_x in the X basis across all parties,
// q_ab[i] in the Z basis between A and B_{i+1}.
struct QberSet {
    double q_x = 0.0;
    std::vector<double> q_ab;
};

inline QberSet qbers_3(const GhzDiagonal3& lam) {
    QberSet q;
    q.q_x = (1.0 - (lam.lambda0_plus - lam.lambda0_minus)) / 2.0;
    q.q_ab = {2.0 * (lam.lambda2 + lam.lambda3), 2.0 * (lam.lambda1 + lam.lambda3)};
    return q;
}

// Binary entropy with the continuity convention h(0) = h(1) = 0.
inline double binary_entropy(double q) {
    if (q < 0.0 || q > 1.0) throw std::domain_error("binary_entropy argument outside [0,1]");
    if (q == 0.0 || q == 1.0) return 0.0;
    return -q * std::log2(q) - (1.0 - q) * std::log2(1.0 - q);
}

// Asymptotic secret fraction of the N-party BB84-type protocol:
// r = max[0, 1 - h(q_x) - max_i h(q_ab_i)].
inline double secret_fraction(const QberSet& q) {
    double worst = 0.0;
    for (double qi : q.q_ab) worst = std::max(worst, binary_entropy(qi));
    return std::max(0.0, 1.0 - binary_entropy(q.q_x) - worst);
}

// K = r_inf * R: secret bits per memory per round.
inline double secret_key_rate(double r_inf, double router_rate) {
    return r_inf * router_rate;
}

} // namespace qrouter
