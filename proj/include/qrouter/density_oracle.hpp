#pragma once

// Independent density-matrix oracle for the post-measurement state.
//
// Builds the N depolarized Bell pairs (one per party, qubits ordered
// retained, stored per party; qubit 0 is the most significant index bit),
// applies the GHZ-measurement circuit on the stored qubits (CNOTs from A's
// stored qubit to every B_i's stored qubit, Hadamard on A's stored qubit),
// measures the stored qubits in Z, applies the outcome corrections
// Z^{m_a} (x) X^{m_b1} (x) ... on the retained qubits, and averages over
// outcomes. The result is the N-qubit state shared by the parties.
//
// Everything in the circuit is real (Hadamard, CNOT, Z projectors), so real
// symmetric matrices suffice. The oracle exists to validate the closed-form
// coefficients and to provide QBERs for N other than 3; it is guarded to
// N <= kOracleMaxParties since it works on 4^N-dimensional matrices.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qrouter/noise.hpp"

namespace qrouter {

inline constexpr int kOracleMaxParties = 5;

// Dense real square matrix, row-major.
class DensityMatrix {
public:
    DensityMatrix() = default;
    explicit DensityMatrix(int dim) : dim_(dim), a_(static_cast<std::size_t>(dim) * dim, 0.0) {}

    int dim() const { return dim_; }
    double& at(int i, int j) { return a_[static_cast<std::size_t>(i) * dim_ + j]; }
    double at(int i, int j) const { return a_[static_cast<std::size_t>(i) * dim_ + j]; }

    double trace() const {
        double t = 0.0;
        for (int i = 0; i < dim_; ++i) t += at(i, i);
        return t;
    }

private:
    int dim_ = 0;
    std::vector<double> a_;
};

namespace detail {

// Depolarized Bell pair on (retained, stored):
// rho = p |Phi+><Phi+| + (1-p) I/4 with p = (4F-1)/3.
inline DensityMatrix bell_pair_dep(double fidelity) {
    const double p = (4.0 * fidelity - 1.0) / 3.0;
    DensityMatrix rho(4);
    for (int i = 0; i < 4; ++i) rho.at(i, i) = (1.0 - p) / 4.0;
    // |Phi+> = (|00> + |11>)/sqrt(2): indices 0 and 3
    rho.at(0, 0) += p / 2.0;
    rho.at(3, 3) += p / 2.0;
    rho.at(0, 3) += p / 2.0;
    rho.at(3, 0) += p / 2.0;
    return rho;
}

inline DensityMatrix kron(const DensityMatrix& a, const DensityMatrix& b) {
    DensityMatrix out(a.dim() * b.dim());
    for (int i1 = 0; i1 < a.dim(); ++i1)
        for (int j1 = 0; j1 < a.dim(); ++j1) {
            const double v = a.at(i1, j1);
            if (v == 0.0) continue;
            for (int i2 = 0; i2 < b.dim(); ++i2)
                for (int j2 = 0; j2 < b.dim(); ++j2)
                    out.at(i1 * b.dim() + i2, j1 * b.dim() + j2) = v * b.at(i2, j2);
        }
    return out;
}

// qubit q of an n-qubit register maps to index bit (n-1-q)
inline int qubit_mask(int q, int n_qubits) { return 1 << (n_qubits - 1 - q); }

// Conjugate by CNOT(control, target): permutation flipping the target bit
// wherever the control bit is set; applied to rows then columns.
inline void apply_cnot(DensityMatrix& rho, int control, int target, int n_qubits) {
    const int cm = qubit_mask(control, n_qubits);
    const int tm = qubit_mask(target, n_qubits);
    const int dim = rho.dim();
    for (int i = 0; i < dim; ++i) {
        if (!(i & cm) || (i & tm)) continue; // visit each swapped pair once
        for (int j = 0; j < dim; ++j) std::swap(rho.at(i, j), rho.at(i ^ tm, j));
    }
    for (int j = 0; j < dim; ++j) {
        if (!(j & cm) || (j & tm)) continue;
        for (int i = 0; i < dim; ++i) std::swap(rho.at(i, j), rho.at(i, j ^ tm));
    }
}

// Conjugate by a Hadamard on one qubit.
inline void apply_hadamard(DensityMatrix& rho, int q, int n_qubits) {
    const int qm = qubit_mask(q, n_qubits);
    const int dim = rho.dim();
    const double s = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < dim; ++i) {
        if (i & qm) continue;
        for (int j = 0; j < dim; ++j) {
            const double lo = rho.at(i, j), hi = rho.at(i ^ qm, j);
            rho.at(i, j) = s * (lo + hi);
            rho.at(i ^ qm, j) = s * (lo - hi);
        }
    }
    for (int j = 0; j < dim; ++j) {
        if (j & qm) continue;
        for (int i = 0; i < dim; ++i) {
            const double lo = rho.at(i, j), hi = rho.at(i, j ^ qm);
            rho.at(i, j) = s * (lo + hi);
            rho.at(i, j ^ qm) = s * (lo - hi);
        }
    }
}

} // namespace detail

// Full circuit: returns the corrected post-measurement state of the N
// retained qubits (dimension 2^N), averaged over measurement outcomes.
inline DensityMatrix circuit_oracle_state(const std::vector<double>& fidelities) {
    const int n = static_cast<int>(fidelities.size());
    if (n < 2 || n > kOracleMaxParties)
        throw std::invalid_argument("circuit oracle supports 2 to " +
                                    std::to_string(kOracleMaxParties) + " parties");
    const int nq = 2 * n; // per party: retained qubit 2p, stored qubit 2p+1

    DensityMatrix rho = detail::bell_pair_dep(fidelities[0]);
    for (int p = 1; p < n; ++p) rho = detail::kron(rho, detail::bell_pair_dep(fidelities[p]));

    for (int p = 1; p < n; ++p) detail::apply_cnot(rho, 1, 2 * p + 1, nq);
    detail::apply_hadamard(rho, 1, nq);

    // Retained-index bit of party p sits at qubit 2p; stored at 2p+1.
    const int rdim = 1 << n;
    auto full_index = [&](int retained, int outcome) {
        int idx = 0;
        for (int p = 0; p < n; ++p) {
            const int rbit = (retained >> (n - 1 - p)) & 1;
            const int obit = (outcome >> (n - 1 - p)) & 1;
            idx |= rbit << (nq - 1 - 2 * p);
            idx |= obit << (nq - 1 - (2 * p + 1));
        }
        return idx;
    };

    DensityMatrix out(rdim);
    for (int o = 0; o < rdim; ++o) {
        const bool za = (o >> (n - 1)) & 1;          // A's outcome -> Z correction
        const int xmask = o & ((1 << (n - 1)) - 1);  // B outcomes -> X corrections
        for (int r = 0; r < rdim; ++r) {
            const double sr = (za && ((r >> (n - 1)) & 1)) ? -1.0 : 1.0;
            for (int c = 0; c < rdim; ++c) {
                const double sc = (za && ((c >> (n - 1)) & 1)) ? -1.0 : 1.0;
                out.at(r, c) += sr * sc * rho.at(full_index(r ^ xmask, o),
                                                 full_index(c ^ xmask, o));
            }
        }
    }
    return out;
}

// GHZ-basis diagonal weight <GHZ_k^sign| rho |GHZ_k^sign> with
// |GHZ_k^+-> = (|k> +- |~k>)/sqrt(2), k carrying the A bit as MSB.
inline double ghz_weight(const DensityMatrix& rho, int k, int sign) {
    const int kb = rho.dim() - 1 - k;
    return 0.5 * (rho.at(k, k) + rho.at(kb, kb)) + 0.5 * sign * (rho.at(k, kb) + rho.at(kb, k));
}

// Largest off-GHZ-diagonal weight; the oracle's output should be GHZ-diagonal.
inline double max_off_ghz_diagonal(const DensityMatrix& rho) {
    double worst = 0.0;
    const int dim = rho.dim();
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            if (i == j || i == dim - 1 - j) continue;
            worst = std::max(worst, std::abs(rho.at(i, j)));
        }
    return worst;
}

// Tripartite oracle, reported in the five-coefficient form. The degenerate
// +/- pairs for k >= 1 are averaged (they agree to numerical precision).
inline GhzDiagonal3 circuit_oracle_3(double fa, double fb1, double fb2) {
    check_fidelity_range(fa, "A");
    check_fidelity_range(fb1, "B1");
    check_fidelity_range(fb2, "B2");
    const DensityMatrix rho = circuit_oracle_state({fa, fb1, fb2});
    GhzDiagonal3 lam;
    lam.lambda0_plus = ghz_weight(rho, 0, +1);
    lam.lambda0_minus = ghz_weight(rho, 0, -1);
    lam.lambda1 = 0.5 * (ghz_weight(rho, 1, +1) + ghz_weight(rho, 1, -1));
    lam.lambda2 = 0.5 * (ghz_weight(rho, 2, +1) + ghz_weight(rho, 2, -1));
    lam.lambda3 = 0.5 * (ghz_weight(rho, 3, +1) + ghz_weight(rho, 3, -1));
    return lam;
}

// Reconstruct the 8-dimensional state from its GHZ-diagonal weights
// (degenerate weights split evenly across the +/- pair).
inline DensityMatrix density_from_ghz_diagonal(const GhzDiagonal3& lam) {
    DensityMatrix rho(8);
    auto add = [&](int k, int sign, double weight) {
        const int kb = 7 - k;
        rho.at(k, k) += weight / 2.0;
        rho.at(kb, kb) += weight / 2.0;
        rho.at(k, kb) += sign * weight / 2.0;
        rho.at(kb, k) += sign * weight / 2.0;
    };
    add(0, +1, lam.lambda0_plus);
    add(0, -1, lam.lambda0_minus);
    for (int k = 1; k <= 3; ++k) {
        const double w = k == 1 ? lam.lambda1 : k == 2 ? lam.lambda2 : lam.lambda3;
        add(k, +1, w);
        add(k, -1, w);
    }
    return rho;
}

// QBERs straight from a retained-qubit density matrix:
// q_x = (1 - <X^(x)N>)/2, q_ab_i = (1 - <Z_A Z_Bi>)/2.
inline QberSet qbers_from_density(const DensityMatrix& rho) {
    int n = 0;
    while ((1 << n) < rho.dim()) ++n;
    QberSet q;
    double x_corr = 0.0;
    for (int v = 0; v < rho.dim(); ++v) x_corr += rho.at(v, rho.dim() - 1 - v);
    q.q_x = (1.0 - x_corr) / 2.0;
    for (int p = 1; p < n; ++p) {
        double zz = 0.0;
        for (int v = 0; v < rho.dim(); ++v) {
            const int ba = (v >> (n - 1)) & 1;
            const int bp = (v >> (n - 1 - p)) & 1;
            zz += (ba == bp ? 1.0 : -1.0) * rho.at(v, v);
        }
        q.q_ab.push_back((1.0 - zz) / 2.0);
    }
    return q;
}

// QBERs as multilinear polynomials in the party fidelities, fitted once from
// the circuit oracle at the 2^N corner combinations of {1/4, 1}. Each QBER is
// multilinear in (F_A, ..., F_BN-1) because the oracle output is linear in
// each party's input state, so the fit is exact.
class QberModel {
public:
    explicit QberModel(int n_parties) : n_(n_parties) {
        if (n_ < 2 || n_ > kOracleMaxParties)
            throw std::invalid_argument("QberModel supports 2 to " +
                                        std::to_string(kOracleMaxParties) + " parties");
        const int combos = 1 << n_;
        const double lo = 0.25, hi = 1.0;
        const int targets = n_; // q_x plus n-1 q_ab entries
        coef_.assign(targets, std::vector<double>(combos, 0.0));
        for (int mask = 0; mask < combos; ++mask) {
            std::vector<double> f(n_);
            for (int p = 0; p < n_; ++p) f[p] = (mask >> p) & 1 ? hi : lo;
            const QberSet q = qbers_from_density(circuit_oracle_state(f));
            coef_[0][mask] = q.q_x;
            for (int i = 1; i < targets; ++i) coef_[i][mask] = q.q_ab[i - 1];
        }
        // Convert corner values to multilinear coefficients, one axis at a
        // time: value = c0 + c1 * F along that axis.
        for (auto& c : coef_)
            for (int p = 0; p < n_; ++p) {
                const int bit = 1 << p;
                for (int mask = 0; mask < combos; ++mask) {
                    if (mask & bit) continue;
                    const double v0 = c[mask], v1 = c[mask | bit];
                    c[mask] = (hi * v0 - lo * v1) / (hi - lo);
                    c[mask | bit] = (v1 - v0) / (hi - lo);
                }
            }
    }

    int n_parties() const { return n_; }

    QberSet evaluate(const std::vector<double>& fidelities) const {
        if (static_cast<int>(fidelities.size()) != n_)
            throw std::invalid_argument("QberModel: fidelity count mismatch");
        QberSet q;
        q.q_x = eval_one(coef_[0], fidelities);
        for (int i = 1; i < n_; ++i) q.q_ab.push_back(eval_one(coef_[i], fidelities));
        return q;
    }

private:
    double eval_one(const std::vector<double>& c, const std::vector<double>& f) const {
        double sum = 0.0;
        const int combos = 1 << n_;
        for (int mask = 0; mask < combos; ++mask) {
            if (c[mask] == 0.0) continue;
            double term = c[mask];
            for (int p = 0; p < n_; ++p)
                if ((mask >> p) & 1) term *= f[p];
            sum += term;
        }
        return sum;
    }

    int n_;
    std::vector<std::vector<double>> coef_; // [target][subset mask]
};

} // namespace qrouter
