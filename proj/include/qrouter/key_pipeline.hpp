#pragma once

// Secret-key pipeline: turns ensemble age statistics into total QBERs,
// secret fractions, and secret key rates as functions of the running time.
//
// Two estimators of the total QBER up to round s_c are computed:
//   joint     empirical average of Q over the recorded joint age tuples
//             (exact for the simulated protocol),
//   marginal  the per-round product-of-marginals average: each party's age
//             distribution enters independently. Because every QBER is
//             multilinear in the party fidelities, the expectation under the
//             product distribution equals Q evaluated at the per-party mean
//             fidelities, which is how it is computed here (no truncated
//             age sums involved).
// Both weight rounds by the number of successful measurements. When no
// measurement has succeeded up to s_c the QBERs are NaN (undefined), the
// secret fraction is NaN, and the key rate is 0 (no states, no key).

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qrouter/density_oracle.hpp"
#include "qrouter/noise.hpp"
#include "qrouter/simulator.hpp"

namespace qrouter {

enum class QberMode { joint, marginal };

// Evaluates QBERs from age tuples or fidelity vectors for any supported N,
// caching per-age fidelities. N = 3 uses the closed-form coefficients; other
// N use the multilinear model fitted from the circuit oracle.
class QberEvaluator {
public:
    QberEvaluator(int n_parties, long long tau) : n_(n_parties), tau_(tau) {
        if (n_ != 3) model_.emplace(n_);
    }

    int n_parties() const { return n_; }

    double fidelity(std::uint32_t age) const {
        if (age >= cache_.size()) {
            const std::size_t old = cache_.size();
            cache_.resize(age + 1);
            for (std::size_t d = old; d < cache_.size(); ++d)
                cache_[d] = fidelity_after(static_cast<long long>(d), tau_);
        }
        return cache_[age];
    }

    QberSet from_fidelities(const std::vector<double>& f) const {
        if (static_cast<int>(f.size()) != n_)
            throw std::invalid_argument("QberEvaluator: fidelity count mismatch");
        if (n_ == 3) return qbers_3(ghz_diag_lambdas(f[0], f[1], f[2]));
        return model_->evaluate(f);
    }

    QberSet from_ages(const AgeTuple& ages) const {
        std::vector<double> f(n_);
        for (int q = 0; q < n_; ++q) f[q] = fidelity(ages[q]);
        return from_fidelities(f);
    }

private:
    int n_;
    long long tau_;
    std::optional<QberModel> model_;
    mutable std::vector<double> cache_;
};

struct KeyRatePoint {
    int round = 0; // s_c
    double router_rate = 0.0;
    QberSet qber_joint, qber_marginal;       // Q^tot up to s_c (NaN if undefined)
    double secret_fraction_joint = 0.0;      // NaN if undefined
    double secret_fraction_marginal = 0.0;
    double key_rate_joint = 0.0;
    double key_rate_marginal = 0.0;
};

namespace detail {

inline QberSet nan_qbers(int n_parties) {
    QberSet q;
    q.q_x = std::numeric_limits<double>::quiet_NaN();
    q.q_ab.assign(n_parties - 1, std::numeric_limits<double>::quiet_NaN());
    return q;
}

struct QberAccumulator {
    double q_x = 0.0;
    std::vector<double> q_ab;

    explicit QberAccumulator(int n_parties) : q_ab(n_parties - 1, 0.0) {}

    void add(const QberSet& q, double weight) {
        q_x += weight * q.q_x;
        for (std::size_t i = 0; i < q_ab.size(); ++i) q_ab[i] += weight * q.q_ab[i];
    }

    QberSet divided_by(double denom) const {
        QberSet out;
        out.q_x = q_x / denom;
        out.q_ab.reserve(q_ab.size());
        for (double v : q_ab) out.q_ab.push_back(v / denom);
        return out;
    }
};

} // namespace detail

// Full per-round curve of QBERs, secret fractions, router rate, and key
// rates. Requires stats collected with age statistics enabled.
inline std::vector<KeyRatePoint> key_rate_curve(const EnsembleStats& stats, long long tau) {
    if (!stats.has_age_stats)
        throw std::invalid_argument("key_rate_curve needs age statistics in the ensemble");
    const int n = stats.n_parties;
    QberEvaluator eval(n, tau);

    std::vector<KeyRatePoint> curve;
    curve.reserve(stats.rounds);

    detail::QberAccumulator joint_num(n), marginal_num(n);
    std::uint64_t successes = 0;  // cumulative, doubles as both denominators
    std::uint64_t cumulative_l = 0;

    for (int s = 1; s <= stats.rounds; ++s) {
        const int idx = s - 1;
        const std::uint64_t round_successes = stats.success_sum[idx];
        cumulative_l += round_successes;

        for (const auto& [tuple, count] : stats.joint_age[idx])
            joint_num.add(eval.from_ages(tuple), static_cast<double>(count));

        if (round_successes > 0) {
            std::vector<double> mean_f(n, 0.0);
            for (int q = 0; q < n; ++q) {
                double acc = 0.0;
                for (std::size_t age = 0; age < stats.age_marginal[idx][q].size(); ++age) {
                    const std::uint64_t c = stats.age_marginal[idx][q][age];
                    if (c) acc += static_cast<double>(c) *
                                  eval.fidelity(static_cast<std::uint32_t>(age));
                }
                mean_f[q] = acc / static_cast<double>(round_successes);
            }
            marginal_num.add(eval.from_fidelities(mean_f),
                             static_cast<double>(round_successes));
        }
        successes += round_successes;

        KeyRatePoint pt;
        pt.round = s;
        pt.router_rate = static_cast<double>(cumulative_l) /
                         (static_cast<double>(stats.samples) * stats.mem_per_party * s);
        if (successes == 0) {
            pt.qber_joint = detail::nan_qbers(n);
            pt.qber_marginal = detail::nan_qbers(n);
            pt.secret_fraction_joint = std::numeric_limits<double>::quiet_NaN();
            pt.secret_fraction_marginal = std::numeric_limits<double>::quiet_NaN();
            pt.key_rate_joint = 0.0;
            pt.key_rate_marginal = 0.0;
        } else {
            const double denom = static_cast<double>(successes);
            pt.qber_joint = joint_num.divided_by(denom);
            pt.qber_marginal = marginal_num.divided_by(denom);
            pt.secret_fraction_joint = secret_fraction(pt.qber_joint);
            pt.secret_fraction_marginal = secret_fraction(pt.qber_marginal);
            pt.key_rate_joint = secret_key_rate(pt.secret_fraction_joint, pt.router_rate);
            pt.key_rate_marginal = secret_key_rate(pt.secret_fraction_marginal, pt.router_rate);
        }
        curve.push_back(std::move(pt));
    }
    return curve;
}

// Total QBER up to each round in one mode; the curve carries both modes.
inline std::vector<QberSet> total_qber(const EnsembleStats& stats, long long tau,
                                       QberMode mode) {
    std::vector<QberSet> out;
    for (const auto& pt : key_rate_curve(stats, tau))
        out.push_back(mode == QberMode::joint ? pt.qber_joint : pt.qber_marginal);
    return out;
}

// Round index (1-based) of the maximum key rate in the given mode.
inline int key_rate_peak_round(const std::vector<KeyRatePoint>& curve, QberMode mode) {
    int best_round = 1;
    double best = -1.0;
    for (const auto& pt : curve) {
        const double k = mode == QberMode::joint ? pt.key_rate_joint : pt.key_rate_marginal;
        if (k > best) {
            best = k;
            best_round = pt.round;
        }
    }
    return best_round;
}

} // namespace qrouter
