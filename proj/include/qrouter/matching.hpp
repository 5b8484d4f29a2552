#pragma once

// Per-round hypergraph construction and maximum N-dimensional matching.
//
// The router's filled memories form an N-partite graph. A hyperedge picks one
// filled slot per party such that every B_i slot lies within the connection
// length w of the A slot (|slot_bi - slot_a| <= w). A matching is a set of
// pairwise slot-disjoint hyperedges; the protocol wants a maximum matching,
// optionally tie-broken by age weights.
//
// Solvers:
//   * w = 0        unique matching: fully filled slot columns
//   * w = m-1      greedy pairing of each party's lowest filled slots
//   * N = 3        reduction to network flow (cardinality certificate)
//   * general      depth-first search over disjoint hyperedge subsets,
//                  guarded by a node budget (the problem is NP-hard for
//                  0 < w < m-1)
//
// Canonical matching = lexicographically smallest maximum matching, with
// hyperedges ordered by (A slot, B1 slot, ...). All tie-breaks reduce to it,
// which keeps results reproducible across solvers and runs.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qrouter/memory_state.hpp"
#include "qrouter/params.hpp"

namespace qrouter {

struct Hyperedge {
    std::array<std::uint8_t, kMaxParties> slot{}; // slot[p] = 0-based slot of party p (0 = A)
    std::uint8_t n = 0;

    int size() const { return n; }
    int member(int party) const { return slot[party]; }

    friend bool operator==(const Hyperedge& a, const Hyperedge& b) {
        if (a.n != b.n) return false;
        for (int i = 0; i < a.n; ++i)
            if (a.slot[i] != b.slot[i]) return false;
        return true;
    }
    friend bool operator<(const Hyperedge& a, const Hyperedge& b) {
        for (int i = 0; i < a.n && i < b.n; ++i)
            if (a.slot[i] != b.slot[i]) return a.slot[i] < b.slot[i];
        return a.n < b.n;
    }
};

inline Hyperedge make_hyperedge(const std::vector<int>& members) {
    if (members.size() > kMaxParties) throw std::invalid_argument("hyperedge too wide");
    Hyperedge e;
    e.n = static_cast<std::uint8_t>(members.size());
    for (std::size_t i = 0; i < members.size(); ++i)
        e.slot[i] = static_cast<std::uint8_t>(members[i]);
    return e;
}

struct Matching {
    std::vector<Hyperedge> edges; // kept in canonical (ascending) order

    int size() const { return static_cast<int>(edges.size()); }
    bool empty() const { return edges.empty(); }
};

// No slot of any party appears in two hyperedges.
inline bool is_disjoint(const Matching& m, int n_parties) {
    std::array<std::uint64_t, kMaxParties> used{};
    for (const auto& e : m.edges)
        for (int p = 0; p < n_parties; ++p) {
            const std::uint64_t bit = 1ull << e.slot[p];
            if (used[p] & bit) return false;
            used[p] |= bit;
        }
    return true;
}

struct HypergraphInstance {
    BitConfiguration filled;
    int w = 0;
    std::vector<Hyperedge> hyperedges; // the set T, lexicographic order
};

inline constexpr std::size_t kDefaultEdgeLimit = 200'000;
inline constexpr long long kDefaultNodeLimit = 5'000'000;

// All hyperedges satisfying the three construction rules, in lexicographic
// order over (A slot, B1 slot, ..., B_{N-1} slot).
inline std::vector<Hyperedge> enumerate_hyperedges(const BitConfiguration& c, int w,
                                                   std::size_t edge_limit = kDefaultEdgeLimit) {
    const int n = c.n_parties;
    const int m = c.mem_per_party;
    std::vector<Hyperedge> edges;

    // Per-B-party candidate list for a given A slot, ascending.
    std::vector<std::vector<int>> cand(n);
    for (int a = 0; a < m; ++a) {
        if (!c.filled(0, a)) continue;
        bool feasible = true;
        for (int p = 1; p < n && feasible; ++p) {
            cand[p].clear();
            const int lo = std::max(0, a - w);
            const int hi = std::min(m - 1, a + w);
            for (int b = lo; b <= hi; ++b)
                if (c.filled(p, b)) cand[p].push_back(b);
            feasible = !cand[p].empty();
        }
        if (!feasible) continue;

        Hyperedge e;
        e.n = static_cast<std::uint8_t>(n);
        e.slot[0] = static_cast<std::uint8_t>(a);
        std::vector<int> pos(n, 0);
        while (true) {
            for (int p = 1; p < n; ++p)
                e.slot[p] = static_cast<std::uint8_t>(cand[p][pos[p]]);
            edges.push_back(e);
            if (edges.size() > edge_limit)
                throw std::runtime_error("hyperedge enumeration exceeds limit of " +
                                         std::to_string(edge_limit));
            int p = n - 1;
            while (p >= 1 && ++pos[p] == static_cast<int>(cand[p].size())) pos[p--] = 0;
            if (p < 1) break;
        }
    }
    return edges;
}

inline HypergraphInstance build_instance(const BitConfiguration& c, int w,
                                         std::size_t edge_limit = kDefaultEdgeLimit) {
    return HypergraphInstance{c, w, enumerate_hyperedges(c, w, edge_limit)};
}

struct CardinalityBounds {
    int lower = 0; // min over parties of nodes with positive bipartite degree
    int upper = 0; // min over parties of filled-slot counts
};

// Bounds on the maximum matching cardinality. The upper bound always holds.
// The lower bound uses positive degree on the bipartite A<->B_i edges; it is
// not guaranteed achievable on every instance (callers should treat it as a
// reported figure, not an assertion).
inline CardinalityBounds cardinality_bounds(const BitConfiguration& c, int w) {
    const int n = c.n_parties;
    const int m = c.mem_per_party;

    CardinalityBounds out;
    out.upper = m;
    for (int p = 0; p < n; ++p) out.upper = std::min(out.upper, c.filled_count(p));

    auto connected = [&](int a, int b) { return std::abs(a - b) <= w; };
    int min_positive = -1;
    for (int p = 0; p < n; ++p) {
        int positive = 0;
        for (int s = 0; s < m; ++s) {
            if (!c.filled(p, s)) continue;
            bool has_edge = false;
            if (p == 0) {
                for (int q = 1; q < n && !has_edge; ++q)
                    for (int b = 0; b < m && !has_edge; ++b)
                        has_edge = c.filled(q, b) && connected(s, b);
            } else {
                for (int a = 0; a < m && !has_edge; ++a)
                    has_edge = c.filled(0, a) && connected(a, s);
            }
            positive += has_edge;
        }
        min_positive = min_positive < 0 ? positive : std::min(min_positive, positive);
    }
    out.lower = std::max(0, min_positive);
    return out;
}

// w = 0: only parallel connections exist, so the matching is exactly the set
// of slot columns that are filled for every party.
inline Matching max_matching_parallel(const BitConfiguration& c) {
    Matching m;
    for (int s = 0; s < c.mem_per_party; ++s) {
        bool all = true;
        for (int p = 0; p < c.n_parties && all; ++p) all = c.filled(p, s);
        if (!all) continue;
        Hyperedge e;
        e.n = static_cast<std::uint8_t>(c.n_parties);
        for (int p = 0; p < c.n_parties; ++p) e.slot[p] = static_cast<std::uint8_t>(s);
        m.edges.push_back(e);
    }
    return m;
}

// w = m-1: cardinality is min_k n_k; repeatedly pair each party's lowest
// unused filled slot. This is the lexicographically smallest maximum matching.
inline Matching max_matching_fullrange(const BitConfiguration& c) {
    const int n = c.n_parties;
    int l = c.mem_per_party;
    for (int p = 0; p < n; ++p) l = std::min(l, c.filled_count(p));

    Matching m;
    std::vector<int> next(n, 0);
    for (int k = 0; k < l; ++k) {
        Hyperedge e;
        e.n = static_cast<std::uint8_t>(n);
        for (int p = 0; p < n; ++p) {
            while (!c.filled(p, next[p])) ++next[p];
            e.slot[p] = static_cast<std::uint8_t>(next[p]);
            ++next[p];
        }
        m.edges.push_back(e);
    }
    return m;
}

namespace detail {

// Unit-capacity max flow, breadth-first augmentation. Graphs here have at
// most 4m+2 nodes, so nothing fancy is needed.
class UnitFlow {
public:
    explicit UnitFlow(int nodes) : head_(nodes, -1) {}

    void add_edge(int from, int to) {
        edges_.push_back({to, head_[from], 1});
        head_[from] = static_cast<int>(edges_.size()) - 1;
        edges_.push_back({from, head_[to], 0});
        head_[to] = static_cast<int>(edges_.size()) - 1;
    }

    int run(int source, int sink) {
        int flow = 0;
        std::vector<int> prev_edge(head_.size());
        while (true) {
            std::fill(prev_edge.begin(), prev_edge.end(), -1);
            std::queue<int> q;
            q.push(source);
            prev_edge[source] = -2;
            while (!q.empty() && prev_edge[sink] == -1) {
                int v = q.front();
                q.pop();
                for (int eid = head_[v]; eid != -1; eid = edges_[eid].next) {
                    if (edges_[eid].cap > 0 && prev_edge[edges_[eid].to] == -1) {
                        prev_edge[edges_[eid].to] = eid;
                        q.push(edges_[eid].to);
                    }
                }
            }
            if (prev_edge[sink] == -1) break;
            for (int v = sink; v != source;) {
                int eid = prev_edge[v];
                edges_[eid].cap -= 1;
                edges_[eid ^ 1].cap += 1;
                v = edges_[eid ^ 1].to;
            }
            ++flow;
        }
        return flow;
    }

    // Forward edge (by insertion order pair index) carries flow iff its
    // residual capacity dropped to 0.
    bool saturated(int pair_index) const { return edges_[2 * pair_index].cap == 0; }

private:
    struct Edge {
        int to;
        int next;
        int cap;
    };
    std::vector<Edge> edges_;
    std::vector<int> head_;
};

} // namespace detail

// N = 3 reduction to network flow: source -> B1 layer -> A layer -> copied A'
// layer -> B2 layer -> sink, all capacities 1. The A -> A' arcs (one per slot)
// enforce that each A memory joins at most one hyperedge.
inline Matching max_matching_flow3(const BitConfiguration& c, int w) {
    if (c.n_parties != 3) throw std::invalid_argument("max_matching_flow3 requires N = 3");
    const int m = c.mem_per_party;
    // node ids: 0 source, [1, m] B1, [m+1, 2m] A, [2m+1, 3m] A', [3m+1, 4m] B2, 4m+1 sink
    const int source = 0, sink = 4 * m + 1;
    auto b1_node = [m](int s) { return 1 + s; };
    auto a_node = [m](int s) { return 1 + m + s; };
    auto a2_node = [m](int s) { return 1 + 2 * m + s; };
    auto b2_node = [m](int s) { return 1 + 3 * m + s; };

    detail::UnitFlow flow(4 * m + 2);
    struct Arc {
        int kind; // 0 src, 1 b1-a, 2 a-a', 3 a'-b2, 4 sink
        int from_slot, to_slot;
    };
    std::vector<Arc> arcs;
    auto add = [&](int u, int v, Arc a) {
        flow.add_edge(u, v);
        arcs.push_back(a);
    };

    for (int s = 0; s < m; ++s)
        if (c.filled(1, s)) add(source, b1_node(s), {0, s, s});
    for (int b = 0; b < m; ++b) {
        if (!c.filled(1, b)) continue;
        for (int a = std::max(0, b - w); a <= std::min(m - 1, b + w); ++a)
            if (c.filled(0, a)) add(b1_node(b), a_node(a), {1, b, a});
    }
    for (int a = 0; a < m; ++a)
        if (c.filled(0, a)) add(a_node(a), a2_node(a), {2, a, a});
    for (int a = 0; a < m; ++a) {
        if (!c.filled(0, a)) continue;
        for (int b = std::max(0, a - w); b <= std::min(m - 1, a + w); ++b)
            if (c.filled(2, b)) add(a2_node(a), b2_node(b), {3, a, b});
    }
    for (int s = 0; s < m; ++s)
        if (c.filled(2, s)) add(b2_node(s), sink, {4, s, s});

    flow.run(source, sink);

    // Reconstruct: each A slot with a saturated A->A' arc has exactly one
    // saturated incoming B1 arc and one outgoing B2 arc.
    std::vector<int> b1_of(m, -1), b2_of(m, -1);
    std::vector<bool> a_used(m, false);
    for (std::size_t i = 0; i < arcs.size(); ++i) {
        if (!flow.saturated(static_cast<int>(i))) continue;
        const Arc& arc = arcs[i];
        if (arc.kind == 1) b1_of[arc.to_slot] = arc.from_slot;
        if (arc.kind == 2) a_used[arc.from_slot] = true;
        if (arc.kind == 3) b2_of[arc.from_slot] = arc.to_slot;
    }
    Matching out;
    for (int a = 0; a < m; ++a) {
        if (!a_used[a]) continue;
        Hyperedge e;
        e.n = 3;
        e.slot[0] = static_cast<std::uint8_t>(a);
        e.slot[1] = static_cast<std::uint8_t>(b1_of[a]);
        e.slot[2] = static_cast<std::uint8_t>(b2_of[a]);
        out.edges.push_back(e);
    }
    std::sort(out.edges.begin(), out.edges.end());
    return out;
}

// Age weights attached to a hyperedge.
//   W1: sum over B parties of |age(B_i slot) - age(A slot)|
//   W2: sum of the ages of every member
inline long long edge_weight_w1(const Hyperedge& e, const MemoryState& ages) {
    const long long da = ages.at(0, e.slot[0]);
    long long sum = 0;
    for (int p = 1; p < e.n; ++p) sum += std::llabs(ages.at(p, e.slot[p]) - da);
    return sum;
}

inline long long edge_weight_w2(const Hyperedge& e, const MemoryState& ages) {
    long long sum = 0;
    for (int p = 0; p < e.n; ++p) sum += ages.at(p, e.slot[p]);
    return sum;
}

namespace detail {

enum class WeightGoal { none, minimize, maximize };

struct SearchConfig {
    WeightGoal goal = WeightGoal::none;
    bool use_w1 = false; // else W2 when goal != none
    const MemoryState* ages = nullptr;
    long long node_limit = kDefaultNodeLimit;
};

// Exhaustive search over pairwise-disjoint subsets of T in lexicographic
// order. Keeps the best (cardinality first, then weight goal); the first
// candidate reached at a given (cardinality, weight) wins, which makes every
// tie-break the lexicographically smallest matching.
class SubsetSearch {
public:
    SubsetSearch(const std::vector<Hyperedge>& edges, int n_parties,
                 const std::vector<int>& filled_per_party, const SearchConfig& cfg)
        : edges_(edges), n_(n_parties), avail_(filled_per_party), cfg_(cfg) {
        upper_ = edges.empty() ? 0 : *std::min_element(avail_.begin(), avail_.end());
    }

    Matching run() {
        best_.clear();
        best_weight_ = 0;
        nodes_ = 0;
        done_ = false;
        used_.fill(0);
        current_.clear();
        current_weight_ = 0;
        dfs(0);
        Matching m;
        m.edges = best_;
        return m;
    }

private:
    long long edge_weight(const Hyperedge& e) const {
        return cfg_.use_w1 ? edge_weight_w1(e, *cfg_.ages) : edge_weight_w2(e, *cfg_.ages);
    }

    bool better_weight(long long cand, long long best) const {
        return cfg_.goal == WeightGoal::minimize ? cand < best : cand > best;
    }

    void consider() {
        const int card = static_cast<int>(current_.size());
        const int best_card = static_cast<int>(best_.size());
        bool improves = card > best_card;
        if (!improves && card == best_card && cfg_.goal != WeightGoal::none)
            improves = better_weight(current_weight_, best_weight_);
        if (improves) {
            best_ = current_;
            best_weight_ = current_weight_;
            // Without weights, a matching that reaches the instance upper
            // bound cannot be beaten; the first one found is canonical.
            if (cfg_.goal == WeightGoal::none && card == upper_) done_ = true;
        }
    }

    void dfs(int from) {
        if (done_) return;
        if (++nodes_ > cfg_.node_limit)
            throw std::runtime_error("matching search exceeds node limit of " +
                                     std::to_string(cfg_.node_limit));
        const int total = static_cast<int>(edges_.size());
        for (int j = from; j < total && !done_; ++j) {
            // Neither the remaining edges nor the scarcest party can lift the
            // cardinality high enough; ties only matter under a weight goal.
            int avail_bound = avail_[0];
            for (int p = 1; p < n_; ++p) avail_bound = std::min(avail_bound, avail_[p]);
            const int reachable =
                static_cast<int>(current_.size()) + std::min(total - j, avail_bound);
            const int needed = static_cast<int>(best_.size()) +
                               (cfg_.goal == WeightGoal::none ? 1 : 0);
            if (reachable < needed) return;

            const Hyperedge& e = edges_[j];
            bool clash = false;
            for (int p = 0; p < n_ && !clash; ++p)
                clash = (used_[p] >> e.slot[p]) & 1ull;
            if (clash) continue;

            for (int p = 0; p < n_; ++p) {
                used_[p] |= 1ull << e.slot[p];
                --avail_[p];
            }
            current_.push_back(e);
            if (cfg_.goal != WeightGoal::none) current_weight_ += edge_weight(e);
            consider();
            dfs(j + 1);
            if (cfg_.goal != WeightGoal::none) current_weight_ -= edge_weight(e);
            current_.pop_back();
            for (int p = 0; p < n_; ++p) {
                used_[p] &= ~(1ull << e.slot[p]);
                ++avail_[p];
            }
        }
    }

    const std::vector<Hyperedge>& edges_;
    int n_;
    std::vector<int> avail_; // unused filled slots per party
    SearchConfig cfg_;
    int upper_ = 0;

    std::array<std::uint64_t, kMaxParties> used_{};
    std::vector<Hyperedge> current_, best_;
    long long current_weight_ = 0, best_weight_ = 0;
    long long nodes_ = 0;
    bool done_ = false;
};

inline std::vector<int> filled_counts(const BitConfiguration& c) {
    std::vector<int> counts(c.n_parties);
    for (int p = 0; p < c.n_parties; ++p) counts[p] = c.filled_count(p);
    return counts;
}

} // namespace detail

// Exhaustive maximum matching; canonical (lexicographically smallest) among
// the maxima. Throws when the subset search exceeds its node budget.
inline Matching max_matching_bruteforce(const HypergraphInstance& inst,
                                        long long node_limit = kDefaultNodeLimit) {
    detail::SearchConfig cfg;
    cfg.node_limit = node_limit;
    detail::SubsetSearch search(inst.hyperedges, inst.filled.n_parties,
                                detail::filled_counts(inst.filled), cfg);
    return search.run();
}

// Maximum matching optimizing the strategy's weight among all maximum
// matchings. S0 reduces to the canonical matching.
inline Matching max_matching_weighted(const HypergraphInstance& inst, const MemoryState& ages,
                                      Strategy strategy,
                                      long long node_limit = kDefaultNodeLimit) {
    detail::SearchConfig cfg;
    cfg.node_limit = node_limit;
    cfg.ages = &ages;
    switch (strategy) {
        case Strategy::S0: cfg.goal = detail::WeightGoal::none; break;
        case Strategy::S1a:
            cfg.goal = detail::WeightGoal::minimize;
            cfg.use_w1 = true;
            break;
        case Strategy::S1b:
            cfg.goal = detail::WeightGoal::maximize;
            cfg.use_w1 = true;
            break;
        case Strategy::S2: cfg.goal = detail::WeightGoal::minimize; break;
    }
    detail::SubsetSearch search(inst.hyperedges, inst.filled.n_parties,
                                detail::filled_counts(inst.filled), cfg);
    return search.run();
}

// Canonical maximum matching (the S0 / measurement-map choice), dispatching
// to the trivial solvers where the regime allows.
inline Matching canonical_max_matching(const BitConfiguration& c, int w,
                                       long long node_limit = kDefaultNodeLimit) {
    if (w == 0) return max_matching_parallel(c);
    if (w >= c.mem_per_party - 1) return max_matching_fullrange(c);
    return max_matching_bruteforce(build_instance(c, w), node_limit);
}

// Strategy-directed matching on live memory state (simulator entry point).
inline Matching strategy_max_matching(const MemoryState& state, int w, Strategy strategy,
                                      long long node_limit = kDefaultNodeLimit) {
    const BitConfiguration c = to_bit_configuration(state);
    if (w == 0) return max_matching_parallel(c); // unique, weights cannot differ
    if (strategy == Strategy::S0) return canonical_max_matching(c, w, node_limit);
    return max_matching_weighted(build_instance(c, w), state, strategy, node_limit);
}

// 1-based display. Tripartite edges are printed in the (B1, A, B2) order used
// by the flow construction, which is how the worked examples list them.
inline std::string format_hyperedge(const Hyperedge& e) {
    std::ostringstream os;
    os << '{';
    if (e.n == 3)
        os << e.slot[1] + 1 << ',' << e.slot[0] + 1 << ',' << e.slot[2] + 1;
    else
        for (int p = 0; p < e.n; ++p) os << (p ? "," : "") << e.slot[p] + 1;
    os << '}';
    return os.str();
}

inline std::string party_label(int p) {
    return p == 0 ? std::string("A") : "B" + std::to_string(p);
}

// Text adjacency listing of an instance (party, slot, partner list), plus the
// enumerated hyperedges and cardinality bounds.
inline std::string format_instance(const BitConfiguration& c, int w) {
    std::ostringstream os;
    const int n = c.n_parties;
    const int m = c.mem_per_party;
    os << "instance: N=" << n << " m=" << m << " w=" << w << "\n";
    auto connected = [&](int a, int b) { return std::abs(a - b) <= w; };
    for (int p = 0; p < n; ++p) {
        for (int s = 0; s < m; ++s) {
            if (!c.filled(p, s)) continue;
            os << party_label(p) << " slot " << s + 1 << " ->";
            bool any = false;
            if (p == 0) {
                for (int q = 1; q < n; ++q)
                    for (int b = 0; b < m; ++b)
                        if (c.filled(q, b) && connected(s, b)) {
                            os << ' ' << party_label(q) << ':' << b + 1;
                            any = true;
                        }
            } else {
                for (int a = 0; a < m; ++a)
                    if (c.filled(0, a) && connected(a, s)) {
                        os << " A:" << a + 1;
                        any = true;
                    }
            }
            if (!any) os << " (none)";
            os << "\n";
        }
    }
    const auto edges = enumerate_hyperedges(c, w);
    os << "hyperedges (" << edges.size() << ")";
    if (n == 3) os << " as (B1,A,B2)";
    os << ":";
    for (const auto& e : edges) os << ' ' << format_hyperedge(e);
    os << "\n";
    const auto bounds = cardinality_bounds(c, w);
    const Matching best = canonical_max_matching(c, w);
    os << "bounds: [" << bounds.lower << ", " << bounds.upper << "], maximum matching l = "
       << best.size() << "\n";
    return os.str();
}

} // namespace qrouter
