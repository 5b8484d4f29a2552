#pragma once

// Router memory representations.
//
// MemoryState is the simulation view: one age per slot, where the age counts
// completed storage rounds (0 = arrived this round, fidelity 1). The analytic
// view is a BitConfiguration: N*m filled/empty flags, concatenated party-major
// (A first, then B1 ... B_{N-1}), slot index ascending.
//
// Slot indices are 0-based everywhere in code; any externally reported index
// is 1-based.

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace qrouter {

inline constexpr int kEmptySlot = -1;

struct MemoryState {
    int n_parties = 0;
    int mem_per_party = 0;
    std::vector<int> ages; // n_parties * mem_per_party entries, kEmptySlot or age >= 0

    MemoryState() = default;
    MemoryState(int n, int m) : n_parties(n), mem_per_party(m), ages(n * m, kEmptySlot) {}

    int& at(int party, int slot) { return ages[party * mem_per_party + slot]; }
    int at(int party, int slot) const { return ages[party * mem_per_party + slot]; }
    bool filled(int party, int slot) const { return at(party, slot) != kEmptySlot; }

    int filled_count(int party) const {
        int c = 0;
        for (int s = 0; s < mem_per_party; ++s) c += filled(party, s);
        return c;
    }
};

struct BitConfiguration {
    int n_parties = 0;
    int mem_per_party = 0;
    std::vector<std::uint8_t> bits; // length n_parties * mem_per_party, each 0 or 1

    BitConfiguration() = default;
    BitConfiguration(int n, int m) : n_parties(n), mem_per_party(m), bits(n * m, 0) {}

    int size() const { return static_cast<int>(bits.size()); }
    std::uint8_t get(int party, int slot) const { return bits[party * mem_per_party + slot]; }
    void set(int party, int slot, bool v) { bits[party * mem_per_party + slot] = v ? 1 : 0; }

    bool filled(int party, int slot) const { return get(party, slot) != 0; }

    int filled_count(int party) const {
        int c = 0;
        for (int s = 0; s < mem_per_party; ++s) c += get(party, s);
        return c;
    }

    bool operator==(const BitConfiguration& o) const = default;
};

// Bit i is 1 iff the corresponding slot holds a qubit.
inline BitConfiguration to_bit_configuration(const MemoryState& state) {
    BitConfiguration c(state.n_parties, state.mem_per_party);
    for (std::size_t i = 0; i < state.ages.size(); ++i)
        c.bits[i] = state.ages[i] == kEmptySlot ? 0 : 1;
    return c;
}

// Dense integer encoding used by the analytic engine: bit i of the index is
// entry i of the concatenated configuration vector.
inline std::uint32_t config_to_index(const BitConfiguration& c) {
    std::uint32_t idx = 0;
    for (int i = 0; i < c.size(); ++i)
        if (c.bits[i]) idx |= 1u << i;
    return idx;
}

inline BitConfiguration index_to_config(std::uint32_t idx, int n_parties, int mem_per_party) {
    BitConfiguration c(n_parties, mem_per_party);
    for (int i = 0; i < c.size(); ++i) c.bits[i] = (idx >> i) & 1u;
    return c;
}

// Builds a configuration from per-party fill vectors, e.g. the worked example
// a=(1,0,1,0), b1=(1,1,0,1), b2=(0,0,1,1).
inline BitConfiguration make_config(const std::vector<std::vector<int>>& party_bits) {
    if (party_bits.empty()) throw std::invalid_argument("make_config: no parties");
    const int n = static_cast<int>(party_bits.size());
    const int m = static_cast<int>(party_bits[0].size());
    BitConfiguration c(n, m);
    for (int p = 0; p < n; ++p) {
        if (static_cast<int>(party_bits[p].size()) != m)
            throw std::invalid_argument("make_config: ragged party vectors");
        for (int s = 0; s < m; ++s) c.set(p, s, party_bits[p][s] != 0);
    }
    return c;
}

} // namespace qrouter
