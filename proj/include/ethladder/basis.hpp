#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <vector>

#include "ethladder/common.hpp"

namespace ethladder {

// Ordered basis of one total-S^z sector. Spins are encoded as bits of a
// 64-bit word, bit value 1 = up; bit i hosts site i+1 of the combined
// site list (left leg first, then right leg).
struct SectorBasis {
    int n_sites = 0;
    int two_sz = 0;                     // twice the total magnetization
    std::vector<std::uint64_t> states;  // strictly ascending

    int dim() const { return static_cast<int>(states.size()); }

    int n_up() const { return (n_sites + two_sz) / 2; }

    // Position of a configuration in `states`; -1 if not in the sector.
    int index_of(std::uint64_t config) const {
        auto it = std::lower_bound(states.begin(), states.end(), config);
        if (it == states.end() || *it != config) return -1;
        return static_cast<int>(it - states.begin());
    }
};

inline SectorBasis build_sector_basis(int n_sites, int two_sz) {
    if (n_sites < 1 || n_sites > 62)
        throw sector_error("build_sector_basis: n_sites out of range");
    if (std::abs(two_sz) > n_sites)
        throw sector_error("build_sector_basis: |two_sz| exceeds n_sites");
    if (((n_sites + two_sz) & 1) != 0)
        throw sector_error("build_sector_basis: two_sz parity mismatch");

    SectorBasis basis;
    basis.n_sites = n_sites;
    basis.two_sz = two_sz;
    const int ups = (n_sites + two_sz) / 2;
    const std::uint64_t end = std::uint64_t(1) << n_sites;
    for (std::uint64_t s = 0; s < end; ++s) {
        if (std::popcount(s) == ups) basis.states.push_back(s);
    }
    return basis;
}

} // namespace ethladder
