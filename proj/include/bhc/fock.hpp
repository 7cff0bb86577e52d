#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

namespace bhc {

// Occupation-number state (n_1, ..., n_L), one entry per site.
struct FockState {
    std::vector<int> n;

    FockState() = default;
    explicit FockState(std::vector<int> occ) : n(std::move(occ)) {}

    int sites() const { return static_cast<int>(n.size()); }
    int total() const;

    // Manifold label a = -sum_l n_l(n_l-1)/2. Always a non-positive integer;
    // zero exactly when no site holds more than one boson.
    int anharmonicity() const;

    // Compact site notation: "3_2" means three bosons on site 2 (1-based).
    // Occupied sites only, separated by spaces; the vacuum prints as "vac".
    std::string shorthand() const;

    // Per-site digit string, e.g. (0,3,0,0) -> "0300". Requires n_l <= 9.
    std::string digits() const;

    auto operator<=>(const FockState&) const = default;
};

// Parses "2_1 3_3 3_5" (commas also accepted); unlisted sites are empty.
FockState fock_from_shorthand(const std::string& text, int L);

// Parses "0300" one digit per site.
FockState fock_from_digits(const std::string& text);

// All states with fixed site count L, total boson number N and local
// cutoff d_max, ordered lexicographically descending on the occupation
// vector. The ordering is part of the serialization contract.
struct SectorBasis {
    int L = 0;
    int N = 0;
    int d_max = 0;
    std::vector<FockState> states;
    std::map<std::vector<int>, int> index;

    int dim() const { return static_cast<int>(states.size()); }
    const FockState& state(int i) const { return states[i]; }
    // -1 when the state is not in the sector.
    int find(const FockState& s) const;
};

SectorBasis build_sector_basis(int L, int N, int d_max);

// Direct sum of exact sectors (d_max = N each), ascending in N.
// Global index = offset[k] + (index within sector k).
struct FockSpace {
    int L = 0;
    std::vector<SectorBasis> sectors;
    std::vector<int> offsets;

    int dim() const;
    int n_sectors() const { return static_cast<int>(sectors.size()); }
    const SectorBasis& sector(int k) const { return sectors[k]; }
    // Index into `sectors` for total number N, or -1.
    int sector_of(int N) const;
    int global_index(const FockState& s) const;  // -1 when absent
    const FockState& state(int g) const;
};

FockSpace build_fock_space(int L, int N_max);
// A space holding a single sector (closed problems without dissipation).
FockSpace build_single_sector_space(int L, int N);

}  // namespace bhc
