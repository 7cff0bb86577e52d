#include "bhc/fock.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace bhc {

int FockState::total() const {
    int s = 0;
    for (int v : n) s += v;
    return s;
}

int FockState::anharmonicity() const {
    int s = 0;
    for (int v : n) s += v * (v - 1);
    return -s / 2;
}

std::string FockState::shorthand() const {
    std::ostringstream out;
    bool first = true;
    for (int l = 0; l < sites(); ++l) {
        if (n[l] == 0) continue;
        if (!first) out << ' ';
        out << n[l] << '_' << (l + 1);
        first = false;
    }
    return first ? "vac" : out.str();
}

std::string FockState::digits() const {
    std::string out;
    for (int v : n) {
        if (v > 9) throw std::invalid_argument("digit form needs n_l <= 9");
        out.push_back(static_cast<char>('0' + v));
    }
    return out;
}

FockState fock_from_shorthand(const std::string& text, int L) {
    FockState s(std::vector<int>(L, 0));
    std::string cleaned = text;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::istringstream in(cleaned);
    std::string tok;
    while (in >> tok) {
        if (tok == "vac") continue;
        auto us = tok.find('_');
        if (us == std::string::npos || us == 0 || us + 1 == tok.size())
            throw std::invalid_argument("bad occupation token '" + tok + "' (want e.g. 3_2)");
        int count = 0, site = 0;
        try {
            count = std::stoi(tok.substr(0, us));
            site = std::stoi(tok.substr(us + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("bad occupation token '" + tok + "'");
        }
        if (site < 1 || site > L)
            throw std::invalid_argument("site " + std::to_string(site) + " outside chain of length " +
                                        std::to_string(L));
        if (count < 0) throw std::invalid_argument("negative occupation in '" + tok + "'");
        if (s.n[site - 1] != 0)
            throw std::invalid_argument("site " + std::to_string(site) + " listed twice");
        s.n[site - 1] = count;
    }
    return s;
}

FockState fock_from_digits(const std::string& text) {
    std::vector<int> n;
    n.reserve(text.size());
    for (char c : text) {
        if (c < '0' || c > '9') throw std::invalid_argument("bad digit state '" + text + "'");
        n.push_back(c - '0');
    }
    if (n.empty()) throw std::invalid_argument("empty state string");
    return FockState(std::move(n));
}

int SectorBasis::find(const FockState& s) const {
    auto it = index.find(s.n);
    return it == index.end() ? -1 : it->second;
}

namespace {

// Emits occupation vectors in lexicographic descending order by placing the
// largest feasible count on the leftmost site first.
void enumerate(int site, int left, int L, int d_max, std::vector<int>& cur,
               std::vector<FockState>& out) {
    if (site == L) {
        if (left == 0) out.emplace_back(cur);
        return;
    }
    int hi = std::min(left, d_max);
    // Prune branches that cannot absorb the remaining bosons.
    int lo = std::max(0, left - d_max * (L - site - 1));
    for (int v = hi; v >= lo; --v) {
        cur[site] = v;
        enumerate(site + 1, left - v, L, d_max, cur, out);
    }
    cur[site] = 0;
}

}  // namespace

SectorBasis build_sector_basis(int L, int N, int d_max) {
    if (L < 1) throw std::invalid_argument("need at least one site");
    if (N < 0) throw std::invalid_argument("negative boson number");
    if (d_max < 1) throw std::invalid_argument("local cutoff must be positive");
    SectorBasis b;
    b.L = L;
    b.N = N;
    b.d_max = d_max;
    std::vector<int> cur(L, 0);
    enumerate(0, N, L, d_max, cur, b.states);
    if (b.states.empty())
        throw std::invalid_argument("empty sector: " + std::to_string(N) + " bosons exceed " +
                                    std::to_string(L) + " sites at cutoff " + std::to_string(d_max));
    for (int i = 0; i < b.dim(); ++i) b.index[b.states[i].n] = i;
    return b;
}

int FockSpace::dim() const {
    return sectors.empty() ? 0 : offsets.back() + sectors.back().dim();
}

int FockSpace::sector_of(int N) const {
    for (int k = 0; k < n_sectors(); ++k)
        if (sectors[k].N == N) return k;
    return -1;
}

int FockSpace::global_index(const FockState& s) const {
    int k = sector_of(s.total());
    if (k < 0) return -1;
    int i = sectors[k].find(s);
    return i < 0 ? -1 : offsets[k] + i;
}

const FockState& FockSpace::state(int g) const {
    for (int k = n_sectors() - 1; k >= 0; --k)
        if (g >= offsets[k]) return sectors[k].state(g - offsets[k]);
    throw std::out_of_range("global index");
}

namespace {

FockSpace assemble(int L, const std::vector<int>& Ns) {
    FockSpace sp;
    sp.L = L;
    int off = 0;
    for (int N : Ns) {
        sp.sectors.push_back(build_sector_basis(L, N, std::max(N, 1)));
        sp.offsets.push_back(off);
        off += sp.sectors.back().dim();
    }
    return sp;
}

}  // namespace

FockSpace build_fock_space(int L, int N_max) {
    if (N_max < 0) throw std::invalid_argument("negative boson number");
    std::vector<int> Ns(N_max + 1);
    for (int N = 0; N <= N_max; ++N) Ns[N] = N;
    return assemble(L, Ns);
}

FockSpace build_single_sector_space(int L, int N) {
    return assemble(L, {N});
}

}  // namespace bhc
