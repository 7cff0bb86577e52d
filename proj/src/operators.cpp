#include "bhc/operators.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace bhc {

double DephasingModel::weight(int site, int n) const {
    if (!exponential) return static_cast<double>(n);
    if (n == 0) return 0.0;
    double al = a.empty() ? 0.0 : a.at(site);
    return std::exp(al * (n - 1));
}

void ModelParams::validate() const {
    const int L_ = L();
    if (L_ < 1) throw std::invalid_argument("empty parameter set");
    if (static_cast<int>(U.size()) != L_ || static_cast<int>(gamma.size()) != L_ ||
        static_cast<int>(kappa.size()) != L_)
        throw std::invalid_argument("per-site parameter arrays must share one length");
    if (static_cast<int>(J.size()) != L_ - 1)
        throw std::invalid_argument("need one hopping rate per bond (L-1 values)");
    for (double u : U)
        if (u <= 0) throw std::invalid_argument("on-site interaction must be positive");
    for (double g : gamma)
        if (g < 0) throw std::invalid_argument("negative loss rate");
    for (double k : kappa)
        if (k < 0) throw std::invalid_argument("negative dephasing rate");
    if (dephasing.exponential && !dephasing.a.empty() &&
        static_cast<int>(dephasing.a.size()) != L_)
        throw std::invalid_argument("dephasing exponent list must have one entry per site");
}

ModelParams ModelParams::uniform(int L, double U_, double J_, double gamma_, double kappa_) {
    ModelParams p;
    p.omega.assign(L, 0.0);
    p.U.assign(L, U_);
    p.J.assign(L > 0 ? L - 1 : 0, J_);
    p.gamma.assign(L, gamma_);
    p.kappa.assign(L, kappa_);
    p.validate();
    return p;
}

namespace {

std::vector<double> frame_detunings(const ModelParams& p) {
    std::vector<double> d = p.omega;
    if (p.rotating_frame) {
        double mean = std::accumulate(d.begin(), d.end(), 0.0) / d.size();
        for (double& v : d) v -= mean;
    }
    return d;
}

void append_sector_hopping(const ModelParams& p, const SectorBasis& b, int row_offset,
                           std::vector<Triplet>& ts) {
    for (int i = 0; i < b.dim(); ++i) {
        const FockState& s = b.state(i);
        for (int l = 0; l + 1 < b.L; ++l) {
            // Move one boson from site l+1 to site l and the reverse; adding
            // both directions keeps the matrix manifestly Hermitian.
            for (int dir = 0; dir < 2; ++dir) {
                int from = dir == 0 ? l + 1 : l;
                int to = dir == 0 ? l : l + 1;
                if (s.n[from] == 0 || s.n[to] + 1 > b.d_max) continue;
                FockState t = s;
                t.n[from] -= 1;
                t.n[to] += 1;
                int j = b.find(t);
                if (j < 0) continue;
                double amp = p.J[l] * std::sqrt(double(s.n[from]) * double(t.n[to]));
                ts.push_back({row_offset + j, row_offset + i, amp});
            }
        }
    }
}

void append_sector_diagonal(const ModelParams& p, const SectorBasis& b, int row_offset,
                            const std::vector<double>& domega, std::vector<Triplet>& ts) {
    for (int i = 0; i < b.dim(); ++i) {
        const FockState& s = b.state(i);
        double e = 0.0;
        for (int l = 0; l < b.L; ++l)
            e += domega[l] * s.n[l] - 0.5 * p.U[l] * s.n[l] * (s.n[l] - 1);
        if (e != 0.0) ts.push_back({row_offset + i, row_offset + i, e});
    }
}

void check_chain(const ModelParams& p, int L) {
    p.validate();
    if (p.L() != L) throw std::invalid_argument("parameter arrays sized for a different chain");
}

}  // namespace

SparseOperator build_hamiltonian(const ModelParams& p, const SectorBasis& b) {
    check_chain(p, b.L);
    std::vector<Triplet> ts;
    append_sector_diagonal(p, b, 0, frame_detunings(p), ts);
    append_sector_hopping(p, b, 0, ts);
    auto H = SparseOperator::from_triplets(b.dim(), b.dim(), std::move(ts));
    H.claim_hermitian();
    return H;
}

SparseOperator build_hamiltonian(const ModelParams& p, const FockSpace& sp) {
    check_chain(p, sp.L);
    std::vector<Triplet> ts;
    auto domega = frame_detunings(p);
    for (int k = 0; k < sp.n_sectors(); ++k) {
        append_sector_diagonal(p, sp.sector(k), sp.offsets[k], domega, ts);
        append_sector_hopping(p, sp.sector(k), sp.offsets[k], ts);
    }
    auto H = SparseOperator::from_triplets(sp.dim(), sp.dim(), std::move(ts));
    H.claim_hermitian();
    return H;
}

SparseOperator build_hopping(const ModelParams& p, const SectorBasis& b) {
    check_chain(p, b.L);
    std::vector<Triplet> ts;
    append_sector_hopping(p, b, 0, ts);
    auto H = SparseOperator::from_triplets(b.dim(), b.dim(), std::move(ts));
    H.claim_hermitian();
    return H;
}

SparseOperator build_hopping(const ModelParams& p, const FockSpace& sp) {
    check_chain(p, sp.L);
    std::vector<Triplet> ts;
    for (int k = 0; k < sp.n_sectors(); ++k)
        append_sector_hopping(p, sp.sector(k), sp.offsets[k], ts);
    auto H = SparseOperator::from_triplets(sp.dim(), sp.dim(), std::move(ts));
    H.claim_hermitian();
    return H;
}

SparseOperator build_number_op(int site, const SectorBasis& b) {
    if (site < 1 || site > b.L) throw std::invalid_argument("site outside chain");
    std::vector<Triplet> ts;
    for (int i = 0; i < b.dim(); ++i) {
        int n = b.state(i).n[site - 1];
        if (n) ts.push_back({i, i, double(n)});
    }
    auto A = SparseOperator::from_triplets(b.dim(), b.dim(), std::move(ts));
    A.claim_hermitian();
    return A;
}

SparseOperator build_number_op(int site, const FockSpace& sp) {
    if (site < 1 || site > sp.L) throw std::invalid_argument("site outside chain");
    std::vector<Triplet> ts;
    for (int g = 0; g < sp.dim(); ++g) {
        int n = sp.state(g).n[site - 1];
        if (n) ts.push_back({g, g, double(n)});
    }
    auto A = SparseOperator::from_triplets(sp.dim(), sp.dim(), std::move(ts));
    A.claim_hermitian();
    return A;
}

SparseOperator build_lowering_map(int site, const SectorBasis& from_N, const SectorBasis& to_Nm1) {
    if (from_N.L != to_Nm1.L) throw std::invalid_argument("bases of different chains");
    if (to_Nm1.N != from_N.N - 1)
        throw std::invalid_argument("lowering map target must hold one boson less");
    if (site < 1 || site > from_N.L) throw std::invalid_argument("site outside chain");
    std::vector<Triplet> ts;
    for (int i = 0; i < from_N.dim(); ++i) {
        const FockState& s = from_N.state(i);
        if (s.n[site - 1] == 0) continue;
        FockState t = s;
        t.n[site - 1] -= 1;
        int j = to_Nm1.find(t);
        if (j < 0) continue;  // target clipped by the cutoff of the smaller basis
        ts.push_back({j, i, std::sqrt(double(s.n[site - 1]))});
    }
    return SparseOperator::from_triplets(to_Nm1.dim(), from_N.dim(), std::move(ts));
}

SparseOperator build_lowering(int site, const FockSpace& sp) {
    if (site < 1 || site > sp.L) throw std::invalid_argument("site outside chain");
    std::vector<Triplet> ts;
    for (int k = 0; k < sp.n_sectors(); ++k) {
        const SectorBasis& b = sp.sector(k);
        int kd = sp.sector_of(b.N - 1);
        if (kd < 0) continue;  // lowest represented sector: amplitude leaves the space
        const SectorBasis& d = sp.sector(kd);
        for (int i = 0; i < b.dim(); ++i) {
            const FockState& s = b.state(i);
            if (s.n[site - 1] == 0) continue;
            FockState t = s;
            t.n[site - 1] -= 1;
            int j = d.find(t);
            if (j < 0) continue;
            ts.push_back({sp.offsets[kd] + j, sp.offsets[k] + i, std::sqrt(double(s.n[site - 1]))});
        }
    }
    return SparseOperator::from_triplets(sp.dim(), sp.dim(), std::move(ts));
}

std::vector<double> dephasing_weights(int site, const ModelParams& p, const SectorBasis& b) {
    check_chain(p, b.L);
    std::vector<double> w(b.dim());
    for (int i = 0; i < b.dim(); ++i) w[i] = p.dephasing.weight(site - 1, b.state(i).n[site - 1]);
    return w;
}

std::vector<double> dephasing_weights(int site, const ModelParams& p, const FockSpace& sp) {
    check_chain(p, sp.L);
    std::vector<double> w(sp.dim());
    for (int g = 0; g < sp.dim(); ++g) w[g] = p.dephasing.weight(site - 1, sp.state(g).n[site - 1]);
    return w;
}

namespace {

double decay_of_state(const ModelParams& p, const FockState& s) {
    double d = 0.0;
    for (int l = 0; l < s.sites(); ++l) {
        double w = p.dephasing.weight(l, s.n[l]);
        d += p.gamma[l] * s.n[l] + p.kappa[l] * w * w;
    }
    return d;
}

}  // namespace

std::vector<double> no_jump_decay(const ModelParams& p, const SectorBasis& b) {
    check_chain(p, b.L);
    std::vector<double> d(b.dim());
    for (int i = 0; i < b.dim(); ++i) d[i] = decay_of_state(p, b.state(i));
    return d;
}

std::vector<double> no_jump_decay(const ModelParams& p, const FockSpace& sp) {
    check_chain(p, sp.L);
    std::vector<double> d(sp.dim());
    for (int g = 0; g < sp.dim(); ++g) d[g] = decay_of_state(p, sp.state(g));
    return d;
}

std::vector<int> manifold_labels(const SectorBasis& b) {
    std::vector<int> a(b.dim());
    for (int i = 0; i < b.dim(); ++i) a[i] = b.state(i).anharmonicity();
    return a;
}

std::vector<std::pair<int, SparseOperator>> manifold_projectors(const SectorBasis& b) {
    std::map<int, std::vector<Triplet>> groups;
    auto labels = manifold_labels(b);
    for (int i = 0; i < b.dim(); ++i) groups[labels[i]].push_back({i, i, 1.0});
    std::vector<std::pair<int, SparseOperator>> out;
    out.reserve(groups.size());
    for (auto& [a, ts] : groups) {
        auto P = SparseOperator::from_triplets(b.dim(), b.dim(), std::move(ts));
        P.claim_hermitian();
        out.emplace_back(a, std::move(P));
    }
    return out;
}

}  // namespace bhc
