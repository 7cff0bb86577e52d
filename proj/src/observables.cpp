#include "bhc/observables.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string_view>

#include "bhc/operators.hpp"

namespace bhc {

namespace {

bool parse_int(std::string_view s, int& out) {
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), last, out);
    return ec == std::errc() && ptr == last;
}

[[noreturn]] void bad_name(const std::string& name, const char* why) {
    throw std::invalid_argument("observable '" + name + "': " + why);
}

// Every manifold label the space supports, mapped to zero.
std::map<int, double> zero_label_map(const FockSpace& sp) {
    std::map<int, double> pops;
    for (const auto& sec : sp.sectors)
        for (int a : manifold_labels(sec)) pops.emplace(a, 0.0);
    return pops;
}

}  // namespace

ObservableRequest ObservableRequest::parse(const std::string& name) {
    ObservableRequest r;
    const std::string_view s(name);
    if (s == "purity") {
        r.kind = Kind::purity;
        return r;
    }
    if (s.rfind("coh_", 0) == 0) {
        const auto rest = s.substr(4);
        const auto cut = rest.find('_');
        if (cut == std::string_view::npos) bad_name(name, "expected coh_<digits>_<digits>");
        const auto a = rest.substr(0, cut);
        const auto b = rest.substr(cut + 1);
        if (a.empty() || b.empty() || b.find('_') != std::string_view::npos)
            bad_name(name, "expected coh_<digits>_<digits>");
        if (a.size() != b.size()) bad_name(name, "bra and ket site counts differ");
        r.kind = Kind::coherence;
        r.ket = fock_from_digits(std::string(a));
        r.bra = fock_from_digits(std::string(b));
        return r;
    }
    if (s.rfind("P_N", 0) == 0) {
        if (!parse_int(s.substr(3), r.sector) || r.sector < 0)
            bad_name(name, "expected P_N<total boson number>");
        r.kind = Kind::sector_population;
        return r;
    }
    if (s.rfind("P_a", 0) == 0) {
        if (!parse_int(s.substr(3), r.label) || r.label > 0)
            bad_name(name, "expected P_a<label>, label <= 0");
        r.kind = Kind::manifold_population;
        return r;
    }
    if (s.rfind("n_", 0) == 0) {
        if (!parse_int(s.substr(2), r.site) || r.site < 1)
            bad_name(name, "expected n_<site>, 1-based");
        r.kind = Kind::occupation;
        return r;
    }
    bad_name(name, "unrecognized");
}

std::string ObservableRequest::name() const {
    switch (kind) {
        case Kind::occupation: return "n_" + std::to_string(site);
        case Kind::sector_population: return "P_N" + std::to_string(sector);
        case Kind::manifold_population: return "P_a" + std::to_string(label);
        case Kind::coherence: return "coh_" + ket.digits() + "_" + bra.digits();
        case Kind::purity: return "purity";
    }
    throw std::logic_error("corrupt ObservableRequest");
}

Eigen::VectorXd site_occupations(const SectorBasis& basis, const Eigen::VectorXcd& psi) {
    if (psi.size() != basis.dim())
        throw std::invalid_argument("site_occupations: vector does not match the basis");
    Eigen::VectorXd occ = Eigen::VectorXd::Zero(basis.L);
    for (int i = 0; i < basis.dim(); ++i) {
        const double w = std::norm(psi(i));
        if (w == 0.0) continue;
        const auto& n = basis.state(i).n;
        for (int l = 0; l < basis.L; ++l) occ(l) += w * n[l];
    }
    return occ;
}

Eigen::VectorXd site_occupations(const FockSpace& space, const Eigen::VectorXcd& psi) {
    if (psi.size() != space.dim())
        throw std::invalid_argument("site_occupations: vector does not match the space");
    Eigen::VectorXd occ = Eigen::VectorXd::Zero(space.L);
    for (int k = 0; k < space.n_sectors(); ++k) {
        const auto& sec = space.sector(k);
        occ += site_occupations(sec, psi.segment(space.offsets[k], sec.dim()));
    }
    return occ;
}

Eigen::VectorXd site_occupations(const DensityMatrix& rho) {
    const FockSpace& sp = rho.space();
    Eigen::VectorXd occ = Eigen::VectorXd::Zero(sp.L);
    for (const auto& [key, b] : rho.blocks()) {
        if (key.first != key.second) continue;
        const auto& basis = sp.sector(key.first);
        for (int i = 0; i < basis.dim(); ++i) {
            const double p = b(i, i).real();
            if (p == 0.0) continue;
            const auto& n = basis.state(i).n;
            for (int l = 0; l < basis.L; ++l) occ(l) += p * n[l];
        }
    }
    return occ;
}

std::vector<double> sector_populations(const DensityMatrix& rho) {
    const FockSpace& sp = rho.space();
    std::vector<double> P(sp.n_sectors(), 0.0);
    for (const auto& [key, b] : rho.blocks())
        if (key.first == key.second) P[key.first] = b.trace().real();
    return P;
}

std::map<int, double> manifold_populations(const DensityMatrix& rho) {
    const FockSpace& sp = rho.space();
    auto pops = zero_label_map(sp);
    for (const auto& [key, b] : rho.blocks()) {
        if (key.first != key.second) continue;
        const auto labels = manifold_labels(sp.sector(key.first));
        for (int i = 0; i < b.rows(); ++i) pops[labels[i]] += b(i, i).real();
    }
    return pops;
}

std::map<int, double> manifold_populations(const SectorBasis& basis, const Eigen::VectorXcd& psi) {
    if (psi.size() != basis.dim())
        throw std::invalid_argument("manifold_populations: vector does not match the basis");
    std::map<int, double> pops;
    const auto labels = manifold_labels(basis);
    for (int a : labels) pops.emplace(a, 0.0);
    for (int i = 0; i < basis.dim(); ++i) pops[labels[i]] += std::norm(psi(i));
    return pops;
}

double coherence_magnitude(const DensityMatrix& rho, const FockState& n, const FockState& m) {
    return std::abs(rho.element(n, m));
}

double evaluate(const ObservableRequest& req, const DensityMatrix& rho) {
    const FockSpace& sp = rho.space();
    switch (req.kind) {
        case ObservableRequest::Kind::occupation:
            if (req.site < 1 || req.site > sp.L)
                throw std::invalid_argument("occupation: site out of range");
            return site_occupations(rho)(req.site - 1);
        case ObservableRequest::Kind::sector_population: {
            const int k = sp.sector_of(req.sector);
            if (k < 0) throw std::invalid_argument("sector_population: sector absent from space");
            return sector_populations(rho)[k];
        }
        case ObservableRequest::Kind::manifold_population: {
            const auto pops = manifold_populations(rho);
            const auto it = pops.find(req.label);
            if (it == pops.end())
                throw std::invalid_argument("manifold_population: label absent from space");
            return it->second;
        }
        case ObservableRequest::Kind::coherence:
            return coherence_magnitude(rho, req.ket, req.bra);
        case ObservableRequest::Kind::purity:
            return rho.purity();
    }
    throw std::logic_error("corrupt ObservableRequest");
}

double evaluate(const ObservableRequest& req, const FockSpace& space, int k,
                const Eigen::VectorXcd& psi) {
    if (k < 0 || k >= space.n_sectors())
        throw std::invalid_argument("evaluate: sector index out of range");
    const SectorBasis& basis = space.sector(k);
    if (psi.size() != basis.dim())
        throw std::invalid_argument("evaluate: vector does not match the sector");
    switch (req.kind) {
        case ObservableRequest::Kind::occupation:
            if (req.site < 1 || req.site > space.L)
                throw std::invalid_argument("occupation: site out of range");
            return site_occupations(basis, psi)(req.site - 1);
        case ObservableRequest::Kind::sector_population:
            if (space.sector_of(req.sector) < 0)
                throw std::invalid_argument("sector_population: sector absent from space");
            return basis.N == req.sector ? psi.squaredNorm() : 0.0;
        case ObservableRequest::Kind::manifold_population: {
            auto pops = zero_label_map(space);
            if (pops.find(req.label) == pops.end())
                throw std::invalid_argument("manifold_population: label absent from space");
            for (const auto& [a, p] : manifold_populations(basis, psi)) pops[a] += p;
            return pops[req.label];
        }
        case ObservableRequest::Kind::coherence: {
            if (space.global_index(req.ket) < 0 || space.global_index(req.bra) < 0)
                throw std::invalid_argument("coherence: state outside the space");
            const int i = basis.find(req.ket);
            const int j = basis.find(req.bra);
            if (i < 0 || j < 0) return 0.0;
            return std::abs(psi(i)) * std::abs(psi(j));
        }
        case ObservableRequest::Kind::purity: {
            const double n2 = psi.squaredNorm();
            return n2 * n2;
        }
    }
    throw std::logic_error("corrupt ObservableRequest");
}

DecayFit extract_decay_rate(const std::vector<double>& t, const std::vector<double>& y) {
    if (t.size() != y.size()) throw std::invalid_argument("extract_decay_rate: size mismatch");
    if (t.size() < 10) throw std::invalid_argument("extract_decay_rate: need at least 10 points");
    double ymax = 0.0;
    for (double v : y) {
        if (!(v > 0.0)) throw std::invalid_argument("extract_decay_rate: data must be positive");
        ymax = std::max(ymax, v);
    }
    const double floor = ymax / 20.0;
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(y.size()); ++i)
        if (y[i] > floor) idx.push_back(i);
    if (idx.size() < 2)
        throw std::invalid_argument("extract_decay_rate: window has fewer than two points");

    std::vector<double> lg(idx.size());
    double tbar = 0.0, lbar = 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        lg[j] = std::log(y[idx[j]]);
        tbar += t[idx[j]];
        lbar += lg[j];
    }
    tbar /= static_cast<double>(idx.size());
    lbar /= static_cast<double>(idx.size());
    double stt = 0.0, stl = 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const double dt = t[idx[j]] - tbar;
        stt += dt * dt;
        stl += dt * (lg[j] - lbar);
    }
    if (stt == 0.0) throw std::invalid_argument("extract_decay_rate: degenerate time grid");
    const double slope = stl / stt;

    DecayFit fit;
    fit.rate = -slope;
    fit.amplitude = std::exp(lbar - slope * tbar);
    double ss = 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const double r = lg[j] - (lbar + slope * (t[idx[j]] - tbar));
        ss += r * r;
    }
    fit.log_residual = std::sqrt(ss / static_cast<double>(idx.size()));
    fit.first = idx.front();
    fit.last = idx.back();
    return fit;
}

}  // namespace bhc
