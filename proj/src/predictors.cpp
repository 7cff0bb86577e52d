#include "bhc/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "bhc/linalg.hpp"
#include "bhc/operators.hpp"

namespace bhc {

namespace {

double binom(int n, int k) {
    double b = 1.0;
    for (int i = 0; i < k; ++i) b = b * (n - i) / (i + 1);
    return b;
}

double quad_weight(const FockState& n, const FockState& m, const std::vector<double>& kappa) {
    double s = 0.0;
    for (size_t l = 0; l < kappa.size(); ++l) {
        const double d = n.n[l] - m.n[l];
        s += kappa[l] * d * d;
    }
    return s;
}

}  // namespace

int PopulationSeries::label_index(int label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

PopulationSeries sector_populations(int N_max, double gamma, const std::vector<double>& t_grid) {
    if (N_max < 0 || gamma < 0.0)
        throw std::invalid_argument("sector_populations: need N_max >= 0 and gamma >= 0");
    PopulationSeries s;
    s.t = t_grid;
    for (int N = 0; N <= N_max; ++N) s.labels.push_back(N);
    s.P.resize(t_grid.size(), N_max + 1);
    for (size_t k = 0; k < t_grid.size(); ++k) {
        const double q = std::exp(-gamma * t_grid[k]);
        for (int N = 0; N <= N_max; ++N)
            s.P(k, N) = binom(N_max, N) * std::pow(q, N) * std::pow(1.0 - q, N_max - N);
    }
    return s;
}

double dissipative_decoherence_rate(const FockState& n, const FockState& m,
                                    const std::vector<double>& gamma) {
    if (n.sites() != m.sites() || static_cast<size_t>(n.sites()) != gamma.size())
        throw std::invalid_argument("dissipative_decoherence_rate: length mismatch");
    double s = 0.0;
    for (size_t l = 0; l < gamma.size(); ++l) s += gamma[l] * (n.n[l] + m.n[l]);
    return 0.5 * s;
}

double dephasing_decoherence_rate(const FockState& n, const FockState& m,
                                  const std::vector<double>& kappa) {
    if (n.sites() != m.sites() || static_cast<size_t>(n.sites()) != kappa.size())
        throw std::invalid_argument("dephasing_decoherence_rate: length mismatch");
    return 0.5 * quad_weight(n, m, kappa);
}

double state_leak_rate(const FockState& n, int b, const SectorBasis& basis,
                       const SparseOperator& H_J, const std::vector<double>& kappa, double U) {
    const int a = n.anharmonicity();
    if (a == b) throw std::invalid_argument("state_leak_rate: state already in target manifold");
    if (U == 0.0) throw std::invalid_argument("state_leak_rate: U must be nonzero");
    const int row = basis.find(n);
    if (row < 0) throw std::invalid_argument("state_leak_rate: state not in basis");
    const auto labels = manifold_labels(basis);
    double num = 0.0;
    H_J.for_each([&](int r, int c, std::complex<double> v) {
        if (r != row || labels[c] != b) return;
        num += quad_weight(basis.state(r), basis.state(c), kappa) * std::norm(v);
    });
    const double gap = U * (a - b);
    return num / (gap * gap);
}

double manifold_rate_general(int a, int b, const SectorBasis& basis, const SparseOperator& H_J,
                             const std::vector<double>& kappa, double U) {
    if (a == b) throw std::invalid_argument("manifold_rate_general: manifolds must differ");
    if (U == 0.0) throw std::invalid_argument("manifold_rate_general: U must be nonzero");
    const auto labels = manifold_labels(basis);
    int dim_a = 0;
    bool seen_b = false;
    for (const int l : labels) {
        dim_a += l == a;
        seen_b = seen_b || l == b;
    }
    if (dim_a == 0 || !seen_b)
        throw std::invalid_argument("manifold_rate_general: manifold absent from basis");
    double num = 0.0;
    H_J.for_each([&](int r, int c, std::complex<double> v) {
        if (labels[r] != a || labels[c] != b) return;
        num += quad_weight(basis.state(r), basis.state(c), kappa) * std::norm(v);
    });
    const double gap = U * (a - b);
    return num / (dim_a * gap * gap);
}

double manifold_rate_closed(RateKind kind, int L, int N, double J, double U, double kappa) {
    if (L < 2) throw std::invalid_argument("manifold_rate_closed: need at least two sites");
    if (U == 0.0) throw std::invalid_argument("manifold_rate_closed: U must be nonzero");
    const double x = 4.0 * kappa * (J / U) * (J / U);
    switch (kind) {
        case RateKind::stack_shed:
            if (N < 2) throw std::invalid_argument("stack_shed: needs N >= 2");
            return x * (L - 1.0) / L * N / ((N - 1.0) * (N - 1.0));
        case RateKind::stack_heal:
            if (N < 3) throw std::invalid_argument("stack_heal: needs N >= 3");
            return x * N / (L * (N - 1.0) * (N - 1.0));
        case RateKind::pair_formation:
            if (N < 4)
                throw std::invalid_argument(
                    "pair_formation: needs N >= 4 (degenerate manifolds below)");
            return 2.0 * x * (N - 1.0) / (L * (N - 3.0) * (N - 3.0));
        case RateKind::second_shed:
            if (N < 3) throw std::invalid_argument("second_shed: needs N >= 3");
            if (L < 3)
                throw std::invalid_argument(
                    "second_shed: needs L >= 3 (target spreads over three sites)");
            return x * (L - 2.0) / L * (N - 1.0) / ((N - 2.0) * (N - 2.0));
        case RateKind::hardcore_leak:
            if (N > L) throw std::invalid_argument("hardcore_leak: needs N <= L");
            if (N < 2) return 0.0;
            return 2.0 * x * N * (N - 1.0) / L;
    }
    throw std::logic_error("manifold_rate_closed: unknown kind");
}

RateMatrix rate_matrix_from_basis(const SectorBasis& basis, const SparseOperator& H_J,
                                  const std::vector<double>& kappa, double U) {
    if (U == 0.0) throw std::invalid_argument("rate_matrix_from_basis: U must be nonzero");
    const auto labels = manifold_labels(basis);
    std::map<int, int> dim;
    for (const int l : labels) ++dim[l];

    RateMatrix rm;
    std::map<int, int> pos;
    for (const auto& [l, d] : dim) {
        pos[l] = static_cast<int>(rm.labels.size());
        rm.labels.push_back(l);
        rm.dims.push_back(d);
    }
    const int M = static_cast<int>(rm.labels.size());
    Eigen::MatrixXd num = Eigen::MatrixXd::Zero(M, M);
    H_J.for_each([&](int r, int c, std::complex<double> v) {
        const int a = labels[r];
        const int b = labels[c];
        if (a == b) return;
        num(pos[a], pos[b]) += quad_weight(basis.state(r), basis.state(c), kappa) * std::norm(v);
    });
    rm.gamma.resize(M, M);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) {
            if (i == j) {
                rm.gamma(i, j) = 0.0;
                continue;
            }
            const double gap = U * (rm.labels[i] - rm.labels[j]);
            rm.gamma(i, j) = num(i, j) / (rm.dims[i] * gap * gap);
        }
    return rm;
}

PopulationSeries solve_rate_equations(const RateMatrix& rm, const std::vector<double>& P0,
                                      const std::vector<double>& t_grid) {
    const int M = static_cast<int>(rm.labels.size());
    if (static_cast<int>(P0.size()) != M)
        throw std::invalid_argument("solve_rate_equations: population/label size mismatch");
    double tot = 0.0;
    for (const double p : P0) {
        if (p < 0.0) throw std::invalid_argument("solve_rate_equations: negative population");
        tot += p;
    }
    if (std::abs(tot - 1.0) > 1e-8)
        throw std::invalid_argument("solve_rate_equations: populations must sum to one");

    // Generator on per-state weights.
    Eigen::MatrixXd Mw = rm.gamma;
    for (int i = 0; i < M; ++i) Mw(i, i) = -rm.gamma.row(i).sum();
    Eigen::VectorXd w0(M);
    for (int i = 0; i < M; ++i) w0(i) = P0[i] / rm.dims[i];

    PopulationSeries s;
    s.t = t_grid;
    s.labels = rm.labels;
    s.P.resize(t_grid.size(), M);
    for (size_t k = 0; k < t_grid.size(); ++k) {
        const Eigen::MatrixXcd E = linalg::expm((Mw * t_grid[k]).cast<std::complex<double>>());
        const Eigen::VectorXd w = (E.real() * w0).eval();
        for (int i = 0; i < M; ++i) s.P(k, i) = w(i) * rm.dims[i];
    }
    return s;
}

EffectiveFrequencies effective_frequencies(int N, double J, double U) {
    if (N < 1 || U <= 0.0)
        throw std::invalid_argument("effective_frequencies: need N >= 1 and U > 0");
    double fact = 1.0;
    for (int i = 2; i < N; ++i) fact *= i;
    EffectiveFrequencies f;
    f.J_stack = J * (N / fact) * std::pow(J / U, N - 1);
    f.Xi = 0.75 * J * (J / U);
    return f;
}

Eigen::VectorXcd perturbed_stack_state(int site, int N, double J, double U,
                                       const SectorBasis& basis) {
    if (N < 2) throw std::invalid_argument("perturbed_stack_state: needs N >= 2");
    if (site < 1 || site > basis.L)
        throw std::invalid_argument("perturbed_stack_state: site out of range");
    if (basis.N != N || basis.d_max < N)
        throw std::invalid_argument("perturbed_stack_state: basis does not hold the stack");
    std::vector<int> occ(basis.L, 0);
    occ[site - 1] = N;
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(basis.dim());
    psi(basis.find(FockState(occ))) = 1.0;
    const double c = -J * std::sqrt(static_cast<double>(N)) / (U * (N - 1));
    for (const int k : {site - 1, site + 1}) {
        if (k < 1 || k > basis.L) continue;
        std::vector<int> adm(basis.L, 0);
        adm[site - 1] = N - 1;
        adm[k - 1] = 1;
        psi(basis.find(FockState(adm))) = c;
    }
    psi.normalize();
    return psi;
}

}  // namespace bhc
