#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "bhc/density.hpp"
#include "bhc/fock.hpp"

namespace bhc {

// One column of a time-series output. The text form doubles as the CSV
// header name:
//   n_3              site occupation <n_3>, 1-based site index
//   P_N2             population of the N = 2 number sector
//   P_a-3            population of the anharmonicity manifold a = -3
//   coh_0300_0030    |<0300| rho |0030>|
//   purity           Tr rho^2
struct ObservableRequest {
    enum class Kind { occupation, sector_population, manifold_population, coherence, purity };

    Kind kind = Kind::purity;
    int site = 0;    // occupation (1-based)
    int sector = 0;  // sector_population (total boson number)
    int label = 0;   // manifold_population (non-positive)
    FockState ket;   // coherence |<ket| rho |bra>|
    FockState bra;

    static ObservableRequest parse(const std::string& name);
    std::string name() const;
};

// <n_l> per site. Pure states may live in one number sector or span the
// whole space; the vector length must match the basis dimension.
Eigen::VectorXd site_occupations(const SectorBasis& basis, const Eigen::VectorXcd& psi);
Eigen::VectorXd site_occupations(const FockSpace& space, const Eigen::VectorXcd& psi);
Eigen::VectorXd site_occupations(const DensityMatrix& rho);

// Tr(rho P_N) for every sector of the space, ascending in N like
// space.sectors.
std::vector<double> sector_populations(const DensityMatrix& rho);

// Tr(rho Pi_a) keyed by manifold label a. Every label the space supports
// appears in the map, so unpopulated manifolds report an explicit zero.
std::map<int, double> manifold_populations(const DensityMatrix& rho);
std::map<int, double> manifold_populations(const SectorBasis& basis, const Eigen::VectorXcd& psi);

// |<n| rho |m>|.
double coherence_magnitude(const DensityMatrix& rho, const FockState& n, const FockState& m);

// Evaluate one request against a density matrix, or against the pure
// state rho = |psi><psi| with psi living in sector k of the space.
double evaluate(const ObservableRequest& req, const DensityMatrix& rho);
double evaluate(const ObservableRequest& req, const FockSpace& space, int k,
                const Eigen::VectorXcd& psi);

// Least-squares fit of log y against t, restricted to the window
// y > max(y)/20 so a noise floor cannot bias the slope. `first`/`last`
// are the fitted index range (inclusive).
struct DecayFit {
    double rate = 0.0;          // y ~ amplitude * exp(-rate * t)
    double amplitude = 0.0;
    double log_residual = 0.0;  // rms residual of log y over the window
    int first = 0;
    int last = 0;
};

DecayFit extract_decay_rate(const std::vector<double>& t, const std::vector<double>& y);

}  // namespace bhc
