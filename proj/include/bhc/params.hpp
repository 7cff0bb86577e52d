#pragma once

#include <string>
#include <vector>

namespace bhc {

// Everything internal is an angular rate in rad/us (hbar = 1); times are in
// microseconds. Interfaces quote frequencies as f = omega/2pi in MHz or kHz,
// converted on entry with these helpers.
inline constexpr double two_pi = 6.283185307179586476925286766559;
inline double rad_per_us_from_MHz(double f_over_2pi_MHz) { return two_pi * f_over_2pi_MHz; }
inline double rad_per_us_from_kHz(double f_over_2pi_kHz) { return two_pi * f_over_2pi_kHz * 1e-3; }

// Diagonal dephasing collapse operator family. The default couples to the
// boson number n_l. The exponential variant has eigenvalue exp[a_l (n - 1)]
// on occupation n >= 1 and annihilates empty sites; it models stronger (or
// weaker) sensitivity of higher levels while staying diagonal.
struct DephasingModel {
    bool exponential = false;
    std::vector<double> a;  // per site, used only by the exponential variant

    double weight(int site, int n) const;
};

struct ModelParams {
    std::vector<double> omega;  // site frequency, rad/us
    std::vector<double> U;      // on-site attraction, rad/us (positive)
    std::vector<double> J;      // bond hopping, rad/us, length L-1
    std::vector<double> gamma;  // boson loss rate, 1/us
    std::vector<double> kappa;  // dephasing rate, 1/us
    bool rotating_frame = true;
    DephasingModel dephasing;

    int L() const { return static_cast<int>(omega.size()); }
    void validate() const;

    // Uniform chain; omega = 0 (pure rotating-frame description).
    static ModelParams uniform(int L, double U, double J, double gamma, double kappa);
};

}  // namespace bhc
