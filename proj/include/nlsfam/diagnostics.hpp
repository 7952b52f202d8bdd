#pragma once

#include <cstddef>
#include <vector>

#include "nlsfam/construct.hpp"
#include "nlsfam/grid.hpp"
#include "nlsfam/solitons.hpp"

namespace nlsfam {

// Smooth step: 0 for x <= -1, 1 for x >= 1, normalized bump integral between.
double bump_psi(double x);
double bump_c0();  // normalization constant, cached

// Localizing partition along the soliton midlines at time t.
struct CutoffSet {
    Grid grid{1.0, 16};
    double t = 0.0;
    std::vector<std::vector<double>> psi;  // N profiles, psi[0] == 1
    std::vector<std::vector<double>> phi;  // N profiles, phi_k = psi_k - psi_{k+1}
    std::vector<double> h1, h2;
    std::vector<double> m;  // N-1 midlines
};

CutoffSet cutoffs(double t, const SolitonFamily& fam, const Grid& grid);

// Measured sup of LHS / (majorant with C = 1) for the four localization
// inequality families; meant for monotone-decrease comparisons across t.
struct CutoffBoundsReport {
    double diag = 0.0;      // (|R_k|+|R_kx|)|phi_k - 1| vs e^{-4g t} e^{-sqrt(s0)|x-v_k t|}
    double offdiag = 0.0;   // (|R_k|+|R_kx|) phi_l, l != k, same majorant
    double deriv = 0.0;     // (||phi_kx|| + ||phi_kxx|| + ||phi_kt||) vs 1/sqrt(t)
    double h_local = 0.0;   // (|h1 - c_k - v_k^2/4| + |h2 - v_k|)(|R_k|+|R_kx|), same majorant
};

CutoffBoundsReport cutoff_bounds_report(double t, const SolitonFamily& fam, const Grid& grid,
                                        const InteractionScales& scales);

// alpha_k^{+-}(t) = Im int conj(z(t)) Y_k^{+-}(t) per snapshot, with
// z = u - phi - A_j e^{-e_j t} Y_j^+.
struct ProjectionSeries {
    std::vector<double> times;
    std::vector<std::vector<double>> alpha_plus;   // [snapshot][k]
    std::vector<std::vector<double>> alpha_minus;  // [snapshot][k]
};

ProjectionSeries projections(const Trajectory& u_traj, const Trajectory& phi_traj,
                             const ShootingProblem& prob, const ModeSet& modes);

// Centered-difference d alpha/dt -/+ e_k alpha on the interior snapshots;
// sign = +1 for the alpha^+ law, -1 for alpha^-.
struct ModulationReport {
    std::vector<double> times;
    std::vector<std::vector<double>> residual;  // [snapshot][k]
};

ModulationReport modulation_residual(const std::vector<double>& times,
                                     const std::vector<std::vector<double>>& alpha,
                                     const std::vector<double>& ek, int sign);

// Localized energy functional: quadratic gradient/localization terms plus the
// exact first-order Taylor remainder of the potential term at z = 0.
double weinstein_H(const ComplexField& z, const ComplexField& phi, const ComplexField& rj,
                   const CutoffSet& cutoff, double p);

// The localized quadratic form around R(t).
double quadratic_form(const ComplexField& z, double t, const SolitonFamily& fam,
                      const CutoffSet& cutoff, double p);

struct TildeDecomposition {
    ComplexField ztilde;
    std::vector<double> beta;
    std::vector<double> gamma_par;
};

TildeDecomposition tilde_decomposition(const ComplexField& z, double t, const SolitonFamily& fam);

// quadratic_form[ztilde] - quadratic_form[z], to be compared with C/sqrt(t) ||z||^2.
double form_comparison(const ComplexField& z, const ComplexField& ztilde, double t,
                       const SolitonFamily& fam, const CutoffSet& cutoff, double p);

struct EnergyReport {
    double H = 0.0;
    double Hform_z = 0.0;
    double Hform_ztilde = 0.0;
    std::vector<double> beta;
    std::vector<double> gamma_par;
};

EnergyReport energy_report(const ComplexField& z, const ComplexField& phi, const ComplexField& rj,
                           double t, const SolitonFamily& fam, const CutoffSet& cutoff, double p);

// Source term of the z-equation, assembled by both algebraic forms; they agree
// to the eigenrelation's accuracy.
struct OmegaReport {
    double omega_h1 = 0.0;
    double form_diff_linf = 0.0;  // pointwise gap between the two forms
};

OmegaReport omega_source(double t, const ComplexField& phi, const ShootingProblem& prob,
                         const ModeSet& modes);

// || i phi_xx + i |phi|^{p-1} phi + h2 phi_x - i h1 phi ||_{H^-1}; the time
// derivative is eliminated through the equation, so no differencing is needed.
double transport_residual(const ComplexField& phi, const CutoffSet& cutoff, double p);

// Centered-difference dH/dt against the unit-constant three-term majorant
// z^2/sqrt(t) + e^{-(e_j+4 gamma) t} z + z^3.
struct DHdtReport {
    std::vector<double> times;
    std::vector<double> dHdt;
    std::vector<double> majorant_unit;
    double max_ratio = 0.0;
};

DHdtReport dhdt_check(const std::vector<double>& times, const std::vector<double>& H,
                      const std::vector<double>& znorm, double ej, double gamma);

// Log-linear decay fit with values floored at 1e-14.
AmplitudeFit fit_rate(const std::vector<double>& times, const std::vector<double>& values);

}  // namespace nlsfam
