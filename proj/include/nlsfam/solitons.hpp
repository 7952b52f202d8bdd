#pragma once

#include <vector>

#include "nlsfam/grid.hpp"

namespace nlsfam {

// Parameters (c_j, v_j, gamma_j, x_j) of one traveling soliton.
struct SolitonParams {
    double c = 1.0;
    double v = 0.0;
    double gamma = 0.0;
    double x0 = 0.0;
};

struct SolitonFamily {
    double p = 7.0;
    std::vector<SolitonParams> members;

    void validate() const;  // p > 5, c > 0, velocities strictly increasing
    std::size_t size() const { return members.size(); }
};

struct ConservedTriple {
    double mass = 0.0;
    double energy = 0.0;
    double momentum = 0.0;
};

// Moving-frame coordinates of soliton j.
inline double frame_lambda(const SolitonParams& s, double t, double x) {
    return x - s.v * t - s.x0;
}
inline double frame_theta(const SolitonParams& s, double t, double x) {
    return 0.5 * s.v * x - 0.25 * s.v * s.v * t + s.c * t + s.gamma;
}

// Closed-form ground state Q(x) = [ (p+1)/2 sech^2( (p-1)/2 x ) ]^{1/(p-1)} and
// the scaling Q_c(x) = c^{1/(p-1)} Q(sqrt(c) x).
double ground_state_value(double p, double c, double x);

// Q_c sampled on the grid; rejects p <= 5, c <= 0, or a grid too short for the tail.
ComplexField ground_state(double p, double c, const Grid& grid);

// R_j(t,x) = Q_{c_j}(lambda_j) e^{i theta_j}.
ComplexField soliton(double t, const SolitonParams& s, double p, const Grid& grid);

// R(t) = sum_j R_j(t).
ComplexField soliton_sum(double t, const SolitonFamily& fam, const Grid& grid);

// NLS symmetries applied to a field sample at time t.
ComplexField symmetry_translate(const ComplexField& u, double t0_shift, double x0_shift);
ComplexField symmetry_phase(const ComplexField& u, double gamma0);
ComplexField symmetry_galilean(const ComplexField& u, double v0, double t);
// Scaling lambda^{2/(p-1)} u(lambda^2 t, lambda x); resampled onto target_grid by
// trigonometric interpolation (the caller supplies the target domain).
ComplexField symmetry_scale(const ComplexField& u, double lambda, double p, const Grid& target_grid);

ConservedTriple conserved(const ComplexField& u, double p);

}  // namespace nlsfam
