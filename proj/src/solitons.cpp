#include "nlsfam/solitons.hpp"

#include <cmath>

namespace nlsfam {

void SolitonFamily::validate() const {
    if (!(p > 5.0)) throw validation_error("exponent p must exceed 5");
    if (members.empty()) throw validation_error("soliton family must be non-empty");
    for (std::size_t j = 0; j < members.size(); ++j) {
        if (!(members[j].c > 0.0)) throw validation_error("soliton scale c must be positive");
        if (j > 0 && !(members[j].v > members[j - 1].v))
            throw validation_error("soliton velocities must be strictly increasing");
    }
}

double ground_state_value(double p, double c, double x) {
    const double s = 1.0 / std::cosh(0.5 * (p - 1.0) * std::sqrt(c) * x);
    return std::pow(c, 1.0 / (p - 1.0)) * std::pow(0.5 * (p + 1.0) * s * s, 1.0 / (p - 1.0));
}

ComplexField ground_state(double p, double c, const Grid& grid) {
    if (!(p > 5.0)) throw validation_error("exponent p must exceed 5");
    if (!(c > 0.0)) throw validation_error("soliton scale c must be positive");
    // Tail decay e^{-sqrt(c) |x|}; require the boundary value below ~1e-11 so
    // the periodic wrap is invisible at working tolerances.
    if (std::sqrt(c) * 0.5 * grid.length() < 25.0)
        throw validation_error("grid length too short for the ground-state tail");
    ComplexField out(grid);
    for (std::size_t i = 0; i < grid.points(); ++i)
        out[i] = cplx{ground_state_value(p, c, grid.x(i)), 0.0};
    return out;
}

ComplexField soliton(double t, const SolitonParams& s, double p, const Grid& grid) {
    ComplexField out(grid);
    for (std::size_t i = 0; i < grid.points(); ++i) {
        const double x = grid.x(i);
        const double amp = ground_state_value(p, s.c, frame_lambda(s, t, x));
        const double th = frame_theta(s, t, x);
        out[i] = cplx{amp * std::cos(th), amp * std::sin(th)};
    }
    return out;
}

ComplexField soliton_sum(double t, const SolitonFamily& fam, const Grid& grid) {
    fam.validate();
    ComplexField out(grid);
    for (const auto& s : fam.members) {
        const ComplexField one = soliton(t, s, fam.p, grid);
        for (std::size_t i = 0; i < grid.points(); ++i) out[i] += one[i];
    }
    return out;
}

ComplexField symmetry_translate(const ComplexField& u, double /*t0_shift*/, double x0_shift) {
    // Spatial shift via the Fourier multiplier e^{-i k x0}; the time shift is a
    // relabeling of the sample time handled by the caller.
    std::vector<cplx> hat;
    fft_forward(u.grid, u.values, hat);
    for (std::size_t m = 0; m < hat.size(); ++m) {
        const double ph = -u.grid.k(m) * x0_shift;
        hat[m] *= cplx{std::cos(ph), std::sin(ph)};
    }
    ComplexField out(u.grid);
    fft_inverse(u.grid, hat, out.values);
    return out;
}

ComplexField symmetry_phase(const ComplexField& u, double gamma0) {
    const cplx ph{std::cos(gamma0), std::sin(gamma0)};
    ComplexField out(u.grid);
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = ph * u[i];
    return out;
}

ComplexField symmetry_galilean(const ComplexField& u, double v0, double t) {
    // u -> e^{i(v0 x/2 - v0^2 t/4)} u(t, x - v0 t); the shift is spectral.
    ComplexField shifted = symmetry_translate(u, 0.0, v0 * t);
    for (std::size_t i = 0; i < shifted.size(); ++i) {
        const double ph = 0.5 * v0 * shifted.grid.x(i) - 0.25 * v0 * v0 * t;
        shifted[i] *= cplx{std::cos(ph), std::sin(ph)};
    }
    return shifted;
}

ComplexField symmetry_scale(const ComplexField& u, double lambda, double p, const Grid& target_grid) {
    if (!(lambda > 0.0)) throw validation_error("scaling parameter must be positive");
    // Evaluate the trigonometric interpolant of u at lambda * x for each target
    // sample, then multiply by lambda^{2/(p-1)}.
    std::vector<cplx> hat;
    fft_forward(u.grid, u.values, hat);
    const double amp = std::pow(lambda, 2.0 / (p - 1.0));
    const double inv_m = 1.0 / static_cast<double>(u.size());
    ComplexField out(target_grid);
    // DFT phases are relative to the first sample, so shift by -x(0) = L/2.
    for (std::size_t i = 0; i < target_grid.points(); ++i) {
        const double xs = lambda * target_grid.x(i) - u.grid.x(0);
        cplx acc{0.0, 0.0};
        for (std::size_t m = 0; m < hat.size(); ++m) {
            const double ph = u.grid.k(m) * xs;
            acc += hat[m] * cplx{std::cos(ph), std::sin(ph)};
        }
        out[i] = amp * inv_m * acc;
    }
    return out;
}

ConservedTriple conserved(const ComplexField& u, double p) {
    ConservedTriple out;
    const ComplexField ux = spectral_derivative(u, 1);
    const double dx = u.grid.dx();
    double mass = 0.0, kin = 0.0, pot = 0.0, mom = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double n2 = std::norm(u[i]);
        mass += n2;
        kin += std::norm(ux[i]);
        pot += std::pow(n2, 0.5 * (p + 1.0));
        // Im(u_x bar u)
        mom += ux[i].imag() * u[i].real() - ux[i].real() * u[i].imag();
    }
    out.mass = mass * dx;
    out.energy = (0.5 * kin - pot / (p + 1.0)) * dx;
    out.momentum = mom * dx;
    return out;
}

}  // namespace nlsfam
