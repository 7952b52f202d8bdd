#pragma once

#include <utility>
#include <vector>

#include "nlsfam/grid.hpp"
#include "nlsfam/solitons.hpp"

namespace nlsfam {

// -d^2/dx^2 + c - potential(x), applied spectrally; acts componentwise on the
// real and imaginary parts (real-linear).
struct SchrodingerOperator {
    Grid grid;
    double c = 1.0;
    std::vector<double> potential;

    ComplexField apply(const ComplexField& v) const;
};

// (L_{c+}, L_{c-}) around Q_c: potentials p Q_c^{p-1} and Q_c^{p-1}.
std::pair<SchrodingerOperator, SchrodingerOperator> assemble_operators(double p, double c,
                                                                       const Grid& grid);

// Unstable eigenpair of the linearization at c = 1: L+ Y1 = e0 Y2, L- Y2 = -e0 Y1,
// normalized to -2 int Y1 Y2 = 1 with Y1(0) > 0.
struct LinearizedSpectrum {
    double e0 = 0.0;
    ComplexField Y1;  // real profile (Re Y+)
    ComplexField Y2;  // real profile (Im Y+)
    double eta0 = 0.0;  // measured exponential decay rate of |Y+|
    double p = 0.0;
    Grid grid;
};

// c-rescaled mode per e_c = c^{3/2} e0, Yc+(x) = c^{1/4} Y+(sqrt(c) x).
struct ScaledMode {
    double c = 1.0;
    double e_c = 0.0;
    ComplexField Yc_plus;
    ComplexField Yc_minus;
};

// Trigonometric interpolant of a grid sample, clamped to zero beyond
// clamp_frac * L from the center so that off-grid evaluation of an
// exponentially localized profile never wraps around the period.
struct TrigSeries {
    Grid grid;
    std::vector<cplx> coeff;  // forward FFT / M
    double clamp_frac = 0.45;

    explicit TrigSeries(const ComplexField& f);
    cplx eval(double x) const;
    void eval_many(const std::vector<double>& pts, std::vector<cplx>& out) const;
};

// Primary solver: coarse dense eigensolve seeds a shifted inverse power
// iteration on L- L+ with a Fourier preconditioner; tol bounds the combined
// eigenrelation residual ||L+ Y1 - e0 Y2|| + ||L- Y2 + e0 Y1||.
LinearizedSpectrum compute_eigenmode(double p, const Grid& grid, double tol = 1e-9);

// Cross-check: dense eigensolve of L- L+ (grid.points() <= 1024).
// Returns (e0, Y1, Y2) with the same normalization.
LinearizedSpectrum compute_eigenmode_dense(double p, const Grid& grid);

// Most-unstable eigenvalue e_c of L_{c-} L_{c+} by dense eigensolve; the grid
// is shared across c values so the scaling-law comparison is independent.
double dense_eigenvalue_at(double p, double c, const Grid& grid);

// Cross-check: ODE shooting on the coupled system using the decaying
// asymptotic modes mu = sqrt(1 -+ i e0) and even-symmetry matching at x = 0.
// Returns e0 only.
double compute_eigenmode_shooting(double p, double tol = 1e-10, double e0_guess = 0.0);

// Rescale onto the target grid by trigonometric interpolation.
ScaledMode scaled_mode(const LinearizedSpectrum& spec, double c, const Grid& grid);

// Y_j^{+/-}(t,x) = Y_{c}^{+/-}(lambda_j(t,x)) e^{i theta_j(t,x)} sampled on grid;
// sign = +1 or -1. y1s/y2s are TrigSeries of spec.Y1/Y2 (built once by the caller).
ComplexField mode_field(const TrigSeries& y1s, const TrigSeries& y2s, double c, double e0,
                        int sign, const SolitonParams& s, double t, const Grid& grid);

// Fitted exponential tail rate of |f|: bin maxima (envelope) of |f| in the
// region 1e-12 peak < |f| < 1e-2 peak on both sides, log-linear fit.
// Throws numeric_error when no exponential tail is present.
double decay_rate(const ComplexField& f);

struct CoercivityReport {
    double quadratic = 0.0;      // (L+ v1, v1) + (L- v2, v2)
    double proj_dxq = 0.0;       // int dQ/dx * v1
    double proj_q = 0.0;         // int Q * v2
    double proj_yplus = 0.0;     // Im int Y+ bar(v)
    double proj_yminus = 0.0;    // Im int Y- bar(v)
};

CoercivityReport coercivity_check(const ComplexField& v, const LinearizedSpectrum& spec);

}  // namespace nlsfam
