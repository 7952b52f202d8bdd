#include "nlsfam/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

namespace nlsfam {

namespace {

double bump_integrand(double y) {
    const double s = 1.0 - y * y;
    if (s <= 0.0) return 0.0;
    return std::exp(-1.0 / s);
}

double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(double a, double b, double fa, double fm, double fb, double whole,
                        double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = bump_integrand(lm), frm = bump_integrand(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double bump_integral(double a, double b, double tol) {
    if (b <= a) return 0.0;
    const double fa = bump_integrand(a), fb = bump_integrand(b);
    const double fm = bump_integrand(0.5 * (a + b));
    return adaptive_simpson(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 40);
}

// Q_{c}'(x) = -sqrt(c) Q_c(x) tanh((p-1)/2 sqrt(c) x)
double ground_state_derivative(double p, double c, double x) {
    const double rc = std::sqrt(c);
    return -rc * ground_state_value(p, c, x) * std::tanh(0.5 * (p - 1.0) * rc * x);
}

double integral(const ComplexField& f, const ComplexField& g, bool imag_part) {
    return imag_part ? inner_imag(f, g) : inner_real(f, g);
}

}  // namespace

double bump_c0() {
    static double c0 = 0.0;
    static std::once_flag once;
    std::call_once(once, [] { c0 = bump_integral(-1.0, 1.0, 1e-13); });
    return c0;
}

double bump_psi(double x) {
    if (x <= -1.0) return 0.0;
    if (x >= 1.0) return 1.0;
    // quadrature roundoff can overshoot 1 by ~1e-16 near x = 1
    return std::min(1.0, bump_integral(-1.0, x, 1e-14) / bump_c0());
}

CutoffSet cutoffs(double t, const SolitonFamily& fam, const Grid& grid) {
    if (!(t > 0.0)) throw validation_error("cutoffs require t > 0");
    fam.validate();
    const std::size_t N = fam.members.size();
    const std::size_t M = grid.points();
    CutoffSet out;
    out.grid = grid;
    out.t = t;
    out.psi.assign(N, std::vector<double>(M, 0.0));
    out.phi.assign(N, std::vector<double>(M, 0.0));
    out.h1.assign(M, 0.0);
    out.h2.assign(M, 0.0);
    const double rt = std::sqrt(t);
    for (std::size_t k = 1; k < N; ++k) {
        const auto& a = fam.members[k - 1];
        const auto& b = fam.members[k];
        out.m.push_back(0.5 * ((b.v + a.v) * t + b.x0 + a.x0));
    }
    for (std::size_t i = 0; i < M; ++i) out.psi[0][i] = 1.0;
    for (std::size_t k = 1; k < N; ++k)
        for (std::size_t i = 0; i < M; ++i)
            out.psi[k][i] = bump_psi((grid.x(i) - out.m[k - 1]) / rt);
    for (std::size_t k = 0; k < N; ++k)
        for (std::size_t i = 0; i < M; ++i)
            out.phi[k][i] = (k + 1 < N) ? out.psi[k][i] - out.psi[k + 1][i] : out.psi[k][i];
    for (std::size_t k = 0; k < N; ++k) {
        const auto& s = fam.members[k];
        const double w1 = s.c + 0.25 * s.v * s.v;
        for (std::size_t i = 0; i < M; ++i) {
            out.h1[i] += w1 * out.phi[k][i];
            out.h2[i] += s.v * out.phi[k][i];
        }
    }
    return out;
}

CutoffBoundsReport cutoff_bounds_report(double t, const SolitonFamily& fam, const Grid& grid,
                                        const InteractionScales& scales) {
    const CutoffSet cs = cutoffs(t, fam, grid);
    const std::size_t N = fam.members.size();
    const std::size_t M = grid.points();
    const double rs0 = std::sqrt(scales.sigma0);
    const double decay = std::exp(-4.0 * scales.gamma * t);
    CutoffBoundsReport rep;

    // soliton envelope |R_k| + |R_kx| = sqrt(Q^2) + sqrt(Q'^2 + v^2 Q^2 / 4)
    auto envelope = [&](std::size_t k, double x) {
        const auto& s = fam.members[k];
        const double lam = x - s.v * t - s.x0;
        const double q = ground_state_value(fam.p, s.c, lam);
        const double qp = ground_state_derivative(fam.p, s.c, lam);
        return q + std::sqrt(qp * qp + 0.25 * s.v * s.v * q * q);
    };

    for (std::size_t k = 0; k < N; ++k) {
        const double vk = fam.members[k].v;
        const double w1k = fam.members[k].c + 0.25 * vk * vk;
        for (std::size_t i = 0; i < M; ++i) {
            const double x = grid.x(i);
            const double env = envelope(k, x);
            const double maj = decay * std::exp(-rs0 * std::abs(x - vk * t));
            if (maj < 1e-300) continue;
            rep.diag = std::max(rep.diag, env * std::abs(cs.phi[k][i] - 1.0) / maj);
            for (std::size_t l = 0; l < N; ++l)
                if (l != k) rep.offdiag = std::max(rep.offdiag, env * cs.phi[l][i] / maj);
            const double hloc = std::abs(cs.h1[i] - w1k) + std::abs(cs.h2[i] - vk);
            rep.h_local = std::max(rep.h_local, hloc * env / maj);
        }
    }

    // derivative bounds, analytic in the bump variable y = (x - m)/sqrt(t)
    // (the cutoffs are not periodic on the box, so spectral differentiation
    // would be dominated by the jump at the domain edge)
    const double rt = std::sqrt(t);
    const double c0 = bump_c0();
    auto dpsi = [&](std::size_t k, double x, double& px, double& pxx, double& pt) {
        // psi_k for k >= 1; psi_0 == 1 has zero derivatives
        px = pxx = pt = 0.0;
        if (k == 0) return;
        const auto& a = fam.members[k - 1];
        const auto& b = fam.members[k];
        const double vbar = 0.5 * (a.v + b.v);
        const double m0 = 0.5 * ((b.v + a.v) * t + b.x0 + a.x0);
        const double y = (x - m0) / rt;
        const double s = 1.0 - y * y;
        if (s <= 0.0) return;
        const double d1 = std::exp(-1.0 / s) / c0;              // psi'(y)
        const double d2 = d1 * (-2.0 * y / (s * s));            // psi''(y)
        px = d1 / rt;
        pxx = d2 / t;
        pt = d1 * (-vbar / rt - 0.5 * y / t);
    };
    for (std::size_t k = 0; k < N; ++k) {
        double sx = 0.0, sxx = 0.0, st = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            const double x = grid.x(i);
            double ax, axx, at, bx, bxx, bt;
            dpsi(k, x, ax, axx, at);
            if (k + 1 < N)
                dpsi(k + 1, x, bx, bxx, bt);
            else
                bx = bxx = bt = 0.0;
            sx = std::max(sx, std::abs(ax - bx));
            sxx = std::max(sxx, std::abs(axx - bxx));
            st = std::max(st, std::abs(at - bt));
        }
        rep.deriv = std::max(rep.deriv, (sx + sxx + st) * std::sqrt(t));
    }
    return rep;
}

ProjectionSeries projections(const Trajectory& u_traj, const Trajectory& phi_traj,
                             const ShootingProblem& prob, const ModeSet& modes) {
    if (u_traj.times.size() != phi_traj.times.size())
        throw validation_error("trajectory snapshot counts differ");
    const std::size_t N = prob.family.members.size();
    ProjectionSeries out;
    for (std::size_t i = 0; i < u_traj.times.size(); ++i) {
        const double t = u_traj.times[i];
        if (std::abs(t - phi_traj.times[i]) > 1e-9)
            throw validation_error("trajectory snapshot times differ");
        ComplexField z = u_traj.snapshots[i];
        for (std::size_t q = 0; q < z.size(); ++q) z[q] -= phi_traj.snapshots[i][q];
        if (prob.j < N && prob.A_j != 0.0) {
            const ComplexField yj = modes.plus(prob.j, t, z.grid);
            const double amp = prob.A_j * std::exp(-modes.e(prob.j) * t);
            for (std::size_t q = 0; q < z.size(); ++q) z[q] -= amp * yj[q];
        }
        std::vector<double> ap(N), am(N);
        for (std::size_t k = 0; k < N; ++k) {
            ap[k] = inner_imag(z, modes.plus(k, t, z.grid));
            am[k] = inner_imag(z, modes.minus(k, t, z.grid));
        }
        out.times.push_back(t);
        out.alpha_plus.push_back(std::move(ap));
        out.alpha_minus.push_back(std::move(am));
    }
    return out;
}

ModulationReport modulation_residual(const std::vector<double>& times,
                                     const std::vector<std::vector<double>>& alpha,
                                     const std::vector<double>& ek, int sign) {
    if (times.size() != alpha.size() || times.size() < 3)
        throw validation_error("modulation residual needs >= 3 matched snapshots");
    ModulationReport out;
    for (std::size_t i = 1; i + 1 < times.size(); ++i) {
        const double dt2 = times[i + 1] - times[i - 1];
        std::vector<double> res(ek.size());
        for (std::size_t k = 0; k < ek.size(); ++k) {
            const double dadt = (alpha[i + 1][k] - alpha[i - 1][k]) / dt2;
            res[k] = dadt - sign * ek[k] * alpha[i][k];
        }
        out.times.push_back(times[i]);
        out.residual.push_back(std::move(res));
    }
    return out;
}

double weinstein_H(const ComplexField& z, const ComplexField& phi, const ComplexField& rj,
                   const CutoffSet& cutoff, double p) {
    const Grid& g = z.grid;
    const ComplexField zx = spectral_derivative(z, 1);
    const double ex = 0.5 * (p + 1.0);
    double grad = 0.0, pot = 0.0, loc1 = 0.0, loc2 = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        grad += std::norm(zx[i]);
        const cplx w = phi[i] + rj[i];
        const double w2 = std::norm(w);
        const double wz2 = std::norm(w + z[i]);
        const double lin = w.real() * z[i].real() + w.imag() * z[i].imag();
        pot += std::pow(wz2, ex) - std::pow(w2, ex) -
               (p + 1.0) * std::pow(w2, 0.5 * (p - 1.0)) * lin;
        loc1 += cutoff.h1[i] * std::norm(z[i]);
        // Im(conj(z) z_x)
        loc2 += cutoff.h2[i] * (z[i].real() * zx[i].imag() - z[i].imag() * zx[i].real());
    }
    return (grad - 2.0 / (p + 1.0) * pot + loc1 - loc2) * g.dx();
}

double quadratic_form(const ComplexField& z, double t, const SolitonFamily& fam,
                      const CutoffSet& cutoff, double p) {
    const ComplexField R = soliton_sum(t, fam, z.grid);
    const ComplexField zx = spectral_derivative(z, 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double rmod = std::max(std::abs(R[i]), 1e-30);
        const double rez = R[i].real() * z[i].real() + R[i].imag() * z[i].imag();
        acc += std::norm(zx[i]) - std::pow(rmod, p - 1.0) * std::norm(z[i]) -
               (p - 1.0) * rez * rez * std::pow(rmod, p - 3.0) + cutoff.h1[i] * std::norm(z[i]) -
               cutoff.h2[i] * (z[i].real() * zx[i].imag() - z[i].imag() * zx[i].real());
    }
    return acc * z.grid.dx();
}

TildeDecomposition tilde_decomposition(const ComplexField& z, double t, const SolitonFamily& fam) {
    fam.validate();
    const Grid& g = z.grid;
    TildeDecomposition out{ComplexField(g), {}, {}};
    out.ztilde = z;
    for (const auto& s : fam.members) {
        const ComplexField Rk = soliton(t, s, fam.p, g);
        ComplexField dQ(g);  // dx Q_{c_k}(lambda_k) e^{i theta_k}
        double nq2 = 0.0, ndq2 = 0.0;
        for (std::size_t i = 0; i < g.points(); ++i) {
            const double lam = frame_lambda(s, t, g.x(i));
            const double th = frame_theta(s, t, g.x(i));
            const double qp = ground_state_derivative(fam.p, s.c, lam);
            dQ[i] = cplx{qp * std::cos(th), qp * std::sin(th)};
            const double q = ground_state_value(fam.p, s.c, lam);
            nq2 += q * q;
            ndq2 += qp * qp;
        }
        nq2 *= g.dx();
        ndq2 *= g.dx();
        // beta_k = Im int R_k conj(z) / ||Q||^2 ; gamma_k = -Re int dQ e^{i th} conj(z) / ||dQ||^2
        const double beta = -inner_imag(Rk, z) / nq2;
        const double gam = -inner_real(dQ, z) / ndq2;
        for (std::size_t i = 0; i < g.points(); ++i)
            out.ztilde[i] += beta * cplx{0.0, 1.0} * Rk[i] + gam * dQ[i];
        out.beta.push_back(beta);
        out.gamma_par.push_back(gam);
    }
    return out;
}

double form_comparison(const ComplexField& z, const ComplexField& ztilde, double t,
                       const SolitonFamily& fam, const CutoffSet& cutoff, double p) {
    return quadratic_form(ztilde, t, fam, cutoff, p) - quadratic_form(z, t, fam, cutoff, p);
}

EnergyReport energy_report(const ComplexField& z, const ComplexField& phi, const ComplexField& rj,
                           double t, const SolitonFamily& fam, const CutoffSet& cutoff, double p) {
    EnergyReport rep;
    rep.H = weinstein_H(z, phi, rj, cutoff, p);
    rep.Hform_z = quadratic_form(z, t, fam, cutoff, p);
    TildeDecomposition td = tilde_decomposition(z, t, fam);
    rep.Hform_ztilde = quadratic_form(td.ztilde, t, fam, cutoff, p);
    rep.beta = std::move(td.beta);
    rep.gamma_par = std::move(td.gamma_par);
    return rep;
}

OmegaReport omega_source(double t, const ComplexField& phi, const ShootingProblem& prob,
                         const ModeSet& modes) {
    const Grid& g = phi.grid;
    const std::size_t N = prob.family.members.size();
    if (prob.j >= N) throw validation_error("omega_source needs a perturbation stage");
    const auto& s = prob.family.members[prob.j];
    const double p = prob.p;
    const double amp = prob.A_j * std::exp(-modes.e(prob.j) * t);
    const ComplexField yj = modes.plus(prob.j, t, g);

    ComplexField omega1(g), omega2(g);
    double diff = 0.0;
    for (std::size_t i = 0; i < g.points(); ++i) {
        const cplx rj = amp * yj[i];
        const cplx w = phi[i] + rj;
        const cplx nl = std::pow(std::norm(w), 0.5 * (p - 1.0)) * w -
                        std::pow(std::norm(phi[i]), 0.5 * (p - 1.0)) * phi[i];
        // form 1: subtract A e^{-e t} Q^{p-1} e^{i theta} [p Y1 + i Y2](lambda)
        const double lam = frame_lambda(s, t, g.x(i));
        const double th = frame_theta(s, t, g.x(i));
        const cplx eith{std::cos(th), std::sin(th)};
        const cplx y12 = yj[i] * std::conj(eith);  // Y1 + i Y2 at lambda, c-scaled
        const double qp1 = std::pow(ground_state_value(p, s.c, lam), p - 1.0);
        omega1[i] = nl - amp * qp1 * eith * cplx{p * y12.real(), y12.imag()};
        // form 2: subtract |R_j|^{p-1} r_j + (p-1)|R_j|^{p-3} R_j Re(conj(R_j) r_j)
        const cplx Rj = ground_state_value(p, s.c, lam) * eith;
        const double rmod = std::max(std::abs(Rj), 1e-30);
        const double rer = Rj.real() * rj.real() + Rj.imag() * rj.imag();
        omega2[i] = nl - std::pow(rmod, p - 1.0) * rj -
                    (p - 1.0) * std::pow(rmod, p - 3.0) * Rj * rer;
        diff = std::max(diff, std::abs(omega1[i] - omega2[i]));
    }
    OmegaReport rep;
    rep.omega_h1 = norm_h1(omega2);
    rep.form_diff_linf = diff;
    return rep;
}

double transport_residual(const ComplexField& phi, const CutoffSet& cutoff, double p) {
    const ComplexField px = spectral_derivative(phi, 1);
    const ComplexField pxx = spectral_derivative(phi, 2);
    ComplexField res(phi.grid);
    const cplx I{0.0, 1.0};
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const cplx nl = std::pow(std::norm(phi[i]), 0.5 * (p - 1.0)) * phi[i];
        res[i] = I * pxx[i] + I * nl + cutoff.h2[i] * px[i] - I * cutoff.h1[i] * phi[i];
    }
    return norm_hminus1(res);
}

DHdtReport dhdt_check(const std::vector<double>& times, const std::vector<double>& H,
                      const std::vector<double>& znorm, double ej, double gamma) {
    if (times.size() != H.size() || times.size() != znorm.size() || times.size() < 3)
        throw validation_error("dhdt_check needs >= 3 matched samples");
    DHdtReport rep;
    for (std::size_t i = 1; i + 1 < times.size(); ++i) {
        const double t = times[i];
        const double dt2 = times[i + 1] - times[i - 1];
        double d = (H[i + 1] - H[i - 1]) / dt2;
        // for exponentially decaying H the centered difference overestimates
        // |dH/dt| by sinh(a h)/(a h); remove the bias with the locally
        // measured log-derivative a (exact for a pure exponential)
        if (H[i - 1] * H[i + 1] > 0.0) {
            const double ah = 0.5 * std::abs(std::log(std::abs(H[i + 1] / H[i - 1])));
            if (ah > 1e-8 && std::isfinite(ah)) d /= std::sinh(ah) / ah;
        }
        const double n = znorm[i];
        const double maj =
            n * n / std::sqrt(std::abs(t)) + std::exp(-(ej + 4.0 * gamma) * t) * n + n * n * n;
        rep.times.push_back(t);
        rep.dHdt.push_back(d);
        rep.majorant_unit.push_back(maj);
        if (maj > 0.0) rep.max_ratio = std::max(rep.max_ratio, std::abs(d) / maj);
    }
    return rep;
}

AmplitudeFit fit_rate(const std::vector<double>& times, const std::vector<double>& values) {
    std::vector<double> v(values);
    for (double& x : v) x = std::max(std::abs(x), 1e-14);
    return fit_exponential(times, v);
}

}  // namespace nlsfam
