#include "nlsfam/linspec.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>

namespace nlsfam {

ComplexField SchrodingerOperator::apply(const ComplexField& v) const {
    if (v.grid != grid) throw validation_error("operator/field grid mismatch");
    std::vector<cplx> hat;
    fft_forward(grid, v.values, hat);
    for (std::size_t m = 0; m < hat.size(); ++m) hat[m] *= grid.k(m) * grid.k(m);
    ComplexField out(grid);
    fft_inverse(grid, hat, out.values);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += (c - potential[i]) * v[i];
    return out;
}

std::pair<SchrodingerOperator, SchrodingerOperator> assemble_operators(double p, double c,
                                                                       const Grid& grid) {
    const ComplexField qc = ground_state(p, c, grid);
    SchrodingerOperator lp{grid, c, std::vector<double>(grid.points())};
    SchrodingerOperator lm{grid, c, std::vector<double>(grid.points())};
    for (std::size_t i = 0; i < grid.points(); ++i) {
        const double qpm1 = std::pow(qc[i].real(), p - 1.0);
        lp.potential[i] = p * qpm1;
        lm.potential[i] = qpm1;
    }
    return {lp, lm};
}

TrigSeries::TrigSeries(const ComplexField& f) : grid(f.grid) {
    fft_forward(grid, f.values, coeff);
    const double inv_m = 1.0 / static_cast<double>(coeff.size());
    for (auto& z : coeff) z *= inv_m;
}

cplx TrigSeries::eval(double x) const {
    if (std::abs(x) > clamp_frac * grid.length()) return {0.0, 0.0};
    const double xs = x + 0.5 * grid.length();
    cplx acc{0.0, 0.0};
    for (std::size_t m = 0; m < coeff.size(); ++m) {
        const double ph = grid.k(m) * xs;
        acc += coeff[m] * cplx{std::cos(ph), std::sin(ph)};
    }
    return acc;
}

void TrigSeries::eval_many(const std::vector<double>& pts, std::vector<cplx>& out) const {
    out.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = eval(pts[i]);
}

namespace {

// Index of the sample closest to x = 0.
std::size_t center_index(const Grid& g) { return g.points() / 2; }

// Enforce -2 int Y1 Y2 = 1 (the integral must already be positive) and Y1(0) > 0.
void normalize_pair(ComplexField& y1, ComplexField& y2) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y1.size(); ++i) acc += y1[i].real() * y2[i].real();
    const double n = -2.0 * acc * y1.grid.dx();
    if (!(n > 0.0)) throw numeric_error("eigenmode normalization integral has the wrong sign");
    const double s = 1.0 / std::sqrt(n);
    double flip = (y1[center_index(y1.grid)].real() * s < 0.0) ? -1.0 : 1.0;
    for (std::size_t i = 0; i < y1.size(); ++i) {
        y1[i] *= s * flip;
        y2[i] *= s * flip;
    }
}

double eigen_residual(const SchrodingerOperator& lp, const SchrodingerOperator& lm, double e0,
                      const ComplexField& y1, const ComplexField& y2) {
    const ComplexField r1 = lp.apply(y1) - cplx{e0, 0.0} * y2;
    const ComplexField r2 = lm.apply(y2) + cplx{e0, 0.0} * y1;
    return norm_l2(r1) + norm_l2(r2);
}

// Matrix-free preconditioned BiCGSTAB on real vectors.
using VecFn = std::function<void(const std::vector<double>&, std::vector<double>&)>;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

bool bicgstab(const VecFn& apply, const VecFn& precond, const std::vector<double>& rhs,
              std::vector<double>& x, double tol, int max_iter) {
    const std::size_t n = rhs.size();
    std::vector<double> r(n), r0(n), v(n, 0.0), pvec(n, 0.0), y(n), s(n), z(n), t(n), kt(n);
    apply(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
    r0 = r;
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    const double rhs_norm = std::sqrt(dot(rhs, rhs));
    if (rhs_norm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return true;
    }
    for (int it = 0; it < max_iter; ++it) {
        const double rho1 = dot(r0, r);
        if (std::abs(rho1) < 1e-300) return false;
        const double beta = (rho1 / rho) * (alpha / omega);
        rho = rho1;
        for (std::size_t i = 0; i < n; ++i) pvec[i] = r[i] + beta * (pvec[i] - omega * v[i]);
        precond(pvec, y);
        apply(y, v);
        alpha = rho / dot(r0, v);
        for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        if (std::sqrt(dot(s, s)) < tol * rhs_norm) {
            for (std::size_t i = 0; i < n; ++i) x[i] += alpha * y[i];
            return true;
        }
        precond(s, z);
        apply(z, t);
        precond(t, kt);
        std::vector<double> ks(n);
        precond(s, ks);
        omega = dot(kt, ks) / dot(kt, kt);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if (std::sqrt(dot(r, r)) < tol * rhs_norm) return true;
        if (std::abs(omega) < 1e-300) return false;
    }
    return false;
}

void fill_eta0(LinearizedSpectrum& spec) {
    ComplexField yplus(spec.grid);
    for (std::size_t i = 0; i < yplus.size(); ++i)
        yplus[i] = cplx{spec.Y1[i].real(), spec.Y2[i].real()};
    spec.eta0 = decay_rate(yplus);
}

}  // namespace

LinearizedSpectrum compute_eigenmode_dense(double p, const Grid& grid) {
    if (!(p > 5.0)) throw validation_error("exponent p must exceed 5");
    const std::size_t m = grid.points();
    if (m > 1024) throw validation_error("dense eigensolve limited to 1024 points");
    auto [lp, lm] = assemble_operators(p, 1.0, grid);

    Eigen::MatrixXd b(m, m);
    ComplexField unit(grid);
    for (std::size_t j = 0; j < m; ++j) {
        unit[j] = cplx{1.0, 0.0};
        const ComplexField col = lm.apply(lp.apply(unit));
        for (std::size_t i = 0; i < m; ++i) b(static_cast<long>(i), static_cast<long>(j)) = col[i].real();
        unit[j] = cplx{0.0, 0.0};
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(b);
    if (es.info() != Eigen::Success) throw numeric_error("dense eigensolve failed");

    // The unique negative real eigenvalue of L- L+ is -e0^2.
    long best = -1;
    double best_val = 0.0;
    for (long i = 0; i < static_cast<long>(m); ++i) {
        const auto ev = es.eigenvalues()(i);
        if (std::abs(ev.imag()) > 1e-6 * (1.0 + std::abs(ev.real()))) continue;
        if (ev.real() < best_val) {
            best_val = ev.real();
            best = i;
        }
    }
    if (best < 0 || !(best_val < 0.0)) throw numeric_error("no negative eigenvalue found");
    const double e0 = std::sqrt(-best_val);

    LinearizedSpectrum spec{e0, ComplexField(grid), ComplexField(grid), 0.0, p, grid};
    for (std::size_t i = 0; i < m; ++i)
        spec.Y1[i] = cplx{es.eigenvectors()(static_cast<long>(i), best).real(), 0.0};
    const ComplexField lpv = lp.apply(spec.Y1);
    for (std::size_t i = 0; i < m; ++i) spec.Y2[i] = cplx{lpv[i].real() / e0, 0.0};
    normalize_pair(spec.Y1, spec.Y2);
    fill_eta0(spec);
    return spec;
}

double dense_eigenvalue_at(double p, double c, const Grid& grid) {
    if (!(p > 5.0)) throw validation_error("exponent p must exceed 5");
    if (!(c > 0.0)) throw validation_error("soliton scale c must be positive");
    const std::size_t m = grid.points();
    if (m > 1024) throw validation_error("dense eigensolve limited to 1024 points");
    auto [lp, lm] = assemble_operators(p, c, grid);
    Eigen::MatrixXd b(m, m);
    ComplexField unit(grid);
    for (std::size_t j = 0; j < m; ++j) {
        unit[j] = cplx{1.0, 0.0};
        const ComplexField col = lm.apply(lp.apply(unit));
        for (std::size_t i = 0; i < m; ++i)
            b(static_cast<long>(i), static_cast<long>(j)) = col[i].real();
        unit[j] = cplx{0.0, 0.0};
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(b);
    if (es.info() != Eigen::Success) throw numeric_error("dense eigensolve failed");
    double best_val = 0.0;
    for (long i = 0; i < static_cast<long>(m); ++i) {
        const auto ev = es.eigenvalues()(i);
        if (std::abs(ev.imag()) > 1e-6 * (1.0 + std::abs(ev.real()))) continue;
        best_val = std::min(best_val, ev.real());
    }
    if (!(best_val < 0.0)) throw numeric_error("no negative eigenvalue found");
    return std::sqrt(-best_val);
}

LinearizedSpectrum compute_eigenmode(double p, const Grid& grid, double tol) {
    if (!(p > 5.0)) throw validation_error("exponent p must exceed 5");
    if (!(tol > 0.0)) throw validation_error("tolerance must be positive");

    // Coarse dense solve seeds the eigenvalue shift and the starting vector.
    const std::size_t coarse_m = std::min<std::size_t>(grid.points(), 256);
    const Grid coarse(grid.length(), coarse_m);
    LinearizedSpectrum seed = compute_eigenmode_dense(p, coarse);
    if (grid.points() <= coarse_m) {
        seed.grid = grid;
        return seed;
    }

    auto [lp, lm] = assemble_operators(p, 1.0, grid);
    const std::size_t m = grid.points();

    TrigSeries y1s(seed.Y1);
    std::vector<double> v(m);
    for (std::size_t i = 0; i < m; ++i) v[i] = y1s.eval(grid.x(i)).real();

    double sigma = -seed.e0 * seed.e0 * (1.0 + 1e-3);
    ComplexField tmp_in(grid);

    auto apply_b = [&](const std::vector<double>& in, std::vector<double>& out) {
        for (std::size_t i = 0; i < m; ++i) tmp_in[i] = cplx{in[i], 0.0};
        const ComplexField res = lm.apply(lp.apply(tmp_in));
        out.resize(m);
        for (std::size_t i = 0; i < m; ++i) out[i] = res[i].real();
    };

    double mu = sigma;
    std::vector<double> bv(m);
    const double dx = grid.dx();
    bool converged = false;
    for (int outer = 0; outer < 40; ++outer) {
        auto apply_shifted = [&](const std::vector<double>& in, std::vector<double>& out) {
            apply_b(in, out);
            for (std::size_t i = 0; i < m; ++i) out[i] -= sigma * in[i];
        };
        auto precond = [&](const std::vector<double>& in, std::vector<double>& out) {
            // Asymptotic symbol of L- L+ - sigma is ((k^2+1)^2 - sigma).
            for (std::size_t i = 0; i < m; ++i) tmp_in[i] = cplx{in[i], 0.0};
            std::vector<cplx> hat;
            fft_forward(grid, tmp_in.values, hat);
            for (std::size_t q = 0; q < m; ++q) {
                const double k2 = grid.k(q) * grid.k(q);
                hat[q] /= (k2 + 1.0) * (k2 + 1.0) - sigma;
            }
            std::vector<cplx> res;
            fft_inverse(grid, hat, res);
            out.resize(m);
            for (std::size_t i = 0; i < m; ++i) out[i] = res[i].real();
        };
        std::vector<double> w(m, 0.0);
        if (!bicgstab(apply_shifted, precond, v, w, 1e-13, 600))
            throw numeric_error("inverse iteration inner solve failed");
        const double nw = std::sqrt(dot(w, w) * dx);
        for (std::size_t i = 0; i < m; ++i) v[i] = w[i] / nw;

        apply_b(v, bv);
        mu = dot(v, bv) / dot(v, v);
        double res2 = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double r = bv[i] - mu * v[i];
            res2 += r * r;
        }
        const double e0_cur = std::sqrt(-mu);
        const double resid = std::sqrt(res2 * dx) / e0_cur;
        if (resid < 0.5 * tol) {
            converged = true;
            break;
        }
        sigma = mu - 1e-6 * std::abs(mu);
    }
    if (!converged) throw numeric_error("eigenmode iteration did not converge");

    const double e0 = std::sqrt(-mu);
    LinearizedSpectrum spec{e0, ComplexField(grid), ComplexField(grid), 0.0, p, grid};
    for (std::size_t i = 0; i < m; ++i) spec.Y1[i] = cplx{v[i], 0.0};
    const ComplexField lpv = lp.apply(spec.Y1);
    for (std::size_t i = 0; i < m; ++i) spec.Y2[i] = cplx{lpv[i].real() / e0, 0.0};
    normalize_pair(spec.Y1, spec.Y2);
    if (eigen_residual(lp, lm, e0, spec.Y1, spec.Y2) > tol)
        throw numeric_error("eigenmode residual above tolerance");
    fill_eta0(spec);
    return spec;
}

double compute_eigenmode_shooting(double p, double tol, double e0_guess) {
    if (!(p > 5.0)) throw validation_error("exponent p must exceed 5");
    if (e0_guess <= 0.0) e0_guess = compute_eigenmode_dense(p, Grid(60.0, 256)).e0;

    // Shoot the coupled system Y1'' = (1 - p Q^{p-1}) Y1 - e0 Y2,
    // Y2'' = (1 - Q^{p-1}) Y2 + e0 Y1 from the decaying asymptotics at x = X
    // down to 0; an even eigenfunction needs Y1'(0) = Y2'(0) = 0, so the 2x2
    // determinant over the decaying subspace vanishes exactly at e0.
    const double X = 12.0;
    const double h = 1e-3;
    const int nsteps = static_cast<int>(std::round(X / h));

    auto det_at = [&](double e0) -> double {
        const cplx mu = std::sqrt(cplx{1.0, e0});
        // Two real solutions from the complex decaying mode W = A e^{-mu (x - X)},
        // A = 1 and A = i; state y = (Y1, Y1', Y2, Y2').
        double sols[2][4];
        for (int s = 0; s < 2; ++s) {
            const cplx a = (s == 0) ? cplx{1.0, 0.0} : cplx{0.0, 1.0};
            const cplx w0 = a, w1 = -mu * a;
            sols[s][0] = w0.real();
            sols[s][1] = w1.real();
            sols[s][2] = w0.imag();
            sols[s][3] = w1.imag();
        }
        auto rhs = [&](double x, const double* y, double* dy) {
            const double q = ground_state_value(p, 1.0, x);
            const double qpm1 = std::pow(q, p - 1.0);
            dy[0] = y[1];
            dy[1] = (1.0 - p * qpm1) * y[0] - e0 * y[2];
            dy[2] = y[3];
            dy[3] = (1.0 - qpm1) * y[2] + e0 * y[0];
        };
        for (int s = 0; s < 2; ++s) {
            double* y = sols[s];
            double x = X;
            for (int i = 0; i < nsteps; ++i) {
                // Classic RK4, marching toward 0 (step -h).
                double k1[4], k2[4], k3[4], k4[4], yt[4];
                rhs(x, y, k1);
                for (int q = 0; q < 4; ++q) yt[q] = y[q] - 0.5 * h * k1[q];
                rhs(x - 0.5 * h, yt, k2);
                for (int q = 0; q < 4; ++q) yt[q] = y[q] - 0.5 * h * k2[q];
                rhs(x - 0.5 * h, yt, k3);
                for (int q = 0; q < 4; ++q) yt[q] = y[q] - h * k3[q];
                rhs(x - h, yt, k4);
                for (int q = 0; q < 4; ++q)
                    y[q] -= h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
                x -= h;
            }
        }
        // Normalize rows to keep the determinant scale-free in e0.
        const double n0 = std::hypot(sols[0][1], sols[0][3]);
        const double n1 = std::hypot(sols[1][1], sols[1][3]);
        return (sols[0][1] * sols[1][3] - sols[1][1] * sols[0][3]) / (n0 * n1);
    };

    double a = e0_guess * 0.999, b = e0_guess * 1.001;
    double fa = det_at(a), fb = det_at(b);
    for (int it = 0; it < 80; ++it) {
        if (std::abs(fb - fa) < 1e-300) throw numeric_error("shooting secant stagnated");
        const double c = b - fb * (b - a) / (fb - fa);
        if (!(c > 0.0) || !std::isfinite(c)) throw numeric_error("shooting iterate left (0,inf)");
        a = b;
        fa = fb;
        b = c;
        fb = det_at(b);
        if (std::abs(b - a) < tol * b) return b;
    }
    throw numeric_error("shooting secant did not converge");
}

ScaledMode scaled_mode(const LinearizedSpectrum& spec, double c, const Grid& grid) {
    if (!(c > 0.0)) throw validation_error("soliton scale c must be positive");
    TrigSeries y1s(spec.Y1), y2s(spec.Y2);
    const double amp = std::pow(c, 0.25);
    const double rc = std::sqrt(c);
    // e_c = c e0 (linear in c): L_{c+-} v = c (L_{+-} w)(sqrt(c) x) for
    // v(x) = w(sqrt(c) x), so the rescaled pair shifts the eigenvalue by c.
    ScaledMode out{c, c * spec.e0, ComplexField(grid), ComplexField(grid)};
    for (std::size_t i = 0; i < grid.points(); ++i) {
        const double xs = rc * grid.x(i);
        const double y1 = y1s.eval(xs).real();
        const double y2 = y2s.eval(xs).real();
        out.Yc_plus[i] = amp * cplx{y1, y2};
        out.Yc_minus[i] = amp * cplx{y1, -y2};
    }
    return out;
}

ComplexField mode_field(const TrigSeries& y1s, const TrigSeries& y2s, double c, double /*e0*/,
                        int sign, const SolitonParams& s, double t, const Grid& grid) {
    if (sign != 1 && sign != -1) throw validation_error("mode sign must be +1 or -1");
    const double amp = std::pow(c, 0.25);
    const double rc = std::sqrt(c);
    ComplexField out(grid);
    for (std::size_t i = 0; i < grid.points(); ++i) {
        const double x = grid.x(i);
        const double arg = rc * frame_lambda(s, t, x);
        if (std::abs(arg) > y1s.clamp_frac * y1s.grid.length()) continue;
        const double y1 = y1s.eval(arg).real();
        const double y2 = y2s.eval(arg).real();
        const double th = frame_theta(s, t, x);
        out[i] = amp * cplx{y1, sign * y2} * cplx{std::cos(th), std::sin(th)};
    }
    return out;
}

double decay_rate(const ComplexField& f) {
    const std::size_t m = f.size();
    std::vector<double> mag(m);
    double peak = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        mag[i] = std::abs(f[i]);
        peak = std::max(peak, mag[i]);
    }
    if (!(peak > 0.0)) throw numeric_error("decay_rate on zero field");

    // Collect tail samples in the fit window on both sides; prefer local maxima
    // (the envelope) so oscillatory tails are not biased by the dips.
    std::vector<double> xs, ys, xs_all, ys_all;
    for (std::size_t i = 1; i + 1 < m; ++i) {
        const double ax = std::abs(f.grid.x(i));
        if (ax < 0.2) continue;
        if (!(mag[i] > 1e-12 * peak) || !(mag[i] < 1e-2 * peak)) continue;
        xs_all.push_back(ax);
        ys_all.push_back(std::log(mag[i]));
        if (mag[i] >= mag[i - 1] && mag[i] >= mag[i + 1]) {
            xs.push_back(ax);
            ys.push_back(std::log(mag[i]));
        }
    }
    if (xs.size() < 8) {
        xs = xs_all;
        ys = ys_all;
    }
    if (xs.size() < 8) throw numeric_error("decay_rate: too few tail samples");

    const double n = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    if (!(std::abs(denom) > 0.0)) throw numeric_error("decay_rate: degenerate abscissae");
    const double slope = (n * sxy - sx * sy) / denom;
    const double icept = (sy - slope * sx) / n;
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - slope * xs[i] - icept;
        rss += r * r;
    }
    if (std::sqrt(rss / n) > 1.0) throw numeric_error("decay_rate: tail is not exponential");
    if (!(-slope > 0.0)) throw numeric_error("decay_rate: non-decaying tail");
    return -slope;
}

CoercivityReport coercivity_check(const ComplexField& v, const LinearizedSpectrum& spec) {
    if (v.grid != spec.grid) throw validation_error("coercivity_check grid mismatch");
    auto [lp, lm] = assemble_operators(spec.p, 1.0, spec.grid);
    const std::size_t m = v.size();
    ComplexField v1(v.grid), v2(v.grid);
    for (std::size_t i = 0; i < m; ++i) {
        v1[i] = cplx{v[i].real(), 0.0};
        v2[i] = cplx{v[i].imag(), 0.0};
    }
    CoercivityReport rep;
    rep.quadratic = inner_real(lp.apply(v1), v1) + inner_real(lm.apply(v2), v2);

    const ComplexField q = ground_state(spec.p, 1.0, spec.grid);
    const ComplexField dq = spectral_derivative(q, 1);
    const double dx = v.grid.dx();
    double pdq = 0.0, pq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        pdq += dq[i].real() * v1[i].real();
        pq += q[i].real() * v2[i].real();
    }
    rep.proj_dxq = pdq * dx;
    rep.proj_q = pq * dx;

    ComplexField yplus(v.grid), yminus(v.grid);
    for (std::size_t i = 0; i < m; ++i) {
        yplus[i] = cplx{spec.Y1[i].real(), spec.Y2[i].real()};
        yminus[i] = std::conj(yplus[i]);
    }
    // Im int Y^{+/-} bar(v) = -Im int bar(Y^{+/-}) v.
    rep.proj_yplus = -inner_imag(yplus, v);
    rep.proj_yminus = -inner_imag(yminus, v);
    return rep;
}

}  // namespace nlsfam
