#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nlsfam/evolve.hpp"
#include "nlsfam/solitons.hpp"

using namespace nlsfam;

namespace {

double h1_dist(const ComplexField& a, const ComplexField& b) {
    ComplexField d = a;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= b[i];
    return norm_h1(d);
}

double soliton_error(Scheme s, double dt, double t_end, Precision prec = Precision::double_prec) {
    // M = 2048 keeps the dealias-projection floor (~3e-8 at M = 1024) out of the way
    const Grid g{60.0, 2048};
    const SolitonParams sp{1.0, 1.0, 0.0, 0.0};
    const ComplexField u0 = soliton(0.0, sp, 7.0, g);
    IntegratorConfig cfg;
    cfg.dt = dt;
    cfg.scheme = s;
    cfg.precision = prec;
    cfg.snapshot_stride = 1000000;  // endpoints only
    const Trajectory tr = evolve(u0, 0.0, t_end, 7.0, cfg);
    return h1_dist(tr.snapshots.back(), soliton(t_end, sp, 7.0, g));
}

}  // namespace

TEST_CASE("scheme weights") {
    CHECK(scheme_weights(Scheme::strang).size() == 1);
    CHECK(scheme_weights(Scheme::fourth_order).size() == 3);
    CHECK(scheme_weights(Scheme::sixth_order).size() == 7);
    CHECK(scheme_weights(Scheme::eighth_order).size() == 15);
    for (Scheme s : {Scheme::strang, Scheme::fourth_order, Scheme::sixth_order,
                     Scheme::eighth_order}) {
        double sum = 0.0;
        for (double w : scheme_weights(s)) sum += w;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("plane wave is evolved exactly by splitting") {
    const Grid g{20.0, 128};
    const double k = 2.0 * std::numbers::pi / g.length() * 3.0;
    const double A = 0.7;
    ComplexField u0(g);
    for (std::size_t i = 0; i < g.points(); ++i)
        u0[i] = cplx{A * std::cos(k * g.x(i)), A * std::sin(k * g.x(i))};
    IntegratorConfig cfg;
    cfg.dt = 1e-2;
    const double T = 0.5;
    const Trajectory tr = evolve(u0, 0.0, T, 7.0, cfg);
    // i u_t + u_xx + |u|^{p-1} u = 0 with |u| = A: phase (A^{p-1} - k^2) t
    const double ph = (std::pow(A, 6.0) - k * k) * T;
    double err = 0.0;
    for (std::size_t i = 0; i < g.points(); ++i) {
        const cplx exact = u0[i] * cplx{std::cos(ph), std::sin(ph)};
        err = std::max(err, std::abs(tr.snapshots.back()[i] - exact));
    }
    CHECK(err < 1e-11);
}

TEST_CASE("Strang converges at second order on a soliton") {
    const double e1 = soliton_error(Scheme::strang, 2e-3, 0.5);
    const double e2 = soliton_error(Scheme::strang, 1e-3, 0.5);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("composition schemes sharpen the soliton error") {
    const double es = soliton_error(Scheme::strang, 1e-3, 0.5);
    const double e4 = soliton_error(Scheme::fourth_order, 1e-3, 0.5);
    const double e6 = soliton_error(Scheme::sixth_order, 1e-3, 0.5);
    CHECK(e4 < 0.05 * es);
    CHECK(e6 < 0.05 * e4);
}

TEST_CASE("conservation on a soliton run") {
    const Grid g{60.0, 1024};
    const ComplexField u0 = soliton(0.0, {1.0, 1.0, 0.0, 0.0}, 7.0, g);
    IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.scheme = Scheme::sixth_order;
    cfg.snapshot_stride = 100;
    const Trajectory tr = evolve(u0, 0.0, 1.0, 7.0, cfg);
    const DriftReport d = conservation_drift(tr);
    CHECK(d.mass_rel < 1e-11);
    CHECK(d.energy_rel < 1e-7);
    CHECK(d.momentum_abs < 1e-7);
}

TEST_CASE("backward evolution and round trip") {
    const Grid g{60.0, 2048};
    const ComplexField u0 = soliton(0.0, {1.0, 1.0, 0.0, 0.0}, 7.0, g);
    IntegratorConfig cfg;
    cfg.dt = 1e-3;
    const Trajectory fwd = evolve(u0, 0.0, 1.0, 7.0, cfg);
    CHECK(fwd.times.front() == doctest::Approx(0.0));
    CHECK(fwd.times.back() == doctest::Approx(1.0));
    const Trajectory back = evolve(fwd.snapshots.back(), 1.0, 0.0, 7.0, cfg);
    CHECK(back.times.back() == doctest::Approx(0.0));
    CHECK(h1_dist(back.snapshots.back(), u0) < 1e-9);
}

TEST_CASE("snapshot schedule") {
    const Grid g{60.0, 1024};
    const ComplexField u0 = soliton(0.0, {1.0, 0.0, 0.0, 0.0}, 7.0, g);
    IntegratorConfig cfg;
    cfg.dt = 1e-2;
    cfg.snapshot_stride = 10;
    const Trajectory tr = evolve(u0, 0.0, 0.55, 7.0, cfg);
    // snapshots at 0, 0.1, ..., 0.5 plus the endpoint 0.55
    CHECK(tr.size() == 7);
    CHECK(tr.times[1] == doctest::Approx(0.1));
    CHECK(tr.times.back() == doctest::Approx(0.55));
    CHECK(tr.conserved_series.size() == tr.size());
}

TEST_CASE("blow-up detection") {
    const Grid g{60.0, 1024};
    const ComplexField u0 = soliton(0.0, {1.0, 1.0, 0.0, 0.0}, 7.0, g);
    IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.max_gradient = 1e-6;  // artificially low threshold trips immediately
    CHECK_THROWS_AS(evolve(u0, 0.0, 0.5, 7.0, cfg), blowup_error);
}

TEST_CASE("step validation") {
    const Grid g{60.0, 1024};
    const ComplexField u0 = soliton(0.0, {1.0, 0.0, 0.0, 0.0}, 7.0, g);
    IntegratorConfig cfg;
    cfg.dt = 1e-3;
    CHECK_THROWS_AS(step(u0, 5e-3, 7.0, cfg), validation_error);
    IntegratorConfig bad;
    bad.dt = -1.0;
    CHECK_THROWS_AS(bad.validate(), validation_error);
}

TEST_CASE("extended precision agrees with double on short horizons") {
    const double ed = soliton_error(Scheme::sixth_order, 1e-3, 0.25);
    const double ex = soliton_error(Scheme::sixth_order, 1e-3, 0.25, Precision::extended);
    CHECK(std::abs(ed - ex) < 1e-8);
    CHECK(ex < 1e-5);
}
