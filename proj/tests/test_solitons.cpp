#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nlsfam/solitons.hpp"

using namespace nlsfam;

TEST_CASE("ground state solves the profile ODE") {
    const Grid g{80.0, 4096};
    for (double p : {6.0, 7.0, 9.0}) {
        for (double c : {1.0, 2.0}) {
            const ComplexField q = ground_state(p, c, g);
            const ComplexField qxx = spectral_derivative(q, 2);
            double res = 0.0;
            for (std::size_t i = 0; i < g.points(); ++i)
                res = std::max(res, std::abs(qxx[i].real() +
                                             std::pow(q[i].real(), p) - c * q[i].real()));
            CAPTURE(p);
            CAPTURE(c);
            CHECK(res < 1e-10);
        }
    }
}

TEST_CASE("ground state closed form at the origin") {
    // Q(0) = ((p+1)/2)^{1/(p-1)}
    CHECK(ground_state_value(7.0, 1.0, 0.0) == doctest::Approx(std::pow(4.0, 1.0 / 6.0)));
    // mass of Q_c scales as c^{2/(p-1) - 1/2}
    const Grid g{120.0, 2048};
    const double p = 7.0;
    const double m1 = conserved(ground_state(p, 1.0, g), p).mass;
    const double m4 = conserved(ground_state(p, 4.0, g), p).mass;
    CHECK(m4 / m1 == doctest::Approx(std::pow(4.0, 2.0 / (p - 1.0) - 0.5)).epsilon(1e-10));
    // supercritical: scaling up c decreases mass
    CHECK(m4 < m1);
}

TEST_CASE("scaling law pointwise") {
    for (double p : {6.0, 7.0, 9.0}) {
        for (double c : {0.5, 1.0, 2.0}) {
            const double rc = std::sqrt(c);
            for (double x : {-3.0, -0.7, 0.0, 1.3, 4.0}) {
                const double lhs = ground_state_value(p, c, x);
                const double rhs = std::pow(c, 1.0 / (p - 1.0)) * ground_state_value(p, 1.0, rc * x);
                CHECK(std::abs(lhs - rhs) <= 1e-13 * std::max(1.0, std::abs(rhs)));
            }
        }
    }
}

TEST_CASE("tail guard rejects short grids") {
    CHECK_THROWS_AS(ground_state(7.0, 1.0, Grid{20.0, 256}), validation_error);
    CHECK_THROWS_AS(ground_state(4.0, 1.0, Grid{80.0, 256}), validation_error);
    CHECK_THROWS_AS(ground_state(7.0, -1.0, Grid{80.0, 256}), validation_error);
}

TEST_CASE("family validation") {
    SolitonFamily fam{7.0, {{1.0, -1.0, 0.0, 0.0}, {2.0, 1.0, 0.0, 0.0}}};
    fam.validate();
    SolitonFamily bad_v{7.0, {{1.0, 1.0, 0.0, 0.0}, {2.0, 1.0, 0.0, 0.0}}};
    CHECK_THROWS_AS(bad_v.validate(), validation_error);
    SolitonFamily bad_p{5.0, {{1.0, 0.0, 0.0, 0.0}}};
    CHECK_THROWS_AS(bad_p.validate(), validation_error);
    SolitonFamily bad_c{7.0, {{-1.0, 0.0, 0.0, 0.0}}};
    CHECK_THROWS_AS(bad_c.validate(), validation_error);
}

TEST_CASE("soliton frame and conserved quantities") {
    const Grid g{80.0, 2048};
    const double p = 7.0;
    const SolitonParams s{1.0, 1.0, 0.3, 0.5};
    const double t = 2.0;
    const ComplexField r = soliton(t, s, p, g);
    // peak sits at x = v t + x0
    std::size_t imax = 0;
    for (std::size_t i = 1; i < g.points(); ++i)
        if (std::abs(r[i]) > std::abs(r[imax])) imax = i;
    CHECK(std::abs(g.x(imax) - (s.v * t + s.x0)) <= g.dx());
    // momentum of a boosted soliton: P = (v/2) M
    const ConservedTriple ct = conserved(r, p);
    CHECK(ct.momentum == doctest::Approx(0.5 * s.v * ct.mass).epsilon(1e-10));
    // static soliton has zero momentum
    const ConservedTriple c0 = conserved(soliton(0.0, {1.0, 0.0, 0.0, 0.0}, p, g), p);
    CHECK(std::abs(c0.momentum) < 1e-12);
}

TEST_CASE("conserved quantities against Gaussian closed forms") {
    const Grid g{60.0, 1024};
    ComplexField u(g);
    for (std::size_t i = 0; i < g.points(); ++i)
        u[i] = cplx{std::exp(-g.x(i) * g.x(i)), 0.0};
    const double p = 7.0;
    const ConservedTriple ct = conserved(u, p);
    const double pi = std::numbers::pi;
    CHECK(ct.mass == doctest::Approx(std::sqrt(pi / 2.0)).epsilon(1e-12));
    // E = (1/2) int |u'|^2 - (1/8) int e^{-8 x^2} = (1/2) sqrt(pi/2) - (1/8) sqrt(pi/8)
    CHECK(ct.energy ==
          doctest::Approx(0.5 * std::sqrt(pi / 2.0) - std::sqrt(pi / 8.0) / 8.0).epsilon(1e-12));
    CHECK(std::abs(ct.momentum) < 1e-13);
}

TEST_CASE("symmetries act as expected") {
    const Grid g{80.0, 2048};
    const double p = 7.0;
    const ComplexField q = ground_state(p, 1.0, g);

    // translation moves the profile
    const ComplexField shifted = symmetry_translate(q, 0.0, 1.5);
    std::size_t imax = 0;
    for (std::size_t i = 1; i < g.points(); ++i)
        if (std::abs(shifted[i]) > std::abs(shifted[imax])) imax = i;
    CHECK(std::abs(g.x(imax) - 1.5) <= g.dx());
    CHECK(conserved(shifted, p).mass == doctest::Approx(conserved(q, p).mass).epsilon(1e-12));

    // phase rotation leaves every conserved quantity alone
    const ConservedTriple a = conserved(q, p);
    const ConservedTriple b = conserved(symmetry_phase(q, 0.8), p);
    CHECK(a.mass == doctest::Approx(b.mass).epsilon(1e-13));
    CHECK(a.energy == doctest::Approx(b.energy).epsilon(1e-12));

    // Galilean boost adds (v0/2) M of momentum
    const ComplexField boosted = symmetry_galilean(q, 2.0, 0.0);
    CHECK(conserved(boosted, p).momentum ==
          doctest::Approx(a.momentum + 1.0 * a.mass).epsilon(1e-10));

    // boosted ground state at t = 0 is the v-soliton with matching frame
    const ComplexField direct = soliton(0.0, {1.0, 2.0, 0.0, 0.0}, p, g);
    double diff = 0.0;
    for (std::size_t i = 0; i < g.points(); ++i)
        diff = std::max(diff, std::abs(boosted[i] - direct[i]));
    CHECK(diff < 1e-10);

    // scaling maps Q_1 to Q_{lambda^2}
    const double lam = std::sqrt(2.0);
    const ComplexField scaled = symmetry_scale(q, lam, p, g);
    const ComplexField q2 = ground_state(p, 2.0, g);
    diff = 0.0;
    for (std::size_t i = 0; i < g.points(); ++i)
        diff = std::max(diff, std::abs(scaled[i] - q2[i]));
    // off-grid trigonometric interpolation, so only spectral-truncation accuracy
    CHECK(diff < 1e-9);
    CHECK_THROWS_AS(symmetry_scale(q, -1.0, p, g), validation_error);
}

TEST_CASE("soliton sum is the superposition") {
    const Grid g{80.0, 1024};
    SolitonFamily fam{7.0, {{1.0, -1.0, 0.0, 0.0}, {2.0, 1.0, 0.0, 0.0}}};
    const double t = 3.0;
    const ComplexField sum = soliton_sum(t, fam, g);
    const ComplexField r1 = soliton(t, fam.members[0], fam.p, g);
    const ComplexField r2 = soliton(t, fam.members[1], fam.p, g);
    for (std::size_t i = 0; i < g.points(); i += 37)
        CHECK(std::abs(sum[i] - r1[i] - r2[i]) < 1e-14);
}
