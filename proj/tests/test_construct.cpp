#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nlsfam/construct.hpp"

using namespace nlsfam;

namespace {

const SolitonFamily& ref_family() {
    static SolitonFamily fam{7.0, {{1.0, -1.0, 0.0, 0.0}, {2.0, 1.0, 0.0, 0.0}}};
    return fam;
}

const LinearizedSpectrum& spectrum() {
    static LinearizedSpectrum s = compute_eigenmode(7.0, Grid{60.0, 1024});
    return s;
}

const ModeSet& modes() {
    static ModeSet m{spectrum(), ref_family()};
    return m;
}

}  // namespace

TEST_CASE("interaction scales") {
    const InteractionScales sc = interaction_scales(ref_family(), spectrum());
    // sigma0 = min{eta0 sqrt(c_min), e0^{2/3} c_min, c_min, velocity gaps}
    const double e0 = spectrum().e0;
    const double expected = std::min({spectrum().eta0 * 1.0, std::pow(e0, 2.0 / 3.0), 1.0, 2.0});
    CHECK(sc.sigma0 == doctest::Approx(expected).epsilon(1e-12));
    CHECK(sc.gamma == doctest::Approx(std::pow(sc.sigma0, 1.5) / 1e6).epsilon(1e-12));
}

TEST_CASE("conditioning cap and segment plan") {
    const double e_max = modes().e_max();
    CHECK(e_max == doctest::Approx(2.0 * spectrum().e0).epsilon(1e-12));
    const double cap = conditioning_cap(e_max);
    CHECK(cap == doctest::Approx(std::log(1e8) / e_max).epsilon(1e-12));

    // window longer than the cap without a schedule is rejected with guidance
    CHECK_THROWS_WITH_AS(SegmentPlan::make(5.0, 13.0, e_max, 1e-3, 100, {}),
                         doctest::Contains("schedule"), validation_error);

    // reference continuation plan
    const SegmentPlan plan =
        SegmentPlan::make(5.0, 13.0, e_max, 1e-3, 100, {6.6, 8.2, 9.8, 11.4});
    CHECK(plan.boundaries.front() == doctest::Approx(13.0));
    CHECK(plan.boundaries.back() == doctest::Approx(5.0));
    for (std::size_t i = 0; i + 1 < plan.boundaries.size(); ++i) {
        const double w = plan.boundaries[i] - plan.boundaries[i + 1];
        CHECK(w > 0.0);
        CHECK(w < cap);
        CHECK(w <= 0.8 + 1e-9);
        // boundaries snap to the step grid
        const double steps = w / plan.dt;
        CHECK(std::abs(steps - std::round(steps)) < 1e-6);
    }
    // short window needs no schedule
    const SegmentPlan one = SegmentPlan::make(3.0, 5.0, e_max, 1e-3, 100, {});
    CHECK(one.boundaries.front() == doctest::Approx(5.0));
}

TEST_CASE("mode set eigenvalues and caching") {
    CHECK(modes().e(0) == doctest::Approx(spectrum().e0).epsilon(1e-12));
    CHECK(modes().e(1) == doctest::Approx(2.0 * spectrum().e0).epsilon(1e-12));
    const Grid g{80.0, 2048};
    const ComplexField a = modes().plus(0, 7.0, g);
    const ComplexField b = modes().plus(0, 7.0, g);
    for (std::size_t i = 0; i < a.size(); i += 211) CHECK(a[i] == b[i]);
    // mode pairing in the moving frame
    CHECK(inner_imag(modes().plus(0, 7.0, g), modes().minus(0, 7.0, g)) ==
          doctest::Approx(1.0).epsilon(1e-8));
    CHECK(inner_imag(modes().plus(1, 7.0, g), modes().minus(1, 7.0, g)) ==
          doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("modulation matrix is a small perturbation of the identity") {
    ShootingProblem prob;
    prob.family = ref_family();
    prob.p = 7.0;
    prob.j = 0;
    prob.A_j = 1.0;
    prob.plan = SegmentPlan::make(5.0, 13.0, modes().e_max(), 1e-3, 100, {6.6, 8.2, 9.8, 11.4});
    prob.K = {1};
    prob.Jset = {0};
    const auto phi = modulation_matrix(prob, modes());
    REQUIRE(phi.size() == 1);
    CHECK(phi[0][0] == doctest::Approx(1.0).epsilon(1e-6));

    // base-stage matrix over both directions: identity plus exponentially
    // small off-diagonal interactions at t = Sn
    ShootingProblem base = prob;
    base.j = 2;
    base.A_j = 0.0;
    base.K = {0, 1};
    base.Jset = {};
    const auto phi2 = modulation_matrix(base, modes());
    REQUIRE(phi2.size() == 2);
    CHECK(phi2[0][0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(phi2[1][1] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(phi2[0][1]) < 1e-3);
    CHECK(std::abs(phi2[1][0]) < 1e-3);

    // well-conditioned inversion: ||b|| <= 2 ||a||
    const std::vector<double> a{1e-9, -2e-9};
    const std::vector<double> b = invert_final_data(base, modes(), a);
    double na = 0.0, nb = 0.0;
    for (double v : a) na += v * v;
    for (double v : b) nb += v * v;
    CHECK(std::sqrt(nb) <= 2.0 * std::sqrt(na));
    // reconstruction: Phi b = a
    for (std::size_t k = 0; k < 2; ++k) {
        double acc = 0.0;
        for (std::size_t l = 0; l < 2; ++l) acc += phi2[k][l] * b[l];
        CHECK(acc == doctest::Approx(a[k]).epsilon(1e-10));
    }
}

TEST_CASE("final data assembles the prescribed tail") {
    ShootingProblem prob;
    prob.family = ref_family();
    prob.p = 7.0;
    prob.j = 0;
    prob.A_j = 1.0;
    prob.plan = SegmentPlan::make(5.0, 13.0, modes().e_max(), 1e-3, 100, {6.6, 8.2, 9.8, 11.4});
    prob.K = {1};
    prob.Jset = {0};
    const Grid& g = prob.grid;
    const double sn = prob.plan.Sn;
    const ComplexField phi_sn = soliton_sum(sn, prob.family, g);
    const std::vector<double> b{3e-9};
    const ComplexField u = final_data(prob, b, modes(), phi_sn);
    // u - phi = A e^{-e_j Sn} Yj+ + b1 Y1+
    const double amp = std::exp(-modes().e(0) * sn);
    const ComplexField y0 = modes().plus(0, sn, g);
    const ComplexField y1 = modes().plus(1, sn, g);
    double err = 0.0;
    for (std::size_t i = 0; i < g.points(); ++i)
        err = std::max(err,
                       std::abs(u[i] - phi_sn[i] - amp * y0[i] - b[0] * y1[i]));
    CHECK(err < 1e-15);
}

TEST_CASE("family ordering is by ascending c") {
    SolitonFamily fam{7.0,
                      {{2.0, -1.0, 0.0, 0.0}, {0.5, 0.0, 0.0, 0.0}, {1.0, 1.0, 0.0, 0.0}}};
    const auto idx = family_ordering(fam);
    REQUIRE(idx.size() == 3);
    CHECK(idx[0] == 1);
    CHECK(idx[1] == 2);
    CHECK(idx[2] == 0);
}

TEST_CASE("exponential fit utility") {
    std::vector<double> t, y;
    for (int i = 0; i <= 40; ++i) {
        t.push_back(0.1 * i);
        y.push_back(3.0 * std::exp(-2.0 * 0.1 * i));
    }
    const AmplitudeFit f = fit_exponential(t, y);
    CHECK(f.A == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(f.rate == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(f.rms < 1e-10);
    CHECK_THROWS_AS(fit_exponential({1.0, 2.0}, {0.0, 0.0}), numeric_error);
}

TEST_CASE("shooting problem validation") {
    ShootingProblem prob;
    prob.family = ref_family();
    prob.p = 7.0;
    prob.j = 0;
    prob.A_j = 1.0;
    prob.plan = SegmentPlan::make(5.0, 13.0, modes().e_max(), 1e-3, 100, {6.6, 8.2, 9.8, 11.4});
    prob.K = {1};
    prob.Jset = {0};
    CHECK_NOTHROW(prob.validate(modes()));
    ShootingProblem bad = prob;
    bad.K = {0};  // shooting set must be {k : c_k > c_j}
    CHECK_THROWS_AS(bad.validate(modes()), validation_error);
}
