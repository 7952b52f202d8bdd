#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nlsfam/grid.hpp"

using namespace nlsfam;
namespace num = std::numbers;

namespace {

ComplexField gaussian(const Grid& g, double a) {
    ComplexField f(g);
    for (std::size_t i = 0; i < g.points(); ++i)
        f[i] = cplx{std::exp(-a * g.x(i) * g.x(i)), 0.0};
    return f;
}

}  // namespace

TEST_CASE("grid layout") {
    Grid g{40.0, 256};
    CHECK(g.dx() == doctest::Approx(40.0 / 256));
    CHECK(g.x(0) == doctest::Approx(-20.0));
    CHECK(g.x(128) == doctest::Approx(0.0));
    CHECK(g.k(0) == 0.0);
    CHECK(g.k(1) == doctest::Approx(2.0 * num::pi / 40.0));
    // symmetric wavenumber layout
    CHECK(g.k(255) == doctest::Approx(-2.0 * num::pi / 40.0));
    CHECK(g.k_max() == doctest::Approx(2.0 * num::pi / 40.0 * 128));
    CHECK_THROWS_AS(Grid(0.0, 64), validation_error);
    CHECK_THROWS_AS(Grid(10.0, 3), validation_error);
}

TEST_CASE("fft round trip and Parseval") {
    Grid g{25.0, 128};
    ComplexField f(g);
    for (std::size_t i = 0; i < g.points(); ++i)
        f[i] = cplx{std::sin(3.0 * g.x(i)), std::cos(1.7 * g.x(i))};
    std::vector<cplx> hat, back;
    fft_forward(g, f.values, hat);
    fft_inverse(g, hat, back);
    for (std::size_t i = 0; i < g.points(); ++i)
        CHECK(std::abs(back[i] - f[i]) < 1e-13);
    // ||f||^2 = L / M^2 * sum |hat|^2
    double phys = 0.0, spec = 0.0;
    for (std::size_t i = 0; i < g.points(); ++i) {
        phys += std::norm(f[i]);
        spec += std::norm(hat[i]);
    }
    phys *= g.dx();
    spec *= g.length() / (static_cast<double>(g.points()) * static_cast<double>(g.points()));
    CHECK(phys == doctest::Approx(spec).epsilon(1e-13));
}

TEST_CASE("spectral derivative of a trigonometric mode is exact") {
    Grid g{2.0 * num::pi * 8.0, 256};
    ComplexField f(g);
    const double k = 2.0 * num::pi / g.length() * 12.0;
    for (std::size_t i = 0; i < g.points(); ++i)
        f[i] = cplx{std::cos(k * g.x(i)), 0.0};
    const ComplexField d1 = spectral_derivative(f, 1);
    const ComplexField d2 = spectral_derivative(f, 2);
    for (std::size_t i = 0; i < g.points(); ++i) {
        CHECK(d1[i].real() == doctest::Approx(-k * std::sin(k * g.x(i))).epsilon(1e-11));
        CHECK(d2[i].real() == doctest::Approx(-k * k * std::cos(k * g.x(i))).epsilon(1e-11));
    }
}

TEST_CASE("norms against Gaussian closed forms") {
    Grid g{60.0, 1024};
    const double a = 1.0;
    const ComplexField f = gaussian(g, a);
    // int e^{-2ax^2} = sqrt(pi/(2a)); int |f'|^2 = int 4a^2x^2 e^{-2ax^2} = a sqrt(pi/(2a))
    const double m = std::sqrt(num::pi / (2.0 * a));
    CHECK(norm_l2(f) == doctest::Approx(std::sqrt(m)).epsilon(1e-12));
    CHECK(norm_h1(f) == doctest::Approx(std::sqrt(m + a * m)).epsilon(1e-11));
}

TEST_CASE("H^-1 norm uses the (1+k^2)^{-1} multiplier") {
    Grid g{30.0, 128};
    ComplexField f(g);
    const double k = 2.0 * num::pi / g.length() * 5.0;
    for (std::size_t i = 0; i < g.points(); ++i)
        f[i] = cplx{std::cos(k * g.x(i)), 0.0};
    // single mode: ||f||_{H^-1}^2 = ||f||^2 / (1+k^2)
    const double l2 = norm_l2(f);
    CHECK(norm_hminus1(f) == doctest::Approx(l2 / std::sqrt(1.0 + k * k)).epsilon(1e-12));
}

TEST_CASE("inner products orientation") {
    Grid g{10.0, 64};
    ComplexField f(g), h(g);
    for (std::size_t i = 0; i < g.points(); ++i) {
        f[i] = cplx{1.0, 2.0};
        h[i] = cplx{3.0, -1.0};
    }
    // inner_real = Re int conj(f) h; inner_imag = Im int conj(f) h
    const cplx v = std::conj(cplx{1.0, 2.0}) * cplx{3.0, -1.0} * 10.0;
    CHECK(inner_real(f, h) == doctest::Approx(v.real()).epsilon(1e-13));
    CHECK(inner_imag(f, h) == doctest::Approx(v.imag()).epsilon(1e-13));
}

TEST_CASE("field arithmetic and mismatched grids") {
    Grid g{10.0, 64};
    Grid g2{10.0, 128};
    ComplexField a(g), b(g), c(g2);
    for (std::size_t i = 0; i < g.points(); ++i) {
        a[i] = cplx{1.0, 1.0};
        b[i] = cplx{2.0, 0.0};
    }
    CHECK_THROWS_AS(inner_real(a, c), validation_error);
    const ComplexField s = cplx{0.0, 1.0} * a;
    CHECK(s[0] == cplx{-1.0, 1.0});
}
