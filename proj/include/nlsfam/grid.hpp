#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlsfam {

using cplx = std::complex<double>;

// Thrown on invalid user-facing input (CLI exit code 2).
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown on numerical failure: blow-up, non-convergence (CLI exit code 3).
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Uniform periodic grid on [-L/2, L/2).
class Grid {
public:
    Grid(double length, std::size_t points);

    double length() const { return length_; }
    std::size_t points() const { return points_; }
    double dx() const { return length_ / static_cast<double>(points_); }

    // Physical coordinate of sample i.
    double x(std::size_t i) const { return -0.5 * length_ + dx() * static_cast<double>(i); }

    // Wavenumber of FFT bin m (standard symmetric layout: 2*pi*m'/L, m' in [-M/2, M/2)).
    double k(std::size_t m) const { return wavenumbers_[m]; }
    const std::vector<double>& wavenumbers() const { return wavenumbers_; }
    double k_max() const;

    bool operator==(const Grid& o) const {
        return length_ == o.length_ && points_ == o.points_;
    }
    bool operator!=(const Grid& o) const { return !(*this == o); }

private:
    double length_;
    std::size_t points_;
    std::vector<double> wavenumbers_;
};

// Sampled complex wave function on a grid.
struct ComplexField {
    Grid grid;
    std::vector<cplx> values;

    explicit ComplexField(const Grid& g) : grid(g), values(g.points(), cplx{0.0, 0.0}) {}
    ComplexField(const Grid& g, std::vector<cplx> v);

    std::size_t size() const { return values.size(); }
    cplx& operator[](std::size_t i) { return values[i]; }
    const cplx& operator[](std::size_t i) const { return values[i]; }

    bool all_finite() const;
};

// Fourier transform pair on the grid's sample layout (FFTW backend, plans cached).
// Conventions: forward is the plain DFT sum, inverse divides by M.
void fft_forward(const Grid& g, const std::vector<cplx>& in, std::vector<cplx>& out);
void fft_inverse(const Grid& g, const std::vector<cplx>& in, std::vector<cplx>& out);

// (ik)^order Fourier multiplier derivative.
ComplexField spectral_derivative(const ComplexField& f, int order);

// Re / Im of integral f conj(g) per the notation (f,g) = Re int f bar g.
double inner_real(const ComplexField& f, const ComplexField& g);
// Im int conj(f) g  (the projection pairing alpha = Im int bar z Y).
double inner_imag(const ComplexField& f, const ComplexField& g);

double norm_l2(const ComplexField& f);
double norm_h1(const ComplexField& f);
double norm_hminus1(const ComplexField& f);

// Pointwise helpers used across modules.
ComplexField operator+(const ComplexField& a, const ComplexField& b);
ComplexField operator-(const ComplexField& a, const ComplexField& b);
ComplexField operator*(cplx s, const ComplexField& a);

}  // namespace nlsfam
