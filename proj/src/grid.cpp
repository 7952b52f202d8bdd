#include "nlsfam/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

namespace nlsfam {

Grid::Grid(double length, std::size_t points) : length_(length), points_(points) {
    if (!(length > 0.0)) throw validation_error("grid length must be positive");
    if (points < 16 || points % 2 != 0)
        throw validation_error("grid points must be even and >= 16");
    wavenumbers_.resize(points);
    const double base = 2.0 * M_PI / length;
    const std::size_t half = points / 2;
    for (std::size_t m = 0; m < points; ++m) {
        // FFT bin order: 0, 1, ..., M/2-1, -M/2, ..., -1.
        const double idx = (m < half) ? static_cast<double>(m)
                                      : static_cast<double>(m) - static_cast<double>(points);
        wavenumbers_[m] = base * idx;
    }
}

double Grid::k_max() const {
    const double base = 2.0 * M_PI / length_;
    return base * static_cast<double>(points_ / 2);
}

ComplexField::ComplexField(const Grid& g, std::vector<cplx> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.points())
        throw validation_error("field sample count does not match grid");
}

bool ComplexField::all_finite() const {
    for (const auto& z : values)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

namespace {

// Cached FFTW plans per size; plans execute on caller-provided buffers via the
// new-array interface, so a single pair per size serves all fields.
struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;
    std::vector<cplx> buf;
};

std::map<std::size_t, PlanPair>& plan_cache() {
    static std::map<std::size_t, PlanPair> cache;
    return cache;
}

std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

PlanPair& plans_for(std::size_t n) {
    std::lock_guard<std::mutex> lock(plan_mutex());
    auto& cache = plan_cache();
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    PlanPair pp;
    pp.buf.resize(n);
    auto* b = reinterpret_cast<fftw_complex*>(pp.buf.data());
    pp.fwd = fftw_plan_dft_1d(static_cast<int>(n), b, b, FFTW_FORWARD, FFTW_ESTIMATE);
    pp.inv = fftw_plan_dft_1d(static_cast<int>(n), b, b, FFTW_BACKWARD, FFTW_ESTIMATE);
    return cache.emplace(n, std::move(pp)).first->second;
}

}  // namespace

void fft_forward(const Grid& g, const std::vector<cplx>& in, std::vector<cplx>& out) {
    const std::size_t n = g.points();
    out.resize(n);
    auto& pp = plans_for(n);
    std::lock_guard<std::mutex> lock(plan_mutex());
    std::copy(in.begin(), in.end(), pp.buf.begin());
    fftw_execute(pp.fwd);
    std::copy(pp.buf.begin(), pp.buf.end(), out.begin());
}

void fft_inverse(const Grid& g, const std::vector<cplx>& in, std::vector<cplx>& out) {
    const std::size_t n = g.points();
    out.resize(n);
    auto& pp = plans_for(n);
    std::lock_guard<std::mutex> lock(plan_mutex());
    std::copy(in.begin(), in.end(), pp.buf.begin());
    fftw_execute(pp.inv);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = pp.buf[i] * scale;
}

ComplexField spectral_derivative(const ComplexField& f, int order) {
    if (order <= 0) throw validation_error("derivative order must be positive");
    std::vector<cplx> hat;
    fft_forward(f.grid, f.values, hat);
    for (std::size_t m = 0; m < hat.size(); ++m) {
        const cplx ik{0.0, f.grid.k(m)};
        cplx mult{1.0, 0.0};
        for (int o = 0; o < order; ++o) mult *= ik;
        hat[m] *= mult;
    }
    ComplexField out(f.grid);
    fft_inverse(f.grid, hat, out.values);
    return out;
}

double inner_real(const ComplexField& f, const ComplexField& g) {
    if (f.grid != g.grid) throw validation_error("inner product requires matching grids");
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        acc += f[i].real() * g[i].real() + f[i].imag() * g[i].imag();
    return acc * f.grid.dx();
}

double inner_imag(const ComplexField& f, const ComplexField& g) {
    if (f.grid != g.grid) throw validation_error("inner product requires matching grids");
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        acc += f[i].real() * g[i].imag() - f[i].imag() * g[i].real();
    return acc * f.grid.dx();
}

double norm_l2(const ComplexField& f) { return std::sqrt(inner_real(f, f)); }

double norm_h1(const ComplexField& f) {
    std::vector<cplx> hat;
    fft_forward(f.grid, f.values, hat);
    // Parseval: ||f||_L2^2 = (1/M^2) sum |f_hat|^2 * L.
    double acc = 0.0;
    for (std::size_t m = 0; m < hat.size(); ++m)
        acc += (1.0 + f.grid.k(m) * f.grid.k(m)) * std::norm(hat[m]);
    const double mm = static_cast<double>(f.size());
    return std::sqrt(acc / (mm * mm) * f.grid.length());
}

double norm_hminus1(const ComplexField& f) {
    std::vector<cplx> hat;
    fft_forward(f.grid, f.values, hat);
    double acc = 0.0;
    for (std::size_t m = 0; m < hat.size(); ++m)
        acc += std::norm(hat[m]) / (1.0 + f.grid.k(m) * f.grid.k(m));
    const double mm = static_cast<double>(f.size());
    return std::sqrt(acc / (mm * mm) * f.grid.length());
}

ComplexField operator+(const ComplexField& a, const ComplexField& b) {
    if (a.grid != b.grid) throw validation_error("field addition requires matching grids");
    ComplexField out(a.grid);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

ComplexField operator-(const ComplexField& a, const ComplexField& b) {
    if (a.grid != b.grid) throw validation_error("field subtraction requires matching grids");
    ComplexField out(a.grid);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

ComplexField operator*(cplx s, const ComplexField& a) {
    ComplexField out(a.grid);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
    return out;
}

}  // namespace nlsfam
