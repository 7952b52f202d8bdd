#include "nlsfam/evolve.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>

namespace nlsfam {

void IntegratorConfig::validate() const {
    if (!(dt > 0.0)) throw validation_error("integrator dt must be positive");
    if (snapshot_stride == 0) throw validation_error("snapshot stride must be positive");
}

const std::vector<double>& scheme_weights(Scheme s) {
    static const std::vector<double> w2 = {1.0};
    static const std::vector<double> w4 = [] {
        const double w1 = 1.0 / (2.0 - std::cbrt(2.0));
        return std::vector<double>{w1, 1.0 - 2.0 * w1, w1};
    }();
    static const std::vector<double> w6 = [] {
        const double w1 = -0.117767998417887e1;
        const double w2 = 0.235573213359357e0;
        const double w3 = 0.784513610477560e0;
        const double w0 = 1.0 - 2.0 * (w1 + w2 + w3);
        return std::vector<double>{w3, w2, w1, w0, w1, w2, w3};
    }();
    static const std::vector<double> w8 = [] {
        // Kahan & Li, s15odr8.
        const double g[8] = {0.74167036435061295344822780,  -0.40910082580003159399730010,
                             0.19075471029623837995387626,  -0.57386247111608226665638773,
                             0.29906418130365592384446354,  0.33462491824529818378495798,
                             0.31529309239676659663205666,  -0.79688793935291635401978884};
        std::vector<double> w(15);
        for (int i = 0; i < 8; ++i) w[i] = g[i];
        for (int i = 0; i < 7; ++i) w[8 + i] = g[6 - i];
        double sum = 0.0;
        for (double v : w) sum += v;
        for (double& v : w) v /= sum;  // remove the residual rounding defect
        return w;
    }();
    switch (s) {
        case Scheme::strang: return w2;
        case Scheme::fourth_order: return w4;
        case Scheme::sixth_order: return w6;
        case Scheme::eighth_order: return w8;
    }
    throw validation_error("unknown scheme");
}

namespace {

template <typename Real>
struct FftApi;

template <>
struct FftApi<double> {
    using Plan = fftw_plan;
    using Cpx = fftw_complex;
    static Plan make(int n, Cpx* b, int sign) {
        return fftw_plan_dft_1d(n, b, b, sign, FFTW_ESTIMATE);
    }
    static void exec(Plan p) { fftw_execute(p); }
    static void destroy(Plan p) { fftw_destroy_plan(p); }
};

template <>
struct FftApi<long double> {
    using Plan = fftwl_plan;
    using Cpx = fftwl_complex;
    static Plan make(int n, Cpx* b, int sign) {
        return fftwl_plan_dft_1d(n, b, b, sign, FFTW_ESTIMATE);
    }
    static void exec(Plan p) { fftwl_execute(p); }
    static void destroy(Plan p) { fftwl_destroy_plan(p); }
};

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

template <typename Real>
class Stepper {
public:
    Stepper(const Grid& grid, double p, bool dealias)
        : grid_(grid), p_(static_cast<Real>(p)), n_(grid.points()), u_(grid.points()) {
        k2_.resize(n_);
        mask_.resize(n_);
        const double kcut = 2.0 / 3.0 * grid.k_max();
        for (std::size_t m = 0; m < n_; ++m) {
            const Real k = static_cast<Real>(grid.k(m));
            k2_[m] = k * k;
            mask_[m] = (!dealias || std::abs(grid.k(m)) <= kcut) ? Real(1) : Real(0);
        }
        auto* b = reinterpret_cast<typename FftApi<Real>::Cpx*>(u_.data());
        std::lock_guard<std::mutex> lock(planner_mutex());
        fwd_ = FftApi<Real>::make(static_cast<int>(n_), b, FFTW_FORWARD);
        inv_ = FftApi<Real>::make(static_cast<int>(n_), b, FFTW_BACKWARD);
    }
    ~Stepper() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        FftApi<Real>::destroy(fwd_);
        FftApi<Real>::destroy(inv_);
    }
    Stepper(const Stepper&) = delete;
    Stepper& operator=(const Stepper&) = delete;

    void load(const ComplexField& f) {
        for (std::size_t i = 0; i < n_; ++i)
            u_[i] = std::complex<Real>(static_cast<Real>(f[i].real()),
                                       static_cast<Real>(f[i].imag()));
    }
    void store(ComplexField& f) const {
        for (std::size_t i = 0; i < n_; ++i)
            f[i] = cplx{static_cast<double>(u_[i].real()), static_cast<double>(u_[i].imag())};
    }

    // Full composed step of signed size dt.
    void step(Real dt, const std::vector<double>& weights) {
        for (double w : weights) strang(static_cast<Real>(w) * dt);
    }

private:
    void nl_half(Real tau) {
        const Real half_pm1 = (p_ - Real(1)) / Real(2);
        for (std::size_t i = 0; i < n_; ++i) {
            const Real n2 = u_[i].real() * u_[i].real() + u_[i].imag() * u_[i].imag();
            const Real ph = std::pow(n2, half_pm1) * tau;
            u_[i] *= std::complex<Real>(std::cos(ph), std::sin(ph));
        }
    }
    void lin_full(Real dt) {
        FftApi<Real>::exec(fwd_);
        const Real scale = Real(1) / static_cast<Real>(n_);
        for (std::size_t m = 0; m < n_; ++m) {
            const Real ph = -k2_[m] * dt;
            u_[m] *= std::complex<Real>(std::cos(ph), std::sin(ph)) * (mask_[m] * scale);
        }
        FftApi<Real>::exec(inv_);
    }
    void strang(Real dt) {
        nl_half(dt / Real(2));
        lin_full(dt);
        nl_half(dt / Real(2));
    }

    Grid grid_;
    Real p_;
    std::size_t n_;
    std::vector<std::complex<Real>> u_;
    std::vector<Real> k2_, mask_;
    typename FftApi<Real>::Plan fwd_ = nullptr, inv_ = nullptr;
};

double gradient_norm(const ComplexField& u) { return norm_l2(spectral_derivative(u, 1)); }

template <typename Real>
Trajectory evolve_impl(const ComplexField& u0, double t_from, double t_to, double p,
                       const IntegratorConfig& cfg) {
    const auto& weights = scheme_weights(cfg.scheme);
    Stepper<Real> st(u0.grid, p, cfg.dealias);
    st.load(u0);

    Trajectory traj;
    ComplexField cur = u0;
    auto record = [&](double t) {
        traj.times.push_back(t);
        traj.snapshots.push_back(cur);
        traj.conserved_series.push_back(conserved(cur, p));
    };
    record(t_from);
    if (t_to == t_from) return traj;

    const double span = t_to - t_from;
    const long nsteps = std::max<long>(1, std::lround(std::abs(span) / cfg.dt));
    const Real dt_eff = static_cast<Real>(span / static_cast<double>(nsteps));
    const double grad_limit =
        (cfg.max_gradient > 0.0) ? cfg.max_gradient : 1e3 * (gradient_norm(u0) + 1e-12);

    for (long i = 1; i <= nsteps; ++i) {
        st.step(dt_eff, weights);
        const bool snap = (i % static_cast<long>(cfg.snapshot_stride) == 0) || i == nsteps;
        if (!snap) continue;
        st.store(cur);
        const double t = t_from + span * (static_cast<double>(i) / static_cast<double>(nsteps));
        if (!cur.all_finite() || gradient_norm(cur) > grad_limit)
            throw blowup_error(t, "gradient norm exceeded blow-up threshold");
        record(t);
    }
    return traj;
}

}  // namespace

ComplexField step(const ComplexField& u, double dt, double p, const IntegratorConfig& cfg) {
    cfg.validate();
    if (std::abs(dt) > 2.0 * cfg.dt) throw validation_error("|dt| exceeds 2x the base step");
    ComplexField out = u;
    if (cfg.precision == Precision::extended) {
        Stepper<long double> st(u.grid, p, cfg.dealias);
        st.load(u);
        st.step(static_cast<long double>(dt), scheme_weights(cfg.scheme));
        st.store(out);
    } else {
        Stepper<double> st(u.grid, p, cfg.dealias);
        st.load(u);
        st.step(dt, scheme_weights(cfg.scheme));
        st.store(out);
    }
    if (cfg.max_gradient > 0.0 && gradient_norm(out) > cfg.max_gradient)
        throw blowup_error(0.0, "gradient norm exceeded blow-up threshold");
    return out;
}

Trajectory evolve(const ComplexField& u0, double t_from, double t_to, double p,
                  const IntegratorConfig& cfg) {
    cfg.validate();
    if (!u0.all_finite()) throw validation_error("initial datum is not finite");
    if (cfg.precision == Precision::extended)
        return evolve_impl<long double>(u0, t_from, t_to, p, cfg);
    return evolve_impl<double>(u0, t_from, t_to, p, cfg);
}

DriftReport conservation_drift(const Trajectory& traj) {
    DriftReport rep;
    if (traj.size() <= 1) return rep;
    double m_lo = traj.conserved_series[0].mass, m_hi = m_lo;
    double e_lo = traj.conserved_series[0].energy, e_hi = e_lo;
    double p_lo = traj.conserved_series[0].momentum, p_hi = p_lo;
    double m_sum = 0.0, e_sum = 0.0;
    for (const auto& c : traj.conserved_series) {
        m_lo = std::min(m_lo, c.mass);
        m_hi = std::max(m_hi, c.mass);
        e_lo = std::min(e_lo, c.energy);
        e_hi = std::max(e_hi, c.energy);
        p_lo = std::min(p_lo, c.momentum);
        p_hi = std::max(p_hi, c.momentum);
        m_sum += c.mass;
        e_sum += c.energy;
    }
    const double n = static_cast<double>(traj.size());
    rep.mass_rel = (m_hi - m_lo) / std::abs(m_sum / n);
    rep.energy_rel = (e_hi - e_lo) / std::max(std::abs(e_sum / n), 1e-300);
    rep.momentum_abs = p_hi - p_lo;
    return rep;
}

}  // namespace nlsfam
