#pragma once

#include <cstddef>
#include <vector>

#include "nlsfam/grid.hpp"
#include "nlsfam/solitons.hpp"

namespace nlsfam {

enum class Scheme {
    strang,         // second order
    fourth_order,   // Yoshida triple jump
    sixth_order,    // Yoshida 7-stage composition
    eighth_order,   // Kahan-Li 15-stage composition
};

enum class Precision {
    double_prec,
    extended,  // long double internal state across the whole trajectory
};

struct IntegratorConfig {
    double dt = 1e-3;
    Scheme scheme = Scheme::strang;
    // Blow-up threshold on ||d_x u||_{L2}; <= 0 selects 1e3 x the initial value.
    double max_gradient = 0.0;
    bool dealias = true;
    Precision precision = Precision::double_prec;
    std::size_t snapshot_stride = 100;

    void validate() const;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<ComplexField> snapshots;
    std::vector<ConservedTriple> conserved_series;

    std::size_t size() const { return times.size(); }
};

// Signals blow-up detection (CLI exit code 3), carrying the failure time.
struct blowup_error : numeric_error {
    double t;
    explicit blowup_error(double t_fail, const std::string& msg) : numeric_error(msg), t(t_fail) {}
};

// One split step of i u_t + u_xx + |u|^{p-1} u = 0; dt may be negative
// (backward integration). |dt| <= 2 cfg.dt.
ComplexField step(const ComplexField& u, double dt, double p, const IntegratorConfig& cfg);

// Fixed-step integration from t_from to t_to (either direction); snapshots at
// cfg.snapshot_stride steps plus both endpoints.
Trajectory evolve(const ComplexField& u0, double t_from, double t_to, double p,
                  const IntegratorConfig& cfg);

struct DriftReport {
    double mass_rel = 0.0;
    double energy_rel = 0.0;
    double momentum_abs = 0.0;
};

DriftReport conservation_drift(const Trajectory& traj);

// Substep weights of the composition scheme (each weight scales one Strang step).
const std::vector<double>& scheme_weights(Scheme s);

}  // namespace nlsfam
