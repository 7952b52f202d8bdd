#pragma once

#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "nlsfam/evolve.hpp"
#include "nlsfam/grid.hpp"
#include "nlsfam/linspec.hpp"
#include "nlsfam/solitons.hpp"

namespace nlsfam {

struct InteractionScales {
    double sigma0 = 0.0;  // min{eta0 sqrt(c_min), e0^{2/3} c_min, c_min, velocity gaps}
    double gamma = 0.0;   // sigma0^{3/2} / 1e6
};

InteractionScales interaction_scales(const SolitonFamily& fam, const LinearizedSpectrum& spec);

// Backward-window decomposition. The backward flow amplifies unstable content
// at rate e_max, so a single solve is limited to windows with
// e^{e_max W} <= 1e8; longer windows are reached by continuation: the window
// is split at the schedule anchors and each sub-window is solved with its own
// terminal correction, chained right to left.
struct SegmentPlan {
    double t0 = 0.0;
    double Sn = 0.0;
    double dt = 1e-3;
    std::size_t stride = 100;          // snapshot stride in steps
    std::vector<double> boundaries;    // descending: Sn = b[0] > b[1] > ... = t0

    std::size_t nseg() const { return boundaries.size() - 1; }

    // Builds the plan; throws when Sn - t0 exceeds the conditioning cap and no
    // schedule is given. A non-empty schedule lists the continuation anchors
    // (strictly increasing, within (t0, Sn)); sub-windows wider than
    // target_width are subdivided further.
    static SegmentPlan make(double t0, double Sn, double e_max, double dt, std::size_t stride,
                            const std::vector<double>& sn_schedule, double target_width = 0.8);
};

double conditioning_cap(double e_max);  // log(1e8)/e_max

// Cached evaluators for Y_k^{+/-}(t,x) of every soliton in the family.
class ModeSet {
public:
    ModeSet(const LinearizedSpectrum& spec, const SolitonFamily& fam);

    ComplexField plus(std::size_t k, double t, const Grid& g) const;
    ComplexField minus(std::size_t k, double t, const Grid& g) const;
    double e(std::size_t k) const { return ek_[k]; }
    double e_max() const;
    double e0() const { return e0_; }

private:
    TrigSeries y1s_, y2s_;
    SolitonFamily fam_;
    std::vector<double> ek_;
    double e0_;
    // snapshot-time cache of mode fields, shared between copies (the mode set
    // is immutable after construction)
    struct ModeCache;
    std::shared_ptr<ModeCache> cache_;
};

struct ShootingProblem {
    SolitonFamily family;
    double p = 7.0;
    // 0-based index of the perturbed soliton; == family.size() for the base
    // construction (no A-term, all directions shot).
    std::size_t j = 0;
    double A_j = 0.0;
    SegmentPlan plan;
    std::vector<std::size_t> K;     // {k : c_k > c_j}, the shot directions
    std::vector<std::size_t> Jset;  // {k : c_k <= c_j}
    InteractionScales scales;
    Grid grid{80.0, 2048};
    Scheme scheme = Scheme::sixth_order;
    // Reference phi as stage levels: per completed stage, the per-segment
    // start vectors that reproduce its trajectory bitwise.
    std::vector<std::vector<ComplexField>> phi_levels;

    void validate(const ModeSet& modes) const;
    std::size_t k0() const { return K.size(); }
};

struct ShootingResult {
    std::vector<double> a;  // measured alpha_k^-(Sn), k in K
    std::vector<double> b;  // final-data coefficients
    Trajectory trajectory;  // assembled u snapshots (double precision)
    double exit_time = 0.0;
    std::vector<std::pair<double, double>> residual_series;  // (t, ||z||_H1)
    std::vector<double> alpha_times;
    std::vector<std::vector<double>> alpha_minus_series;  // [snapshot][k], all k
    std::vector<std::vector<double>> alpha_plus_series;
    std::vector<double> s_series;  // Im int conj(u - phi) Y_j^- per snapshot
    double theta_margin = 0.0;     // 2 (min_{k in K} e_k - e_j - 2 gamma)
    std::vector<ComplexField> seg_starts;  // the new level's corrected starts
    std::vector<double> junction_jumps;    // |correction| per segment, final sweep
};

// u_n(Sn) = phi(Sn) + A_j e^{-e_j Sn} Y_j^+(Sn) + sum_{k in K} b_k Y_k^+(Sn),
// assembled in double precision (the solver itself keeps the perturbation in
// its own exactly-representable level).
ComplexField final_data(const ShootingProblem& prob, const std::vector<double>& b,
                        const ModeSet& modes, const ComplexField& phi_sn);

// Phi[k][l] = d alpha_k^-(Sn) / d b_l = Im int conj(Y_l^+(Sn)) Y_k^-(Sn).
std::vector<std::vector<double>> modulation_matrix(const ShootingProblem& prob,
                                                   const ModeSet& modes);

// b = Phi^{-1} a with diagonal-dominance guards: ||Phi - Id|| < 1/2, ||b|| <= 2||a||.
std::vector<double> invert_final_data(const ShootingProblem& prob, const ModeSet& modes,
                                      const std::vector<double>& a);

struct ExitReport {
    double T = 0.0;
    std::vector<double> times;
    std::vector<double> z_ratio;  // ||z(t)||_H1 / e^{-(e_j+gamma) t}
    std::vector<double> N_vals;   // || e^{(e_j+2 gamma) t} alpha^-(t) ||^2
};

// Uncorrected backward march from Sn with final data built from a; returns the
// first time (from the right) at which either admissibility ball condition
// fails, or t0 when none does.
ExitReport exit_time(const ShootingProblem& prob, const std::vector<double>& a,
                     const ModeSet& modes);

// Segmented two-sweep shooting for the problem's new perturbation level.
ShootingResult solve_shooting(const ShootingProblem& prob, const ModeSet& modes);

struct BaseConstruction {
    Trajectory trajectory;  // assembled phi snapshots
    SegmentPlan plan;
    std::vector<ComplexField> seg_starts;
    std::vector<std::pair<double, double>> residual_series;  // (t, ||phi - R||_H1)
    std::vector<double> junction_jumps;
    DriftReport drift;
};

BaseConstruction build_base_multisoliton(const SolitonFamily& fam, double p,
                                         const SegmentPlan& plan, const Grid& grid,
                                         const ModeSet& modes, Scheme scheme = Scheme::sixth_order);

struct StageOutcome {
    std::size_t soliton = 0;  // 0-based index sigma(stage)
    ShootingResult result;
};

// Full family pipeline: sort by ascending c (stable), then one solve_shooting per
// stage, each riding on all previous levels. amplitudes[k] is A_{k+1} of
// soliton k in the family's original order.
std::vector<StageOutcome> build_family(const SolitonFamily& fam, double p,
                                       const std::vector<double>& amplitudes,
                                       const SegmentPlan& plan, const Grid& grid,
                                       const ModeSet& modes, Scheme scheme = Scheme::sixth_order);

// As above but riding on an already-computed base construction.
std::vector<StageOutcome> build_family(const SolitonFamily& fam, double p,
                                       const std::vector<double>& amplitudes,
                                       const SegmentPlan& plan, const Grid& grid,
                                       const ModeSet& modes, Scheme scheme,
                                       const BaseConstruction* base);

// Stable sort indices by ascending c, ties by original index.
std::vector<std::size_t> family_ordering(const SolitonFamily& fam);

struct AmplitudeFit {
    double A = 0.0;
    double rate = 0.0;
    double rms = 0.0;  // fit residual in log space
};

// s(t) = Im int conj(u - phi) Y_j^-(t) = A e^{-e_j t} (1 + o(1)); log-linear
// fit over times in [w_lo, w_hi].
AmplitudeFit recover_amplitude(const Trajectory& u_traj, const Trajectory& phi_traj,
                               std::size_t j, const ModeSet& modes, double w_lo, double w_hi);

// Log-linear fit utility: returns (amplitude, rate, rms) for y ~ A e^{-rate t}.
AmplitudeFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y);

}  // namespace nlsfam
