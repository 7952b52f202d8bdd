#include "nlsfam/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "nlsfam/diagnostics.hpp"
#include "nlsfam/io.hpp"
#include "nlsfam/linspec.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace nlsfam {

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw validation_error("config: " + where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw validation_error("config: unknown key '" + it.key() + "' in " + where);
}

Scheme scheme_from_string(const std::string& s) {
    if (s == "strang") return Scheme::strang;
    if (s == "fourth_order") return Scheme::fourth_order;
    if (s == "sixth_order") return Scheme::sixth_order;
    if (s == "eighth_order") return Scheme::eighth_order;
    throw validation_error("config: unknown scheme '" + s + "'");
}

std::string scheme_to_string(Scheme s) {
    switch (s) {
        case Scheme::strang: return "strang";
        case Scheme::fourth_order: return "fourth_order";
        case Scheme::sixth_order: return "sixth_order";
        case Scheme::eighth_order: return "eighth_order";
    }
    return "strang";
}

Precision precision_from_string(const std::string& s) {
    if (s == "double") return Precision::double_prec;
    if (s == "extended") return Precision::extended;
    throw validation_error("config: unknown precision '" + s + "'");
}

struct RunContext {
    ExperimentConfig cfg;
    SolitonFamily fam;
    Grid grid{80.0, 2048};
    LinearizedSpectrum spec;
    InteractionScales scales;
    fs::path dir;
    std::vector<std::string> outputs;
    bool verbose = false;

    void note(const std::string& name) { outputs.push_back(name); }
    std::string path(const std::string& name) { return (dir / name).string(); }
};

RunContext make_context(const ExperimentConfig& cfg, bool verbose) {
    cfg.validate();
    RunContext ctx{cfg, SolitonFamily{cfg.p, cfg.solitons}, Grid{cfg.L, cfg.M},
                   compute_eigenmode(cfg.p, Grid{60.0, 1024}), InteractionScales{},
                   fs::path(cfg.output_dir), {}, verbose};
    ctx.fam.validate();
    ctx.scales = interaction_scales(ctx.fam, ctx.spec);
    fs::create_directories(ctx.dir);
    return ctx;
}

void write_manifest(RunContext& ctx, const std::string& command, json extra = json::object()) {
    json m;
    m["command"] = command;
    m["config_hash"] = ctx.cfg.hash();
    m["constants"] = {{"e0", ctx.spec.e0},
                      {"eta0", ctx.spec.eta0},
                      {"sigma0", ctx.scales.sigma0},
                      {"gamma", ctx.scales.gamma}};
    std::sort(ctx.outputs.begin(), ctx.outputs.end());
    m["outputs"] = ctx.outputs;
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    std::ofstream out(ctx.path("manifest.json"));
    out << m.dump(2) << "\n";
}

int cmd_ground_state(RunContext& ctx) {
    json summary = json::array();
    std::set<double> cs;
    for (std::size_t k = 0; k < ctx.fam.members.size(); ++k) {
        const double c = ctx.fam.members[k].c;
        if (!cs.insert(c).second) continue;
        const ComplexField q = ground_state(ctx.cfg.p, c, ctx.grid);
        const ComplexField qxx = spectral_derivative(q, 2);
        double res = 0.0, peak = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            const double v = q[i].real();
            res = std::max(res, std::abs(qxx[i].real() + std::pow(v, ctx.cfg.p) - c * v));
            peak = std::max(peak, v);
        }
        char name[48];
        std::snprintf(name, sizeof name, "qc_%02zu.bin", cs.size() - 1);
        save_field(ctx.path(name), q, 0.0);
        ctx.note(name);
        ctx.note(std::string(name) + ".json");
        summary.push_back({{"c", c},
                           {"file", name},
                           {"peak", peak},
                           {"mass", conserved(q, ctx.cfg.p).mass},
                           {"ode_residual_inf", res}});
    }
    std::ofstream out(ctx.path("ground_state.json"));
    out << summary.dump(2) << "\n";
    ctx.note("ground_state.json");
    write_manifest(ctx, "ground-state");
    return 0;
}

int cmd_spectrum(RunContext& ctx) {
    save_field(ctx.path("y1.bin"), ctx.spec.Y1, 0.0);
    save_field(ctx.path("y2.bin"), ctx.spec.Y2, 0.0);
    ctx.note("y1.bin");
    ctx.note("y1.bin.json");
    ctx.note("y2.bin");
    ctx.note("y2.bin.json");

    // independent dense eigensolve per requested c, against the scaling law
    const Grid dense_grid{80.0, 512};
    std::vector<std::vector<double>> rows;
    std::set<double> cs;
    for (const auto& s : ctx.fam.members) {
        if (!cs.insert(s.c).second) continue;
        const double ec_dense = dense_eigenvalue_at(ctx.cfg.p, s.c, dense_grid);
        const double ec_scaled = s.c * ctx.spec.e0;
        rows.push_back({s.c, ec_scaled, ec_dense, ec_dense / ec_scaled});
    }
    write_csv(ctx.path("scaling.csv"), {"c", "ec_scaling_law", "ec_dense", "ratio"}, rows);
    ctx.note("scaling.csv");
    write_manifest(ctx, "spectrum",
                   {{"e0", ctx.spec.e0},
                    {"eta0", ctx.spec.eta0},
                    {"normalization", -2.0 * inner_real(ctx.spec.Y1, ctx.spec.Y2)}});
    return 0;
}

int cmd_evolve(RunContext& ctx) {
    const ComplexField u0 = soliton_sum(ctx.cfg.t0, ctx.fam, ctx.grid);
    const Trajectory traj = evolve(u0, ctx.cfg.t0, ctx.cfg.Sn, ctx.cfg.p, ctx.cfg.integrator);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < traj.size(); ++i)
        rows.push_back({traj.times[i], traj.conserved_series[i].mass,
                        traj.conserved_series[i].energy, traj.conserved_series[i].momentum});
    write_csv(ctx.path("conserved.csv"), {"t", "mass", "energy", "momentum"}, rows);
    ctx.note("conserved.csv");
    save_field(ctx.path("final.bin"), traj.snapshots.back(), traj.times.back());
    ctx.note("final.bin");
    ctx.note("final.bin.json");
    const DriftReport d = conservation_drift(traj);
    write_manifest(ctx, "evolve",
                   {{"drift", {{"mass_rel", d.mass_rel},
                               {"energy_rel", d.energy_rel},
                               {"momentum_abs", d.momentum_abs}}}});
    return 0;
}

void dump_trajectory(RunContext& ctx, const std::string& subdir, const Trajectory& traj) {
    fs::create_directories(ctx.dir / subdir);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "%s/snap_%05zu.bin", subdir.c_str(), i);
        save_field(ctx.path(name), traj.snapshots[i], traj.times[i]);
        ctx.note(name);
        ctx.note(std::string(name) + ".json");
    }
}

int cmd_construct(RunContext& ctx) {
    const ModeSet modes(ctx.spec, ctx.fam);
    const SegmentPlan plan =
        SegmentPlan::make(ctx.cfg.t0, ctx.cfg.Sn, modes.e_max(), ctx.cfg.integrator.dt,
                          ctx.cfg.integrator.snapshot_stride, ctx.cfg.sn_schedule);
    const BaseConstruction base = build_base_multisoliton(ctx.fam, ctx.cfg.p, plan, ctx.grid,
                                                          modes, ctx.cfg.integrator.scheme);
    dump_trajectory(ctx, "traj_phi", base.trajectory);
    {
        std::vector<std::vector<double>> rows;
        for (const auto& [t, v] : base.residual_series) rows.push_back({t, v});
        write_csv(ctx.path("residual_phi.csv"), {"t", "phi_minus_R_h1"}, rows);
        ctx.note("residual_phi.csv");
    }
    json stage_info = json::array();
    const bool perturbed =
        std::any_of(ctx.cfg.amplitudes.begin(), ctx.cfg.amplitudes.end(),
                    [](double a) { return a != 0.0; });
    if (perturbed) {
        const auto stages = build_family(ctx.fam, ctx.cfg.p, ctx.cfg.amplitudes, plan, ctx.grid,
                                         modes, ctx.cfg.integrator.scheme);
        const Trajectory* phi_prev = &base.trajectory;
        std::vector<std::vector<double>> amp_rows;
        for (std::size_t s = 0; s < stages.size(); ++s) {
            const auto& st = stages[s];
            char sub[32];
            std::snprintf(sub, sizeof sub, "traj_u_stage%zu", s + 1);
            dump_trajectory(ctx, sub, st.result.trajectory);
            char rname[48];
            std::snprintf(rname, sizeof rname, "residual_stage%zu.csv", s + 1);
            std::vector<std::vector<double>> rows;
            for (const auto& [t, v] : st.result.residual_series) rows.push_back({t, v});
            write_csv(ctx.path(rname), {"t", "z_h1"}, rows);
            ctx.note(rname);
            json info;
            info["soliton"] = st.soliton;
            info["exit_time"] = st.result.exit_time;
            info["theta_margin"] = st.result.theta_margin;
            info["a"] = st.result.a;
            info["b"] = st.result.b;
            stage_info.push_back(info);
            if (ctx.cfg.amplitudes[st.soliton] != 0.0) {
                const double span = ctx.cfg.Sn - ctx.cfg.t0;
                const AmplitudeFit fit =
                    recover_amplitude(st.result.trajectory, *phi_prev, st.soliton, modes,
                                      ctx.cfg.t0 + 0.1 * span, ctx.cfg.Sn - 0.1 * span);
                amp_rows.push_back({static_cast<double>(s + 1),
                                    static_cast<double>(st.soliton), fit.A, fit.rate, fit.rms});
            }
            phi_prev = &stages[s].result.trajectory;
        }
        write_csv(ctx.path("recovered_amplitudes.csv"),
                  {"stage", "soliton", "A_fit", "rate_fit", "log_rms"}, amp_rows);
        ctx.note("recovered_amplitudes.csv");
    }
    write_manifest(ctx, "construct",
                   {{"stages", stage_info},
                    {"plan_boundaries", base.plan.boundaries},
                    {"junction_jumps", base.junction_jumps},
                    {"drift", {{"mass_rel", base.drift.mass_rel},
                               {"energy_rel", base.drift.energy_rel},
                               {"momentum_abs", base.drift.momentum_abs}}}});
    return 0;
}

Trajectory load_trajectory(RunContext& ctx, const std::string& subdir) {
    const fs::path d = ctx.dir / subdir;
    if (!fs::is_directory(d))
        throw validation_error("diagnose: missing trajectory directory " + d.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(d))
        if (e.path().extension() == ".bin") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    Trajectory traj;
    for (const auto& f : files) {
        double t = 0.0;
        traj.snapshots.push_back(load_field(f.string(), &t));
        traj.times.push_back(t);
        if (traj.snapshots.back().grid != traj.snapshots.front().grid)
            throw validation_error("diagnose: mismatched grids in " + subdir);
    }
    if (traj.times.empty()) throw validation_error("diagnose: empty trajectory " + subdir);
    return traj;
}

int cmd_diagnose(RunContext& ctx) {
    const Trajectory phi_traj = load_trajectory(ctx, "traj_phi");
    const Trajectory u_traj = load_trajectory(ctx, "traj_u_stage1");
    if (u_traj.snapshots.front().grid != phi_traj.snapshots.front().grid)
        throw validation_error("diagnose: u and phi grids differ");
    if (u_traj.times.size() != phi_traj.times.size())
        throw validation_error("diagnose: u and phi snapshot counts differ");
    const ModeSet modes(ctx.spec, ctx.fam);
    ShootingProblem prob;
    prob.family = ctx.fam;
    prob.p = ctx.cfg.p;
    prob.j = family_ordering(ctx.fam)[0];
    prob.A_j = ctx.cfg.amplitudes[prob.j];
    prob.scales = ctx.scales;
    prob.grid = u_traj.snapshots.front().grid;

    const ProjectionSeries proj = projections(u_traj, phi_traj, prob, modes);
    const std::size_t N = ctx.fam.members.size();
    {
        std::vector<std::string> header{"t"};
        for (std::size_t k = 0; k < N; ++k) header.push_back("alpha_plus_" + std::to_string(k));
        for (std::size_t k = 0; k < N; ++k) header.push_back("alpha_minus_" + std::to_string(k));
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < proj.times.size(); ++i) {
            std::vector<double> row{proj.times[i]};
            row.insert(row.end(), proj.alpha_plus[i].begin(), proj.alpha_plus[i].end());
            row.insert(row.end(), proj.alpha_minus[i].begin(), proj.alpha_minus[i].end());
            rows.push_back(std::move(row));
        }
        write_csv(ctx.path("projections.csv"), header, rows);
        ctx.note("projections.csv");
    }

    std::vector<double> ts, Hs, zn, omega_n, transport_n, gap_n;
    std::vector<std::vector<double>> energy_rows;
    const double ej = modes.e(prob.j);
    for (std::size_t i = 0; i < u_traj.times.size(); ++i) {
        const double t = u_traj.times[i];
        const Grid& g = u_traj.snapshots.front().grid;
        ComplexField z = u_traj.snapshots[i];
        ComplexField rj(g);
        if (prob.A_j != 0.0) {
            const ComplexField yj = modes.plus(prob.j, t, g);
            const double amp = prob.A_j * std::exp(-ej * t);
            for (std::size_t q = 0; q < rj.size(); ++q) rj[q] = amp * yj[q];
        }
        for (std::size_t q = 0; q < z.size(); ++q)
            z[q] -= phi_traj.snapshots[i][q] + rj[q];
        const CutoffSet cut = cutoffs(t, ctx.fam, g);
        const EnergyReport er =
            energy_report(z, phi_traj.snapshots[i], rj, t, ctx.fam, cut, ctx.cfg.p);
        const OmegaReport om = omega_source(t, phi_traj.snapshots[i], prob, modes);
        const double tr = transport_residual(phi_traj.snapshots[i], cut, ctx.cfg.p);
        ts.push_back(t);
        Hs.push_back(er.H);
        zn.push_back(norm_h1(z));
        omega_n.push_back(om.omega_h1);
        transport_n.push_back(tr);
        gap_n.push_back(er.Hform_ztilde - er.Hform_z);
        energy_rows.push_back({t, er.H, er.Hform_z, er.Hform_ztilde, zn.back(), om.omega_h1,
                               om.form_diff_linf, tr});
    }
    write_csv(ctx.path("energy.csv"),
              {"t", "H", "Hform_z", "Hform_ztilde", "z_h1", "omega_h1", "omega_form_diff",
               "transport_hm1"},
              energy_rows);
    ctx.note("energy.csv");

    const DHdtReport dh = dhdt_check(ts, Hs, zn, ej, ctx.scales.gamma);
    {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < dh.times.size(); ++i)
            rows.push_back({dh.times[i], dh.dHdt[i], dh.majorant_unit[i]});
        write_csv(ctx.path("dhdt.csv"), {"t", "dHdt", "majorant_unit"}, rows);
        ctx.note("dhdt.csv");
    }

    json fits;
    const AmplitudeFit fz = fit_rate(ts, zn);
    const AmplitudeFit fo = fit_rate(ts, omega_n);
    fits["z_h1"] = {{"rate", fz.rate}, {"amplitude", fz.A}, {"log_rms", fz.rms}};
    fits["omega_h1"] = {{"rate", fo.rate}, {"amplitude", fo.A}, {"log_rms", fo.rms}};
    for (std::size_t k = 0; k < N; ++k) {
        std::vector<double> am, ap;
        for (std::size_t i = 0; i < proj.times.size(); ++i) {
            am.push_back(proj.alpha_minus[i][k]);
            ap.push_back(proj.alpha_plus[i][k]);
        }
        const AmplitudeFit fm = fit_rate(proj.times, am);
        const AmplitudeFit fp = fit_rate(proj.times, ap);
        fits["alpha_minus_" + std::to_string(k)] = {{"rate", fm.rate}, {"amplitude", fm.A}};
        fits["alpha_plus_" + std::to_string(k)] = {{"rate", fp.rate}, {"amplitude", fp.A}};
    }
    fits["dhdt_max_ratio"] = dh.max_ratio;
    std::ofstream out(ctx.path("diagnose.json"));
    out << fits.dump(2) << "\n";
    ctx.note("diagnose.json");
    write_manifest(ctx, "diagnose");
    return 0;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw validation_error(std::string("config: invalid JSON: ") + e.what());
    }
    check_keys(j,
               {"version", "p", "solitons", "amplitudes", "grid", "times", "integrator",
                "shooting", "output_dir", "seed"},
               "root");
    ExperimentConfig cfg;
    try {
        if (j.contains("version")) cfg.version = j["version"].get<int>();
        if (cfg.version != 1) throw validation_error("config: unsupported version");
        if (j.contains("p")) cfg.p = j["p"].get<double>();
        if (j.contains("solitons")) {
            cfg.solitons.clear();
            for (const auto& s : j["solitons"]) {
                check_keys(s, {"c", "v", "gamma", "x0"}, "solitons[]");
                SolitonParams sp;
                sp.c = s.at("c").get<double>();
                sp.v = s.at("v").get<double>();
                if (s.contains("gamma")) sp.gamma = s["gamma"].get<double>();
                if (s.contains("x0")) sp.x0 = s["x0"].get<double>();
                cfg.solitons.push_back(sp);
            }
        }
        cfg.amplitudes.assign(cfg.solitons.size(), 0.0);
        if (j.contains("amplitudes")) {
            cfg.amplitudes = j["amplitudes"].get<std::vector<double>>();
            if (cfg.amplitudes.size() != cfg.solitons.size())
                throw validation_error("config: amplitudes length must match solitons");
        }
        if (j.contains("grid")) {
            check_keys(j["grid"], {"L", "M"}, "grid");
            cfg.L = j["grid"].at("L").get<double>();
            cfg.M = j["grid"].at("M").get<std::size_t>();
        }
        if (j.contains("times")) {
            check_keys(j["times"], {"t0", "Sn", "Sn_schedule"}, "times");
            cfg.t0 = j["times"].at("t0").get<double>();
            cfg.Sn = j["times"].at("Sn").get<double>();
            if (j["times"].contains("Sn_schedule"))
                cfg.sn_schedule = j["times"]["Sn_schedule"].get<std::vector<double>>();
        }
        if (j.contains("integrator")) {
            const auto& ji = j["integrator"];
            check_keys(ji, {"dt", "scheme", "snapshot_stride", "precision", "dealias",
                            "max_gradient"},
                       "integrator");
            if (ji.contains("dt")) cfg.integrator.dt = ji["dt"].get<double>();
            if (ji.contains("scheme"))
                cfg.integrator.scheme = scheme_from_string(ji["scheme"].get<std::string>());
            if (ji.contains("snapshot_stride"))
                cfg.integrator.snapshot_stride = ji["snapshot_stride"].get<std::size_t>();
            if (ji.contains("precision"))
                cfg.integrator.precision =
                    precision_from_string(ji["precision"].get<std::string>());
            if (ji.contains("dealias")) cfg.integrator.dealias = ji["dealias"].get<bool>();
            if (ji.contains("max_gradient"))
                cfg.integrator.max_gradient = ji["max_gradient"].get<double>();
        }
        if (j.contains("shooting")) {
            const auto& js = j["shooting"];
            check_keys(js, {"newton_tol", "max_iter", "fd_increment"}, "shooting");
            if (js.contains("newton_tol")) cfg.shooting.newton_tol = js["newton_tol"].get<double>();
            if (js.contains("max_iter")) cfg.shooting.max_iter = js["max_iter"].get<int>();
            if (js.contains("fd_increment"))
                cfg.shooting.fd_increment = js["fd_increment"].get<double>();
        }
        if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<long>();
    } catch (const json::exception& e) {
        throw validation_error(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string ExperimentConfig::canonical_json() const {
    json j;
    j["version"] = version;
    j["p"] = p;
    j["solitons"] = json::array();
    for (const auto& s : solitons)
        j["solitons"].push_back({{"c", s.c}, {"v", s.v}, {"gamma", s.gamma}, {"x0", s.x0}});
    j["amplitudes"] = amplitudes;
    j["grid"] = {{"L", L}, {"M", M}};
    j["times"] = {{"t0", t0}, {"Sn", Sn}, {"Sn_schedule", sn_schedule}};
    j["integrator"] = {{"dt", integrator.dt},
                       {"scheme", scheme_to_string(integrator.scheme)},
                       {"snapshot_stride", integrator.snapshot_stride},
                       {"precision",
                        integrator.precision == Precision::extended ? "extended" : "double"},
                       {"dealias", integrator.dealias},
                       {"max_gradient", integrator.max_gradient}};
    j["shooting"] = {{"newton_tol", shooting.newton_tol},
                     {"max_iter", shooting.max_iter},
                     {"fd_increment", shooting.fd_increment}};
    j["output_dir"] = output_dir;
    j["seed"] = seed;
    return j.dump();
}

std::string ExperimentConfig::hash() const {
    // the hash identifies the experiment; the output location is not part of it
    ExperimentConfig c = *this;
    c.output_dir.clear();
    return fnv1a_hex(c.canonical_json());
}

void ExperimentConfig::validate() const {
    SolitonFamily fam{p, solitons};
    fam.validate();
    if (amplitudes.size() != solitons.size())
        throw validation_error("config: amplitudes length must match solitons");
    if (!(L > 0.0) || M < 16) throw validation_error("config: grid requires L > 0 and M >= 16");
    if (!(Sn > t0)) throw validation_error("config: Sn must exceed t0");
    if (!(t0 > 0.0)) throw validation_error("config: t0 must be positive");
    integrator.validate();
    if (!(shooting.newton_tol > 0.0) || !(shooting.fd_increment > 0.0) ||
        shooting.max_iter < 1)
        throw validation_error("config: shooting tolerances must be positive");
    for (std::size_t i = 0; i < sn_schedule.size(); ++i) {
        if (sn_schedule[i] <= t0 || sn_schedule[i] >= Sn)
            throw validation_error("config: Sn_schedule anchors must lie in (t0, Sn)");
        if (i > 0 && sn_schedule[i] <= sn_schedule[i - 1])
            throw validation_error("config: Sn_schedule must be strictly increasing");
    }
}

int run_command(const std::string& command, const ExperimentConfig& cfg, int threads,
                bool verbose, std::string& error_json) {
    (void)threads;  // recorded for interface compatibility; modules run serially
    try {
        RunContext ctx = make_context(cfg, verbose);
        if (command == "ground-state") return cmd_ground_state(ctx);
        if (command == "spectrum") return cmd_spectrum(ctx);
        if (command == "evolve") return cmd_evolve(ctx);
        if (command == "construct") return cmd_construct(ctx);
        if (command == "diagnose") return cmd_diagnose(ctx);
        throw validation_error("unknown command: " + command);
    } catch (const validation_error& e) {
        error_json = json{{"code", 2}, {"error", e.what()}}.dump();
        return 2;
    } catch (const numeric_error& e) {
        error_json = json{{"code", 3}, {"error", e.what()}}.dump();
        return 3;
    }
}

}  // namespace nlsfam
