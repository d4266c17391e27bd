/*
 Copyright 2026 The sirnc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// Command implementations and their parameter schemas.

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "sirnc/cli.hpp"
#include "sirnc/closedform.hpp"
#include "sirnc/control.hpp"
#include "sirnc/multiobj.hpp"
#include "sirnc/ode.hpp"
#include "sirnc/perturbation.hpp"

namespace sirnc::cli {

namespace {

[[noreturn]] void spec_error(const std::string& msg) { throw Error(ErrorCode::SpecError, msg); }

const std::vector<ParamDef> kPaperCostParams = {
    {"A1", "100", "terminal cost scale"},
    {"a1", "10", "terminal cost exponent rate"},
    {"alpha_mode", "constant", "terminal target: constant or ramp"},
    {"alpha_constant", "0.1", "alpha in constant mode"},
    {"alpha_t_max", "0", "time at which the ramp reaches 0.1; 0 uses the uncontrolled peak time"},
    {"lockdown_cost", "0,1e4,1e5", "running cost of each contact level"},
    {"a2", "1e4", "switching cost scale"},
    {"A2", "100", "testing cost per infected and unit of removal rate"},
    {"A3", "100", "testing set-up cost, divided by the epoch"},
    {"gamma0", "1/15", "natural removal rate"},
    {"A4", "10", "infection cost scale"},
    {"a3", "1.2", "infection cost exponent"},
    {"lookahead", "3", "planning depth (epochs)"},
    {"natural_lambda", "0.25", "infection rate of the uncontrolled reference"},
    {"s0", "9999", "initial susceptible"},
    {"i0", "1", "initial infected"},
    {"step", "1", "Euler step (time units per epoch)"},
    {"initial_level", "0", "contact level in force before the first epoch"},
};

std::vector<ParamDef> with(std::vector<ParamDef> base, const std::vector<ParamDef>& extra)
{
    for (const auto& d : extra) {
        auto it = std::find_if(base.begin(), base.end(), [&](const ParamDef& b) { return b.key == d.key; });
        if (it != base.end()) {
            *it = d;
        } else {
            base.push_back(d);
        }
    }
    return base;
}

const std::vector<ParamDef> kGridParams = {
    {"s_min", "0", "grid lower bound for S"},
    {"s_max", "1e4", "grid upper bound for S"},
    {"n_s", "100", "grid points for S (linear)"},
    {"i_min", "1", "grid lower bound for I"},
    {"i_max", "1e4", "grid upper bound for I"},
    {"n_i", "160", "grid points for I (logarithmic)"},
};

std::vector<CommandInfo> build_commands()
{
    std::vector<CommandInfo> c;
    c.push_back({"trajectory",
                 "closed-form S, I, R; lockdown window and linear removal ramp use the time-varying solver",
                 {
                     {"lambda", "0.25", "infection rate"},
                     {"gamma", "1/15", "removal rate (gamma_0 when gamma_slope != 0)"},
                     {"beta", "1/15", "recovery rate feeding R"},
                     {"s0", "9999", "initial susceptible"},
                     {"i0", "1", "initial infected"},
                     {"r0", "0", "initial recovered"},
                     {"horizon", "200", "end time"},
                     {"step", "0.5", "output spacing"},
                     {"lockdown_start", "0", "start of the reduced-contact window"},
                     {"lockdown_duration", "0", "length of the window (0: none)"},
                     {"lockdown_factor", "1", "multiplier on lambda inside the window"},
                     {"gamma_slope", "0", "gamma(t) = gamma (1 + gamma_slope t)"},
                 }});
    c.push_back({"compare-sir",
                 "classic SIR (RK4) against SIR-NC (closed form) from the same start",
                 {
                     {"lambda", "0.25", "infection rate"},
                     {"gamma", "1/15", "removal rate"},
                     {"s0", "9999", "initial susceptible"},
                     {"i0", "1", "initial infected"},
                     {"horizon", "200", "end time"},
                     {"step", "0.01", "RK4 step"},
                     {"sample", "0.5", "output spacing (multiple of step)"},
                 }});
    c.push_back({"peak-sweep",
                 "peak time and height over a parameter sweep (gamma1, rho or nu)",
                 {
                     {"variable", "gamma1", "gamma1 (extra removal), rho (gamma/lambda) or nu (imported rate)"},
                     {"start", "0", "first sweep value"},
                     {"stop", "0.2", "last sweep value"},
                     {"points", "201", "number of sweep values"},
                     {"lambda", "0.25", "infection rate"},
                     {"gamma", "1/15", "base removal rate"},
                     {"s0", "9999", "initial susceptible"},
                     {"i0", "1", "initial infected"},
                     {"horizon", "400", "peak search window (nu sweeps)"},
                     {"step", "0.01", "peak scan step (nu sweeps)"},
                 }});
    c.push_back({"imported",
                 "S and I with an external infection inflow nu S",
                 {
                     {"lambda", "0.25", "infection rate"},
                     {"gamma", "1/15", "removal rate"},
                     {"nu", "0.0025", "imported infection rate"},
                     {"s0", "9999", "initial susceptible"},
                     {"i0", "1", "initial infected"},
                     {"horizon", "150", "end time"},
                     {"step", "0.5", "output spacing"},
                 }});
    c.push_back({"communities",
                 "two interacting communities integrated by RK4",
                 {
                     {"n_a", "10000", "initial size of a (one infected)"},
                     {"n_b", "10000", "initial size of b (one infected)"},
                     {"lambda_a", "0.25", "infection rate within a"},
                     {"lambda_b", "0.25", "infection rate within b"},
                     {"gamma_a", "1/15", "removal rate in a"},
                     {"gamma_b", "1/15", "removal rate in b"},
                     {"lambda_ab", "0", "infection of a by b"},
                     {"lambda_ba", "0", "infection of b by a"},
                     {"lambda_cross", "0", "if > 0, sets lambda_ab = lambda_ba to this value"},
                     {"coupling", "0", "if > 0, sets lambda_ab = coupling lambda_a, lambda_ba = coupling lambda_b"},
                     {"horizon", "300", "end time"},
                     {"step", "0.01", "RK4 step"},
                     {"sample", "0.5", "output spacing (multiple of step)"},
                 }});
    c.push_back({"vital",
                 "SIR-NC with births and natural deaths, integrated by RK4",
                 {
                     {"lambda", "0.25", "infection rate"},
                     {"gamma", "1/15", "removal rate"},
                     {"beta", "0.98/15", "recovery rate"},
                     {"s0", "9999", "initial susceptible"},
                     {"i0", "1", "initial infected"},
                     {"kappa", "0", "net birth rate of susceptibles"},
                     {"upsilon1", "0.001", "births from infected"},
                     {"upsilon2", "0.001", "births from recovered"},
                     {"nu1", "0.001", "natural death rate of infected"},
                     {"nu2", "0.001", "natural death rate of recovered"},
                     {"horizon", "300", "end time"},
                     {"step", "0.01", "RK4 step"},
                     {"sample", "1", "output spacing (multiple of step)"},
                 }});
    c.push_back({"perturbation",
                 "first-order coupling correction against the coupled RK4 solution",
                 {
                     {"lambda_a", "0.25", "infection rate within a"},
                     {"lambda_b", "0.25", "infection rate within b"},
                     {"gamma_a", "1/15", "removal rate in a"},
                     {"gamma_b", "1/15", "removal rate in b"},
                     {"s0_a", "9999", "initial susceptible in a"},
                     {"i0_a", "1", "initial infected in a"},
                     {"s0_b", "9999", "initial susceptible in b"},
                     {"i0_b", "1", "initial infected in b"},
                     {"lambda_ab", "0.01", "infection of a by b"},
                     {"lambda_ba", "0.01", "infection of b by a"},
                     {"horizon", "10", "end time"},
                     {"step", "0.01", "grid step"},
                 }});
    c.push_back({"control-mpc",
                 "receding-horizon tree search on the worked-example costs",
                 with(kPaperCostParams, {{"horizon", "150", "number of epochs to simulate"}})});
    c.push_back({"control-dp",
                 "backward recursion on a quantized grid, greedy rollout and value-table dump",
                 with(with(kPaperCostParams, kGridParams),
                      {{"horizon", "30", "number of epochs"},
                       {"rollout", "grid", "grid (projected states) or exact (true states)"},
                       {"peak_mode", "0", "minimise the peak of I instead of the worked-example costs"}})});
    c.push_back({"multiobj",
                 "replicator weights over scalarized recursions on the two-objective test instance",
                 {
                     {"horizon", "20", "number of epochs"},
                     {"iters", "200", "maximum replicator iterations"},
                     {"step_rule", "harmonic", "harmonic (a0 / (n + 1)) or constant (a0)"},
                     {"a0", "0.5", "step size scale"},
                     {"threshold_factor", "1.5", "thresholds = factor times the cross-policy costs"},
                     {"thresholds", "", "explicit thresholds (comma-separated); overrides threshold_factor"},
                     {"tolerance", "1e-6", "weight movement that counts as converged"},
                 }});
    c.push_back({"two-timescale",
                 "fast community controlled against a slowly varying one",
                 {
                     {"eps", "0.1", "time-scale ratio"},
                     {"a", "1", "fast step"},
                     {"horizon", "40", "end time"},
                     {"lambda_ab", "0.05", "infection of a by b"},
                     {"lambda_ba", "0.05", "infection of b by a"},
                     {"s0_a", "9000", "initial susceptible in a"},
                     {"i0_a", "1000", "initial infected in a"},
                     {"s0_b", "9500", "initial susceptible in b"},
                     {"i0_b", "500", "initial infected in b"},
                     {"lockdown_weight_a", "2", "cost per contact level step in a"},
                     {"lockdown_weight_b", "5", "cost per contact level step in b"},
                     {"gamma_points", "3", "removal-rate choices on [1/15, 1/3]"},
                     {"n_s", "30", "grid points for S"},
                     {"n_i", "30", "grid points for I"},
                     {"z_points", "16", "points of the slow-fraction grid"},
                     {"outer_iterations", "1", "fast / slow passes"},
                 }});
    return c;
}

// ---------------------------------------------------------------------------

std::size_t stride_for(const Params& p, const std::string& sample_key)
{
    const double step = p.num("step");
    const double sample = p.num(sample_key);
    if (!(step > 0.0) || !(sample > 0.0)) {
        spec_error("step and " + sample_key + " must be positive");
    }
    const double ratio = sample / step;
    const double r = std::round(ratio);
    if (r < 1.0 || std::abs(ratio - r) > 1e-9 * r) {
        spec_error(sample_key + " must be a whole multiple of step");
    }
    return static_cast<std::size_t>(r);
}

template <typename T>
std::vector<T> every(const std::vector<T>& v, std::size_t stride)
{
    std::vector<T> out;
    for (std::size_t k = 0; k < v.size(); k += stride) {
        out.push_back(v[k]);
    }
    if (!v.empty() && (v.size() - 1) % stride != 0) {
        out.push_back(v.back());
    }
    return out;
}

double positive(const Params& p, const std::string& key)
{
    const double v = p.num(key);
    if (!(v > 0.0)) {
        spec_error("'" + key + "' must be positive");
    }
    return v;
}

Curve sir_curve(const std::string& name, const Trajectory& tr)
{
    Curve c;
    c.name = name;
    c.add_column("t", tr.times);
    c.add_column("S", tr.s);
    c.add_column("I", tr.i);
    c.add_column("R", tr.r);
    return c;
}

Bundle cmd_trajectory(const Params& p)
{
    const double lam = p.num("lambda");
    const double gam = p.num("gamma");
    const double beta = p.num("beta");
    const InitialState init{p.num("s0"), p.num("i0"), p.num("r0")};
    const double horizon = positive(p, "horizon");
    const auto grid = uniform_grid(horizon, positive(p, "step"));
    const double duration = p.num("lockdown_duration");
    const double factor = p.num("lockdown_factor");
    const double slope = p.num("gamma_slope");
    require_valid({lam, gam, beta}, init);

    Bundle b;
    std::vector<PeakReport> peaks;
    if ((duration > 0.0 && factor != 1.0) || slope != 0.0) {
        const Schedule ls = duration > 0.0 ? Schedule::lockdown_window(lam, factor, p.num("lockdown_start"), duration)
                                           : Schedule::constant(lam);
        const Schedule gs = slope != 0.0 ? Schedule::linear_ramp(gam, slope) : Schedule::constant(gam);
        b.curves.push_back(sir_curve("trajectory", closedform::sirnc_timevarying(ls, gs, init, grid, beta)));
        peaks = closedform::sirnc_timevarying_peak(ls, gs, init, horizon);
    } else {
        const closedform::ClosedFormSolution sol({lam, gam, beta}, init);
        b.curves.push_back(sir_curve("trajectory", sol.sample(grid)));
        const PeakReport pk = sol.peak();
        if (pk.t_max > 0.0) {
            peaks.push_back(pk);
        }
    }
    b.scalars.emplace_back("peaks", static_cast<double>(peaks.size()));
    for (std::size_t k = 0; k < peaks.size(); ++k) {
        const std::string sfx = k == 0 ? "" : "_" + std::to_string(k + 1);
        b.scalars.emplace_back("t_max" + sfx, peaks[k].t_max);
        b.scalars.emplace_back("i_max" + sfx, peaks[k].i_max);
    }
    return b;
}

Bundle cmd_compare_sir(const Params& p)
{
    const ModelParams mp{p.num("lambda"), p.num("gamma"), p.num("gamma")};
    const InitialState init{p.num("s0"), p.num("i0"), 0.0};
    require_valid(mp, init);
    const double horizon = positive(p, "horizon");
    const double step = positive(p, "step");
    const std::size_t stride = stride_for(p, "sample");

    const ode::Solution sir = ode::integrate(ode::classic_sir_system(mp), {init.s0, init.i0, 0.0}, horizon, step);
    const std::vector<double> times = every(sir.times, stride);
    const closedform::ClosedFormSolution nc(mp, init);
    const Trajectory nct = nc.sample(times);

    Curve c;
    c.name = "compare";
    c.add_column("t", times);
    c.add_column("S_sir", every(sir.column(0), stride));
    c.add_column("I_sir", every(sir.column(1), stride));
    c.add_column("S_sirnc", nct.s);
    c.add_column("I_sirnc", nct.i);

    Bundle b;
    b.curves.push_back(std::move(c));
    const PeakReport ps = ode::series_peak(sir.times, sir.column(1));
    const PeakReport pn = nc.peak();
    b.scalars = {{"t_max_sir", ps.t_max}, {"i_max_sir", ps.i_max}, {"t_max_sirnc", pn.t_max}, {"i_max_sirnc", pn.i_max}};
    if (ps.t_max >= horizon - step) {
        b.warnings.push_back("SIR peak at the end of the window; increase horizon");
    }
    return b;
}

Bundle cmd_peak_sweep(const Params& p)
{
    const std::string var = p.str("variable");
    const std::size_t n = p.count("points");
    if (n == 0) {
        spec_error("empty sweep (points = 0)");
    }
    const auto xs = n == 1 ? std::vector<double>{p.num("start")} : linspace(p.num("start"), p.num("stop"), n);
    const double lam = p.num("lambda");
    const double gam = p.num("gamma");
    const InitialState init{p.num("s0"), p.num("i0"), 0.0};

    Curve c;
    c.name = "sweep_" + var;
    std::vector<double> col1;
    std::vector<double> col2;
    if (var == "rho") {
        for (double rho : xs) {
            if (!(rho > 0.0 && rho < 1.0)) {
                spec_error("rho must lie in (0, 1)");
            }
            const ModelParams mp{lam, rho * lam, rho * lam};
            col1.push_back(closedform::sir_classic_imax(mp, init).approx / init.n0());
            col2.push_back(closedform::sirnc_imax_over_n_approx(rho));
        }
        c.add_column("rho", xs);
        c.add_column("imax_over_n_sir", col1);
        c.add_column("imax_over_n_sirnc", col2);
    } else if (var == "gamma1") {
        for (double g1 : xs) {
            const ModelParams mp{lam, gam + g1, gam + g1};
            require_valid(mp, init);
            const PeakReport pk = closedform::ClosedFormSolution(mp, init).peak();
            col1.push_back(pk.t_max);
            col2.push_back(pk.i_max);
        }
        c.add_column("gamma1", xs);
        c.add_column("t_max", col1);
        c.add_column("i_max", col2);
    } else if (var == "nu") {
        const double horizon = positive(p, "horizon");
        const double step = positive(p, "step");
        for (double nu : xs) {
            const ModelParams mp{lam, gam, gam};
            require_valid(mp, init);
            const PeakReport pk = closedform::ImportedSolution(mp, nu, init).peak(horizon, step);
            col1.push_back(pk.t_max);
            col2.push_back(pk.i_max);
        }
        c.add_column("nu", xs);
        c.add_column("t_max", col1);
        c.add_column("i_max", col2);
    } else {
        spec_error("variable must be gamma1, rho or nu");
    }
    Bundle b;
    b.curves.push_back(std::move(c));
    return b;
}

Bundle cmd_imported(const Params& p)
{
    const ModelParams mp{p.num("lambda"), p.num("gamma"), p.num("gamma")};
    const InitialState init{p.num("s0"), p.num("i0"), 0.0};
    require_valid(mp, init);
    const double nu = p.num("nu");
    if (nu < 0.0) {
        spec_error("nu must be non-negative");
    }
    const double horizon = positive(p, "horizon");
    const auto grid = uniform_grid(horizon, positive(p, "step"));
    const closedform::ImportedSolution sol(mp, nu, init);
    std::vector<double> s;
    for (double t : grid) {
        s.push_back(sol.susceptible(t));
    }
    Curve c;
    c.name = "imported";
    c.add_column("t", grid);
    c.add_column("S", s);
    c.add_column("I", sol.infected_on_grid(grid));
    Bundle b;
    b.curves.push_back(std::move(c));
    const PeakReport pk = sol.peak(std::max(horizon, 400.0));
    b.scalars = {{"t_max", pk.t_max}, {"i_max", pk.i_max}};
    return b;
}

Bundle cmd_communities(const Params& p)
{
    ode::CommunityParams cp;
    cp.a = {p.num("lambda_a"), p.num("gamma_a"), p.num("gamma_a")};
    cp.b = {p.num("lambda_b"), p.num("gamma_b"), p.num("gamma_b")};
    cp.init_a = {p.num("n_a") - 1.0, 1.0, 0.0};
    cp.init_b = {p.num("n_b") - 1.0, 1.0, 0.0};
    require_valid(cp.a, cp.init_a);
    require_valid(cp.b, cp.init_b);
    cp.lambda_ab = p.num("lambda_ab");
    cp.lambda_ba = p.num("lambda_ba");
    const double cross = p.num("lambda_cross");
    const double coupling = p.num("coupling");
    if (cross > 0.0 && coupling > 0.0) {
        spec_error("set at most one of lambda_cross and coupling");
    }
    if (cross > 0.0) {
        cp.lambda_ab = cp.lambda_ba = cross;
    }
    if (coupling > 0.0) {
        cp.lambda_ab = coupling * cp.a.lambda;
        cp.lambda_ba = coupling * cp.b.lambda;
    }
    if (cp.lambda_ab < 0.0 || cp.lambda_ba < 0.0) {
        spec_error("cross-infection rates must be non-negative");
    }
    const std::size_t stride = stride_for(p, "sample");
    const ode::CommunityRun run = ode::run_communities(cp, positive(p, "horizon"), positive(p, "step"));

    Curve c;
    c.name = "communities";
    c.add_column("t", every(run.a.times, stride));
    c.add_column("S_a", every(run.a.s, stride));
    c.add_column("I_a", every(run.a.i, stride));
    c.add_column("S_b", every(run.b.s, stride));
    c.add_column("I_b", every(run.b.i, stride));
    c.add_column("I_total", every(run.total_i, stride));
    Bundle b;
    b.curves.push_back(std::move(c));
    const PeakReport pa = ode::series_peak(run.a.times, run.a.i);
    const PeakReport pb = ode::series_peak(run.b.times, run.b.i);
    const PeakReport pt = ode::series_peak(run.a.times, run.total_i);
    b.scalars = {{"lambda_ab", cp.lambda_ab},
                 {"lambda_ba", cp.lambda_ba},
                 {"t_max_a", pa.t_max},
                 {"i_max_a", pa.i_max},
                 {"t_max_b", pb.t_max},
                 {"i_max_b", pb.i_max},
                 {"t_max_total", pt.t_max},
                 {"i_max_total", pt.i_max},
                 {"humps_total", static_cast<double>(ode::local_maxima_smoothed(run.total_i).size())}};
    return b;
}

Bundle cmd_vital(const Params& p)
{
    const ModelParams mp{p.num("lambda"), p.num("gamma"), p.num("beta")};
    const InitialState init{p.num("s0"), p.num("i0"), 0.0};
    require_valid(mp, init);
    const ode::VitalParams vp{p.num("kappa"), p.num("upsilon1"), p.num("upsilon2"), p.num("nu1"), p.num("nu2")};
    const std::size_t stride = stride_for(p, "sample");
    const Trajectory tr = ode::run_vital(mp, vp, init, positive(p, "horizon"), positive(p, "step"));
    Trajectory out;
    out.times = every(tr.times, stride);
    out.s = every(tr.s, stride);
    out.i = every(tr.i, stride);
    out.r = every(tr.r, stride);
    Bundle b;
    b.curves.push_back(sir_curve("vital", out));
    b.scalars = {{"t_end", tr.times.back()}, {"s_end", tr.s.back()}, {"i_end", tr.i.back()}, {"r_end", tr.r.back()}};
    if (!ode::condition_dagger(mp, vp)) {
        b.warnings.push_back("extinction condition does not hold for these rates");
    }
    return b;
}

Curve perturbation_curve(const std::string& name, const perturbation::PerturbationRun& r)
{
    Curve c;
    c.name = name;
    c.add_column("t", r.nominal.times);
    c.add_column("nominal_S", r.nominal.s);
    c.add_column("nominal_I", r.nominal.i);
    c.add_column("corrected_S", r.corrected.s);
    c.add_column("corrected_I", r.corrected.i);
    c.add_column("truth_S", r.truth.s);
    c.add_column("truth_I", r.truth.i);
    c.add_column("abs_err", r.error_estimate);
    return c;
}

Bundle cmd_perturbation(const Params& p)
{
    ode::CommunityParams cp;
    cp.a = {p.num("lambda_a"), p.num("gamma_a"), p.num("gamma_a")};
    cp.b = {p.num("lambda_b"), p.num("gamma_b"), p.num("gamma_b")};
    cp.init_a = {p.num("s0_a"), p.num("i0_a"), 0.0};
    cp.init_b = {p.num("s0_b"), p.num("i0_b"), 0.0};
    cp.lambda_ab = p.num("lambda_ab");
    cp.lambda_ba = p.num("lambda_ba");
    const auto [ra, rb] = perturbation::alekseev_correct(cp, positive(p, "horizon"), positive(p, "step"));
    Bundle b;
    b.curves.push_back(perturbation_curve("perturbation_a", ra));
    b.curves.push_back(perturbation_curve("perturbation_b", rb));
    b.scalars = {{"sup_err_a", perturbation::sup_error(ra.corrected, ra.truth)},
                 {"sup_err_b", perturbation::sup_error(rb.corrected, rb.truth)},
                 {"sup_err_nominal_a", perturbation::sup_error(ra.nominal, ra.truth)},
                 {"sup_err_nominal_b", perturbation::sup_error(rb.nominal, rb.truth)}};
    for (const auto* r : {&ra, &rb}) {
        if (r->horizon_warning) {
            b.warnings.push_back(r->warning);
        }
    }
    return b;
}

control::PaperCostParams paper_params(const Params& p)
{
    const std::string& mode = p.str("alpha_mode");
    if (mode != "constant" && mode != "ramp") {
        spec_error("alpha_mode must be constant or ramp");
    }
    control::PaperCostParams pp;
    pp.a3 = p.num("a3");
    pp.alpha_mode = mode == "ramp" ? control::AlphaMode::Ramp : control::AlphaMode::Constant;
    pp.A1 = p.num("A1");
    pp.a1 = p.num("a1");
    pp.alpha_constant = p.num("alpha_constant");
    pp.lockdown_cost = p.list("lockdown_cost");
    if (pp.lockdown_cost.size() != control::paper_levels().size()) {
        spec_error("lockdown_cost needs one value per contact level (3)");
    }
    pp.a2 = p.num("a2");
    pp.A2 = p.num("A2");
    pp.A3 = p.num("A3");
    pp.gamma0 = positive(p, "gamma0");
    pp.A4 = p.num("A4");
    pp.lookahead = p.count("lookahead");
    pp.natural_lambda = positive(p, "natural_lambda");
    pp.reference_init = {p.num("s0"), p.num("i0"), 0.0};
    require_valid({pp.natural_lambda, pp.gamma0, pp.gamma0}, pp.reference_init);
    pp.alpha_t_max = p.num("alpha_t_max");
    if (pp.alpha_t_max <= 0.0) {
        const ModelParams natural{pp.natural_lambda, pp.gamma0, pp.gamma0};
        pp.alpha_t_max = closedform::ClosedFormSolution(natural, pp.reference_init).peak().t_max;
        if (!(pp.alpha_t_max > 0.0)) {
            spec_error("uncontrolled dynamics have no peak; set alpha_t_max");
        }
    }
    return pp;
}

Curve policy_curve(const std::string& name, const control::ControlProblem& cp, const control::PolicyTrace& tr)
{
    std::vector<double> t, level, gamma, s, i, run, sw;
    for (const auto& st : tr.steps) {
        t.push_back(static_cast<double>(st.t) * cp.step);
        level.push_back(static_cast<double>(st.level));
        gamma.push_back(st.gamma);
        s.push_back(st.before.s);
        i.push_back(st.before.i);
        run.push_back(st.running);
        sw.push_back(st.switching);
    }
    Curve c;
    c.name = name;
    c.add_column("t", t);
    c.add_column("level", level);
    c.add_column("gamma", gamma);
    c.add_column("S", s);
    c.add_column("I", i);
    c.add_column("run_cost", run);
    c.add_column("switch_cost", sw);
    return c;
}

void trace_scalars(Bundle& b, const control::PolicyTrace& tr)
{
    double peak = tr.initial.i;
    std::size_t switches = 0;
    std::size_t prev = tr.initial_level;
    for (const auto& st : tr.steps) {
        peak = std::max(peak, st.after.i);
        switches += st.level != prev ? 1 : 0;
        prev = st.level;
    }
    b.scalars.emplace_back("total", tr.total);
    b.scalars.emplace_back("total_running", tr.total_running);
    b.scalars.emplace_back("total_switching", tr.total_switching);
    b.scalars.emplace_back("terminal", tr.terminal);
    b.scalars.emplace_back("peak_i", peak);
    b.scalars.emplace_back("level_changes", static_cast<double>(switches));
}

std::size_t initial_level(const Params& p)
{
    const std::size_t level = p.count("initial_level");
    if (level >= control::paper_levels().size()) {
        spec_error("initial_level out of range");
    }
    return level;
}

Bundle cmd_control_mpc(const Params& p)
{
    const control::PaperCostParams pp = paper_params(p);
    const control::ControlProblem cp = control::make_paper_problem(pp, positive(p, "step"));
    Bundle b;
    b.warnings = control::validate_problem(cp);
    const control::ControlState z0{pp.reference_init.s0, pp.reference_init.i0, pp.reference_init.i0};
    const control::PolicyTrace tr = control::tree_search_mpc(cp, z0, initial_level(p), p.count("horizon"));
    b.curves.push_back(policy_curve("policy", cp, tr));
    trace_scalars(b, tr);
    return b;
}

Bundle cmd_control_dp(const Params& p)
{
    const control::PaperCostParams pp = paper_params(p);
    control::ControlProblem cp = control::make_paper_problem(pp, positive(p, "step"));
    cp.horizon = p.count("horizon");
    const bool peak_mode = p.flag("peak_mode");
    if (peak_mode) {
        cp = control::make_peak_problem(cp);
    }
    const std::string& mode = p.str("rollout");
    if (mode != "grid" && mode != "exact") {
        spec_error("rollout must be grid or exact");
    }
    control::GridSpec g;
    g.s_min = p.num("s_min");
    g.s_max = p.num("s_max");
    g.n_s = p.count("n_s");
    g.i_min = positive(p, "i_min");
    g.i_max = p.num("i_max");
    g.n_i = p.count("n_i");
    g.peak_mode = peak_mode;
    Bundle b;
    b.warnings = control::validate_problem(cp);
    const auto space = std::make_shared<control::QuantizedGrid>(g);
    const control::DpResult dp = control::backward_dp(cp, space);
    const control::ControlState z0{pp.reference_init.s0, pp.reference_init.i0, pp.reference_init.i0};
    const std::size_t level = initial_level(p);
    const control::PolicyTrace tr =
        dp.rollout(z0, level, mode == "exact" ? control::Rollout::Exact : control::Rollout::Grid);
    b.curves.push_back(policy_curve("policy", cp, tr));
    b.scalars.emplace_back("root_value", dp.value(0, level, z0));
    trace_scalars(b, tr);
    b.blobs.emplace_back("value_table.bin", encode_value_table(dp));
    return b;
}

Bundle cmd_multiobj(const Params& p)
{
    multiobj::ToyInstance toy = multiobj::make_toy_instance(p.count("horizon"));
    const auto grid = std::make_shared<control::QuantizedGrid>(toy.grid);
    const std::vector<double> given = p.list("thresholds");
    if (given.empty()) {
        multiobj::construct_feasible_thresholds(toy.objectives, toy.base, grid, toy.z0, toy.level,
                                                positive(p, "threshold_factor"));
    } else {
        if (given.size() != toy.objectives.size()) {
            spec_error("thresholds needs one value per objective");
        }
        for (std::size_t m = 0; m < given.size(); ++m) {
            toy.objectives.objectives[m].threshold = given[m];
        }
    }
    multiobj::StepSizeRule rule;
    const std::string& kind = p.str("step_rule");
    if (kind == "harmonic") {
        rule.kind = multiobj::StepSizeRule::Kind::Harmonic;
    } else if (kind == "constant") {
        rule.kind = multiobj::StepSizeRule::Kind::Constant;
    } else {
        spec_error("step_rule must be harmonic or constant");
    }
    rule.a0 = positive(p, "a0");
    const multiobj::MultiObjResult r = multiobj::run_multiobjective(
        toy.objectives, toy.base, grid, rule, toy.z0, toy.level, p.count("iters"), positive(p, "tolerance"));

    const std::size_t k = toy.objectives.size();
    Curve log;
    log.name = "iterations";
    std::vector<std::vector<double>> cols(3 * k + 2);
    for (const auto& rec : r.log) {
        cols[0].push_back(static_cast<double>(rec.n));
        for (std::size_t m = 0; m < k; ++m) {
            cols[1 + m].push_back(rec.w[m]);
            cols[1 + k + m].push_back(rec.v_m[m]);
            cols[2 + 2 * k + m].push_back(rec.slack[m]);
        }
        cols[1 + 2 * k].push_back(rec.v_bar);
    }
    log.add_column("n", cols[0]);
    for (std::size_t m = 0; m < k; ++m) {
        log.add_column("w" + std::to_string(m + 1), cols[1 + m]);
    }
    for (std::size_t m = 0; m < k; ++m) {
        log.add_column("V" + std::to_string(m + 1), cols[1 + k + m]);
    }
    log.add_column("Vbar", cols[1 + 2 * k]);
    for (std::size_t m = 0; m < k; ++m) {
        log.add_column("slack" + std::to_string(m + 1), cols[2 + 2 * k + m]);
    }

    Bundle b;
    b.curves.push_back(std::move(log));
    if (r.policy) {
        b.curves.push_back(policy_curve("policy", r.policy->problem(), r.policy->rollout(toy.z0, toy.level)));
    }
    b.scalars.emplace_back("iterations", static_cast<double>(r.log.size()));
    b.scalars.emplace_back("converged", r.converged ? 1.0 : 0.0);
    b.scalars.emplace_back("feasible", r.feasible ? 1.0 : 0.0);
    for (std::size_t m = 0; m < k; ++m) {
        b.scalars.emplace_back("weight" + std::to_string(m + 1), r.weights[m]);
        b.scalars.emplace_back("cost" + std::to_string(m + 1), r.costs[m]);
        b.scalars.emplace_back("threshold" + std::to_string(m + 1), r.thresholds[m]);
    }
    if (r.error) {
        b.soft_error = std::make_pair(*r.error, r.report);
    }
    return b;
}

control::ControlProblem community_problem(double lockdown_weight, std::size_t gamma_points)
{
    control::ControlProblem cp;
    cp.levels = control::paper_levels();
    cp.gamma_grid = linspace(1.0 / 15.0, 1.0 / 3.0, gamma_points);
    cp.switch_cost = control::paper_switch_matrix(1.0);
    cp.running = [lockdown_weight](const control::ControlState& z, std::size_t j, double g, std::size_t) {
        return lockdown_weight * static_cast<double>(j) + 0.5 * (g - 1.0 / 15.0) * z.i + 0.01 * z.i;
    };
    cp.terminal = [](const control::ControlState& z, std::size_t) { return z.i; };
    return cp;
}

Bundle cmd_two_timescale(const Params& p)
{
    multiobj::TwoTimescaleSpec spec;
    spec.eps = positive(p, "eps");
    spec.a = positive(p, "a");
    spec.horizon = positive(p, "horizon");
    spec.lambda_ab = p.num("lambda_ab");
    spec.lambda_ba = p.num("lambda_ba");
    spec.init_a = {p.num("s0_a"), p.num("i0_a"), p.num("i0_a")};
    spec.init_b = {p.num("s0_b"), p.num("i0_b"), p.num("i0_b")};
    control::GridSpec g;
    g.s_min = 0.0;
    g.s_max = std::max(spec.init_a.s + spec.init_a.i, spec.init_b.s + spec.init_b.i);
    g.n_s = p.count("n_s");
    g.i_min = 1.0;
    g.i_max = g.s_max;
    g.n_i = p.count("n_i");
    spec.fast_grid = g;
    spec.slow_grid = g;
    spec.z_points = p.count("z_points");
    spec.outer_iterations = p.count("outer_iterations");
    const std::size_t gp = p.count("gamma_points");
    if (gp == 0) {
        spec_error("gamma_points must be positive");
    }
    const control::ControlProblem fast = community_problem(p.num("lockdown_weight_a"), gp);
    const control::ControlProblem slow = community_problem(p.num("lockdown_weight_b"), gp);
    const multiobj::TwoTimescaleResult r = multiobj::two_timescale_control(spec, fast, slow);

    control::ControlProblem fast_cp = fast;
    fast_cp.step = spec.a;
    control::ControlProblem slow_cp = slow;
    slow_cp.step = static_cast<double>(r.steps_per_interval) * spec.a;

    Bundle b;
    b.curves.push_back(policy_curve("fast_policy", fast_cp, r.fast));
    b.curves.push_back(policy_curve("slow_policy", slow_cp, r.slow));
    Curve frac;
    frac.name = "intervals";
    std::vector<double> t;
    for (std::size_t k = 0; k < r.fast_fraction.size(); ++k) {
        t.push_back(static_cast<double>(k) * slow_cp.step);
    }
    frac.add_column("t", t);
    frac.add_column("fast_fraction", r.fast_fraction);
    b.curves.push_back(std::move(frac));
    Curve z;
    z.name = "slow_fraction_used";
    t.resize(r.z_used.size());
    z.add_column("t", t);
    z.add_column("z", r.z_used);
    b.curves.push_back(std::move(z));
    b.scalars = {{"steps_per_interval", static_cast<double>(r.steps_per_interval)},
                 {"intervals", static_cast<double>(r.n_intervals)},
                 {"slow_step", r.slow_step},
                 {"fast_value", r.fast_value},
                 {"slow_value", r.slow_value},
                 {"coupled_deviation", r.coupled_deviation}};
    return b;
}

}  // namespace

const std::vector<CommandInfo>& commands()
{
    static const std::vector<CommandInfo> all = build_commands();
    return all;
}

Bundle run_command(const std::string& name, const Params& params, const RunContext&)
{
    if (name == "trajectory") {
        return cmd_trajectory(params);
    }
    if (name == "compare-sir") {
        return cmd_compare_sir(params);
    }
    if (name == "peak-sweep") {
        return cmd_peak_sweep(params);
    }
    if (name == "imported") {
        return cmd_imported(params);
    }
    if (name == "communities") {
        return cmd_communities(params);
    }
    if (name == "vital") {
        return cmd_vital(params);
    }
    if (name == "perturbation") {
        return cmd_perturbation(params);
    }
    if (name == "control-mpc") {
        return cmd_control_mpc(params);
    }
    if (name == "control-dp") {
        return cmd_control_dp(params);
    }
    if (name == "multiobj") {
        return cmd_multiobj(params);
    }
    if (name == "two-timescale") {
        return cmd_two_timescale(params);
    }
    spec_error("unknown command '" + name + "'");
}

}  // namespace sirnc::cli
