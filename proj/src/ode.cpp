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

#include "sirnc/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "sirnc/closedform.hpp"

namespace sirnc::ode {

std::vector<double> Solution::column(std::size_t k) const
{
    std::vector<double> out;
    out.reserve(states.size());
    for (const State& x : states) {
        out.push_back(x.at(k));
    }
    return out;
}

State rk4_step(const OdeSystem& sys, double t, const State& x, double h)
{
    const std::size_t n = x.size();
    State tmp(n);
    const State k1 = sys.rhs(t, x);
    for (std::size_t j = 0; j < n; ++j) {
        tmp[j] = x[j] + 0.5 * h * k1[j];
    }
    const State k2 = sys.rhs(t + 0.5 * h, tmp);
    for (std::size_t j = 0; j < n; ++j) {
        tmp[j] = x[j] + 0.5 * h * k2[j];
    }
    const State k3 = sys.rhs(t + 0.5 * h, tmp);
    for (std::size_t j = 0; j < n; ++j) {
        tmp[j] = x[j] + h * k3[j];
    }
    const State k4 = sys.rhs(t + h, tmp);
    State out(n);
    for (std::size_t j = 0; j < n; ++j) {
        out[j] = x[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    return out;
}

Solution integrate(const OdeSystem& sys, const State& init, double t_end, double step)
{
    if (!(step > 0.0) || t_end < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "integration needs step > 0 and t_end >= 0");
    }
    if (init.size() != sys.dim) {
        throw Error(ErrorCode::InvalidArgument, "initial state has the wrong dimension");
    }
    Solution sol;
    sol.labels = sys.labels;
    const auto n_steps = static_cast<std::size_t>(std::ceil(t_end / step - 1e-9));
    sol.times.reserve(n_steps + 1);
    sol.states.reserve(n_steps + 1);
    sol.times.push_back(0.0);
    sol.states.push_back(init);
    State x = init;
    double t = 0.0;
    for (std::size_t k = 1; k <= n_steps; ++k) {
        const double t_next = std::min(t_end, static_cast<double>(k) * step);
        x = rk4_step(sys, t, x, t_next - t);
        for (double& v : x) {
            if (!std::isfinite(v)) {
                throw Error(ErrorCode::NonFiniteState, "integration produced a non-finite state at t=" +
                                                           std::to_string(t_next));
            }
            if (v < 0.0) {
                if (v < -kNegativeClamp) {
                    throw Error(ErrorCode::NegativeStateBeyondTolerance,
                                "component went negative at t=" + std::to_string(t_next));
                }
                v = 0.0;
            }
        }
        t = t_next;
        sol.times.push_back(t);
        sol.states.push_back(x);
    }
    return sol;
}

double mixing(double s, double i, double n)
{
    if (n <= 1e-300) {
        return 0.0;
    }
    return s * i / n;
}

State rhs_classic_sir(const ModelParams& p, const State& x)
{
    const double n = x[0] + x[1] + x[2];
    const double flow = p.lambda * mixing(x[0], x[1], n);
    // Classic SIR moves every removal into R so that S + I + R is conserved.
    return {-flow, flow - p.gamma * x[1], p.gamma * x[1]};
}

State rhs_sirnc(const ModelParams& p, const State& x)
{
    const double flow = p.lambda * mixing(x[0], x[1], x[0] + x[1]);
    return {-flow, flow - p.gamma * x[1], p.beta * x[1]};
}

State rhs_imported(const ModelParams& p, double nu, const State& x)
{
    const double flow = p.lambda * mixing(x[0], x[1], x[0] + x[1]) + nu * x[0];
    return {-flow, flow - p.gamma * x[1], p.beta * x[1]};
}

OdeSystem classic_sir_system(const ModelParams& p)
{
    return {3, [p](double, const State& x) { return rhs_classic_sir(p, x); }, {"S", "I", "R"}};
}

OdeSystem sirnc_system(const ModelParams& p)
{
    return {3, [p](double, const State& x) { return rhs_sirnc(p, x); }, {"S", "I", "R"}};
}

OdeSystem imported_system(const ModelParams& p, double nu)
{
    return {3, [p, nu](double, const State& x) { return rhs_imported(p, nu, x); }, {"S", "I", "R"}};
}

OdeSystem sirnc_schedule_system(const Schedule& lambda, const Schedule& gamma, double beta)
{
    return {3,
            [lambda, gamma, beta](double t, const State& x) {
                return rhs_sirnc({lambda(t), gamma(t), beta}, x);
            },
            {"S", "I", "R"}};
}

State rhs_communities(const CommunityParams& cp, const State& x)
{
    const double ya = x[1] / (x[0] + x[1]);
    const double yb = x[4] / (x[3] + x[4]);
    const double fa = (x[0] + x[1]) > 1e-300 ? ya : 0.0;
    const double fb = (x[3] + x[4]) > 1e-300 ? yb : 0.0;
    const double force_a = cp.a.lambda * fa + cp.lambda_ab * fb;
    const double force_b = cp.b.lambda * fb + cp.lambda_ba * fa;
    return {-x[0] * force_a,
            x[0] * force_a - cp.a.gamma * x[1],
            cp.a.beta * x[1],
            -x[3] * force_b,
            x[3] * force_b - cp.b.gamma * x[4],
            cp.b.beta * x[4]};
}

OdeSystem communities_system(const CommunityParams& cp)
{
    return {6, [cp](double, const State& x) { return rhs_communities(cp, x); },
            {"S_a", "I_a", "R_a", "S_b", "I_b", "R_b"}};
}

Trajectory to_trajectory(const Solution& sol)
{
    Trajectory tr;
    tr.reserve(sol.size());
    for (std::size_t k = 0; k < sol.size(); ++k) {
        const State& x = sol.states[k];
        tr.push_back(sol.times[k], x[0], x[1], x.size() > 2 ? x[2] : 0.0);
    }
    return tr;
}

CommunityRun run_communities(const CommunityParams& cp, double t_end, double step)
{
    require_valid(cp.a, cp.init_a);
    require_valid(cp.b, cp.init_b);
    if (cp.lambda_ab < 0.0 || cp.lambda_ba < 0.0) {
        throw Error(ErrorCode::NonPositiveRate, "coupling rates must be >= 0");
    }
    const State init{cp.init_a.s0, cp.init_a.i0, cp.init_a.r0, cp.init_b.s0, cp.init_b.i0, cp.init_b.r0};
    const Solution sol = integrate(communities_system(cp), init, t_end, step);
    CommunityRun run;
    run.a.reserve(sol.size());
    run.b.reserve(sol.size());
    run.total_i.reserve(sol.size());
    for (std::size_t k = 0; k < sol.size(); ++k) {
        const State& x = sol.states[k];
        run.a.push_back(sol.times[k], x[0], x[1], x[2]);
        run.b.push_back(sol.times[k], x[3], x[4], x[5]);
        run.total_i.push_back(x[1] + x[4]);
    }
    return run;
}

State rhs_vital(const ModelParams& p, const VitalParams& vp, const State& x)
{
    const double n = x[0] + x[1] + x[2];
    const double flow = p.lambda * mixing(x[0], x[1], n);
    return {-flow + vp.kappa * x[0] + vp.upsilon1 * x[1] + vp.upsilon2 * x[2],
            flow - p.gamma * x[1] - vp.nu1 * x[1],
            p.beta * x[1] - vp.nu2 * x[2]};
}

OdeSystem vital_system(const ModelParams& p, const VitalParams& vp)
{
    return {3, [p, vp](double, const State& x) { return rhs_vital(p, vp, x); }, {"S", "I", "R"}};
}

Trajectory run_vital(const ModelParams& p, const VitalParams& vp, const InitialState& init, double t_end,
                     double step)
{
    require_valid(p, init);
    if (vp.upsilon1 < 0.0 || vp.upsilon2 < 0.0 || vp.nu1 < 0.0 || vp.nu2 < 0.0) {
        throw Error(ErrorCode::NonPositiveRate, "birth and death rates must be >= 0");
    }
    return to_trajectory(integrate(vital_system(p, vp), {init.s0, init.i0, init.r0}, t_end, step));
}

bool condition_dagger(const ModelParams& p, const VitalParams& vp)
{
    return vp.kappa <= 0.0 && vp.upsilon1 - vp.nu1 < p.gamma && vp.upsilon2 <= vp.nu2;
}

ExtinctionReport check_extinction(const ModelParams& p, const VitalParams& vp, const InitialState& init,
                                  double horizon, double step)
{
    if (!condition_dagger(p, vp)) {
        throw Error(ErrorCode::ConditionDaggerViolated, "extinction check requires kappa <= 0, "
                                                        "upsilon1 - nu1 < gamma and upsilon2 <= nu2");
    }
    ExtinctionReport rep;
    rep.trajectory = run_vital(p, vp, init, horizon, step);
    const Trajectory& tr = rep.trajectory;
    rep.initial_n = tr.s[0] + tr.i[0] + tr.r[0];
    double prev = rep.initial_n;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        const double n = tr.s[k] + tr.i[k] + tr.r[k];
        const double tol = 1e-12 * std::max(1.0, prev);
        if (k > 0 && n > prev + tol) {
            rep.n_non_increasing = false;
            rep.worst_increase = std::max(rep.worst_increase, n - prev);
        }
        const State d = rhs_vital(p, vp, {tr.s[k], tr.i[k], tr.r[k]});
        const double n_dot = d[0] + d[1] + d[2];
        if (n_dot > -(p.gamma - p.beta) * tr.i[k] + 1e-12 * std::max(1.0, n)) {
            rep.bound_holds = false;
        }
        prev = n;
    }
    rep.terminal_n = prev;
    return rep;
}

EquilibriumReport check_equilibrium_nongeneric(const ModelParams& p, const VitalParams& vp)
{
    if (!(vp.nu2 > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "equilibrium analysis needs nu2 > 0");
    }
    EquilibriumReport rep;
    rep.zeta = p.gamma + vp.nu1 - vp.upsilon1 - vp.upsilon2 * p.beta / vp.nu2;
    rep.positive_equilibrium_possible = vp.kappa != 0.0 && rep.zeta / vp.kappa > 0.0;
    if (rep.zeta == 0.0) {
        rep.critical_lambda = std::numeric_limits<double>::quiet_NaN();
        return rep;
    }
    // Equilibrium of the I equation: lambda s / (s + i + r) = gamma + nu1 with
    // r = (beta / nu2) i and s = zeta i / kappa from the S equation.
    rep.critical_lambda = (p.gamma + vp.nu1) * (1.0 + (1.0 + p.beta / vp.nu2) * vp.kappa / rep.zeta);
    rep.lambda_matches =
        std::abs(p.lambda - rep.critical_lambda) <= 1e-12 * std::max(1.0, std::abs(rep.critical_lambda));
    return rep;
}

namespace {

double uniform01(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t k)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> simulate_scheme(const StochasticSchemeParams& sp,
                                                                    const InitialState& init, std::uint64_t seed)
{
    if (!(sp.eps > 0.0) || sp.eps * (1.0 + sp.gamma) >= 1.0) {
        throw Error(ErrorCode::StepTooLarge, "scheme needs 0 < eps (1 + gamma) < 1");
    }
    std::mt19937_64 rng(seed);
    const auto steps = static_cast<std::size_t>(std::floor(sp.horizon / sp.eps + 1e-9));
    std::vector<double> s(steps + 1);
    std::vector<double> i(steps + 1);
    s[0] = init.s0;
    i[0] = init.i0;
    for (std::size_t n = 0; n < steps; ++n) {
        const double total = s[n] + i[n];
        const double prob = total > 0.0 ? std::clamp(sp.lambda * i[n] / total, 0.0, 1.0) : 0.0;
        const double zeta = uniform01(rng) < prob ? 1.0 : 0.0;
        const double infected = sp.eps * s[n] * zeta;
        s[n + 1] = s[n] - infected;
        i[n + 1] = i[n] + infected - sp.eps * sp.gamma * i[n];
    }
    return {std::move(s), std::move(i)};
}

AveragingStats stochastic_averaging_check(const StochasticSchemeParams& sp, const InitialState& init,
                                          std::size_t trials, std::uint64_t seed)
{
    AveragingStats stats;
    stats.eps = sp.eps;
    stats.trials = trials;
    if (trials == 0) {
        return stats;
    }
    const auto steps = static_cast<std::size_t>(std::floor(sp.horizon / sp.eps + 1e-9));
    // Exact S at the scheme nodes and midpoints.
    std::vector<double> exact_nodes(steps + 1);
    std::vector<double> exact_mid(steps);
    const ModelParams p{sp.lambda, sp.gamma, 0.0};
    const bool degenerate = closedform::is_degenerate(p) || sp.lambda <= 0.0 || init.i0 <= 0.0;
    const auto exact_s = [&](double t) {
        if (init.i0 <= 0.0) {
            return init.s0;
        }
        if (sp.lambda <= 0.0) {
            return init.s0;
        }
        if (degenerate) {
            return closedform::limit_eval(p, init, t).first;
        }
        return closedform::ClosedFormSolution(p, init).susceptible(t);
    };
    for (std::size_t n = 0; n <= steps; ++n) {
        exact_nodes[n] = exact_s(static_cast<double>(n) * sp.eps);
        if (n < steps) {
            exact_mid[n] = exact_s((static_cast<double>(n) + 0.5) * sp.eps);
        }
    }
    double sum_sq = 0.0;
    double sum_sup = 0.0;
    for (std::size_t k = 0; k < trials; ++k) {
        const auto path = simulate_scheme(sp, init, trial_seed(seed, k));
        const std::vector<double>& s = path.first;
        double sup = 0.0;
        for (std::size_t n = 0; n <= steps; ++n) {
            sup = std::max(sup, std::abs(s[n] - exact_nodes[n]));
            if (n < steps) {
                sup = std::max(sup, std::abs(0.5 * (s[n] + s[n + 1]) - exact_mid[n]));
            }
        }
        sum_sq += sup * sup;
        sum_sup += sup;
    }
    stats.mse = sum_sq / static_cast<double>(trials);
    stats.mean_sup = sum_sup / static_cast<double>(trials);
    return stats;
}

std::vector<std::size_t> local_maxima_smoothed(const std::vector<double>& series)
{
    const std::size_t n = series.size();
    std::vector<double> sm(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t lo = k >= 2 ? k - 2 : 0;
        const std::size_t hi = std::min(n - 1, k + 2);
        double acc = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) {
            acc += series[j];
        }
        sm[k] = acc / static_cast<double>(hi - lo + 1);
    }
    std::vector<std::size_t> out;
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (sm[k] > sm[k - 1] && sm[k] > sm[k + 1]) {
            out.push_back(k);
        }
    }
    return out;
}

PeakReport series_peak(const std::vector<double>& times, const std::vector<double>& series)
{
    if (series.empty() || times.size() != series.size()) {
        throw Error(ErrorCode::InvalidArgument, "peak search needs equal, non-empty series");
    }
    const auto it = std::max_element(series.begin(), series.end());
    const auto k = static_cast<std::size_t>(it - series.begin());
    PeakReport out{times[k], series[k]};
    if (k > 0 && k + 1 < series.size()) {
        const double h = times[k + 1] - times[k];
        const double denom = series[k - 1] - 2.0 * series[k] + series[k + 1];
        if (denom < 0.0 && std::abs(times[k] - times[k - 1] - h) <= 1e-9 * h) {
            const double off = 0.5 * h * (series[k - 1] - series[k + 1]) / denom;
            out.t_max = times[k] + off;
            out.i_max = series[k] - 0.25 * (series[k - 1] - series[k + 1]) * off / h;
        }
    }
    return out;
}

}  // namespace sirnc::ode
