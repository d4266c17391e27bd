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

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "sirnc/closedform.hpp"

using namespace sirnc;
using namespace sirnc::closedform;
using oracle::rel_err;

namespace {

const ModelParams kRef{0.25, 1.0 / 15.0, 1.0 / 15.0};
const InitialState kInit{9999.0, 1.0, 0.0};

}  // namespace

TEST_CASE("closed form starts at the initial state")
{
    const ClosedFormSolution sol(kRef, kInit);
    CHECK(sol.c() == doctest::Approx(9999.0));
    CHECK(sol.susceptible(0.0) == doctest::Approx(9999.0).epsilon(1e-14));
    CHECK(sol.infected(0.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(sol.recovered(0.0) == 0.0);
    CHECK_THROWS_AS(sol.infected(-1.0), Error);
}

TEST_CASE("closed form agrees with RK4 at t = 55")
{
    const ClosedFormSolution sol(kRef, kInit);
    const auto x = oracle::sirnc_path(kRef.lambda, kRef.gamma, 0.0, {9999.0, 1.0, 0.0}, {55.0}, 1e-3).back();
    CHECK(rel_err(sol.susceptible(55.0), x[0]) <= 1e-6);
    CHECK(rel_err(sol.infected(55.0), x[1]) <= 1e-6);
}

TEST_CASE("susceptibles vanish for long horizons")
{
    const ClosedFormSolution sol({0.1, 0.05, 0.0}, {999.0, 1.0, 0.0});
    const auto x = oracle::sirnc_path(0.1, 0.05, 0.0, {999.0, 1.0, 0.0}, {1000.0}, 1e-2).back();
    CHECK(sol.susceptible(1000.0) < 1.0);
    CHECK(x[0] < 1.0);
    CHECK(rel_err(sol.susceptible(1000.0), x[0]) <= 1e-5);
}

TEST_CASE("closed form matches RK4 on random parameter sets")
{
    oracle::Gen g(20260101);
    for (int set = 0; set < 12; ++set) {
        const double lam = g.uniform(0.05, 0.5);
        const double gam = g.uniform(0.02, 0.9 * lam);
        const double s0 = g.log_uniform(1e2, 1e5);
        const double i0 = g.uniform(1.0, 10.0);
        const ClosedFormSolution sol({lam, gam, 0.0}, {s0, i0, 0.0});
        const double t_end = 2.0 * std::max(sol.peak().t_max, 20.0);
        std::vector<double> times;
        for (int k = 1; k <= 100; ++k) times.push_back(t_end * k / 100.0);
        const auto path = oracle::sirnc_path(lam, gam, 0.0, {s0, i0, 0.0}, times, 1e-3);
        for (std::size_t k = 0; k < times.size(); ++k) {
            CHECK(rel_err(sol.susceptible(times[k]), path[k][0]) <= 1e-6);
            CHECK(rel_err(sol.infected(times[k]), path[k][1]) <= 1e-6);
        }
    }
}

TEST_CASE("recovered count matches RK4")
{
    const ClosedFormSolution sol(kRef, kInit);
    const auto x = oracle::sirnc_path(kRef.lambda, kRef.gamma, kRef.beta, {9999.0, 1.0, 0.0}, {200.0}, 1e-3).back();
    CHECK(rel_err(sol.recovered(200.0), x[2]) <= 1e-5);
    const ClosedFormSolution no_rec({0.25, 1.0 / 15.0, 0.0}, {9999.0, 1.0, 3.0});
    CHECK(no_rec.recovered(100.0) == 3.0);
}

TEST_CASE("peak formulas")
{
    const ClosedFormSolution sol(kRef, kInit);
    const PeakReport pk = sol.peak();
    CHECK(std::abs(pk.t_max - 55.4) <= 1.0);
    CHECK(std::abs(pk.i_max - 4523.0) <= 30.0);
    CHECK(rel_err(pk.i_max, sol.infected(pk.t_max)) <= 1e-10);
    const double h = 1e-4;
    const double deriv = (sol.infected(pk.t_max + h) - sol.infected(pk.t_max - h)) / (2.0 * h);
    CHECK(std::abs(deriv) <= 1e-6 * pk.i_max);

    // Dense-grid argmax lands within one grid cell of the formula.
    double best_t = 0.0, best_i = 0.0;
    for (int k = 0; k <= 20000; ++k) {
        const double t = 0.01 * k;
        const double v = sol.infected(t);
        if (v > best_i) {
            best_i = v;
            best_t = t;
        }
    }
    CHECK(std::abs(best_t - pk.t_max) <= 0.01);

    const double rho = kRef.gamma / kRef.lambda;
    CHECK(rel_err(pk.i_max / kInit.n0(), sirnc_imax_over_n_approx(rho)) <= 1e-3);

    // No breakout: C (l - g) / g <= 1 clamps the peak to t = 0.
    const ClosedFormSolution flat({0.2, 0.1, 0.0}, {1.0, 1.0, 0.0});
    CHECK(flat.peak().t_max == 0.0);
    CHECK(flat.peak().i_max == 1.0);
}

TEST_CASE("peak derivative vanishes for random parameters")
{
    oracle::Gen g(5);
    for (int k = 0; k < 200; ++k) {
        const double lam = g.uniform(0.05, 0.5);
        const double gam = g.uniform(0.02, 0.9 * lam);
        const ClosedFormSolution sol({lam, gam, 0.0}, {g.log_uniform(1e2, 1e5), g.uniform(1.0, 10.0), 0.0});
        const PeakReport pk = sol.peak();
        if (pk.t_max <= 0.0) continue;
        const double h = 1e-3;
        const double deriv = (sol.infected(pk.t_max + h) - sol.infected(pk.t_max - h)) / (2.0 * h);
        CHECK(std::abs(deriv) <= 1e-6 * pk.i_max);
    }
}

TEST_CASE("degenerate rates use the limit formulas")
{
    const ModelParams p{0.1, 0.1, 0.0};
    const ClosedFormSolution sol(p, {1.0, 1.0, 0.0});
    CHECK_THROWS_AS(sol.infected(1.0), Error);
    CHECK_THROWS_AS(sol.peak(), Error);
    for (double t : {0.0, 1.0, 10.0, 40.0}) {
        const auto [s, i] = limit_eval(p, {1.0, 1.0, 0.0}, t);
        CHECK(i == doctest::Approx(std::exp(-0.05 * t)).epsilon(1e-14));
        CHECK(s == doctest::Approx(std::exp(-0.05 * t)).epsilon(1e-14));
        const auto x = oracle::sirnc_path(0.1, 0.1, 0.0, {1.0, 1.0, 0.0}, {t}, 1e-3).back();
        CHECK(rel_err(i, x[1]) <= 1e-9);
        CHECK(rel_err(s, x[0]) <= 1e-9);
    }
    const auto [s_big, i_big] = limit_eval(p, {1e6, 1.0, 0.0}, 50.0);
    CHECK(i_big == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(s_big < 1e6);
}

TEST_CASE("fraction identities and monotonicity")
{
    const ClosedFormSolution sol(kRef, kInit);
    double prev_s = sol.susceptible(0.0);
    double prev_n = prev_s + sol.infected(0.0);
    for (int k = 1; k <= 400; ++k) {
        const double t = 0.5 * k;
        const double s = sol.susceptible(t);
        const double i = sol.infected(t);
        CHECK(sol.x(t) + sol.y(t) == doctest::Approx(1.0).epsilon(1e-15));
        const double c = sol.c() * std::exp((kRef.gamma - kRef.lambda) * t);
        CHECK(sol.x(t) == doctest::Approx(c / (1.0 + c)).epsilon(1e-12));
        CHECK(sol.x(t) == doctest::Approx(s / (s + i)).epsilon(1e-10));
        CHECK(s < prev_s);
        CHECK(s + i < prev_n);
        CHECK(i > 0.0);
        prev_s = s;
        prev_n = s + i;
    }
}

TEST_CASE("integral and closed I forms agree")
{
    const ClosedFormSolution sol(kRef, kInit);
    oracle::Gen g(9);
    for (int k = 0; k < 30; ++k) {
        const double t = g.uniform(0.0, 200.0);
        CHECK(rel_err(sol.infected_integral_form(t, {QuadratureSpec::Rule::Simpson, 0.005}), sol.infected(t)) <=
              1e-8);
    }
}

TEST_CASE("time-varying solver reduces to the constant case")
{
    const auto lam = Schedule::constant(kRef.lambda);
    const auto gam = Schedule::constant(kRef.gamma);
    const ClosedFormSolution sol(kRef, kInit);
    const auto grid = uniform_grid(200.0, 0.5);
    const Trajectory tr = sirnc_timevarying(lam, gam, kInit, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        CHECK(rel_err(tr.s[k], sol.susceptible(grid[k])) <= 1e-9);
        CHECK(rel_err(tr.i[k], sol.infected(grid[k])) <= 1e-9);
    }
    const auto peaks = sirnc_timevarying_peak(lam, gam, kInit);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0].t_max == doctest::Approx(sol.peak().t_max).epsilon(1e-9));
    CHECK(peaks[0].i_max == doctest::Approx(sol.peak().i_max).epsilon(1e-9));
}

TEST_CASE("segment chaining matches RK4 under a lockdown window")
{
    const auto lam = Schedule::lockdown_window(0.25, 0.5, 15.0, 20.0);
    const auto gam = Schedule::constant(1.0 / 15.0);
    const std::vector<double> times{10.0, 15.0, 20.0, 35.0, 60.0, 120.0};
    const Trajectory tr = sirnc_timevarying(lam, gam, kInit, times, 1.0 / 15.0);
    // Constant-rate RK4 on each piece so no step straddles a jump.
    const auto rate_on = [](double a, double b) { return (a >= 15.0 && b <= 35.0) ? 0.125 : 0.25; };
    std::array<double, 3> x{9999.0, 1.0, 0.0};
    double t0 = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        for (double stop : {15.0, 35.0, times[k]}) {
            if (stop > t0 && stop <= times[k]) {
                x = oracle::rk4<3>(oracle::sirnc_rhs(rate_on(t0, stop), 1.0 / 15.0, 1.0 / 15.0), x, t0, stop, 1e-3);
                t0 = stop;
            }
        }
        CHECK(rel_err(tr.s[k], x[0]) <= 1e-7);
        CHECK(rel_err(tr.i[k], x[1]) <= 1e-7);
        CHECK(rel_err(tr.r[k], x[2]) <= 1e-6);
    }
}

TEST_CASE("early lockdown delays the peak without changing its height")
{
    const auto gam = Schedule::constant(1.0 / 15.0);
    const auto base = sirnc_timevarying_peak(Schedule::constant(0.25), gam, kInit);
    const auto lock = sirnc_timevarying_peak(Schedule::lockdown_window(0.25, 0.5, 15.0, 20.0), gam, kInit);
    REQUIRE(base.size() == 1);
    REQUIRE(lock.size() == 1);
    CHECK(lock[0].t_max > base[0].t_max);
    CHECK(rel_err(lock[0].i_max, base[0].i_max) <= 0.01);
}

TEST_CASE("lockdown near the peak produces a lower second wave")
{
    const auto peaks = sirnc_timevarying_peak(Schedule::lockdown_window(0.25, 0.5, 48.0, 20.0),
                                              Schedule::constant(1.0 / 15.0), kInit);
    REQUIRE(peaks.size() == 2);
    CHECK(peaks[1].t_max > peaks[0].t_max);
    CHECK(peaks[1].i_max < peaks[0].i_max);
}

TEST_CASE("no breakout gives no peaks")
{
    const auto peaks =
        sirnc_timevarying_peak(Schedule::constant(0.05), Schedule::constant(0.1), {100.0, 1.0, 0.0});
    CHECK(peaks.empty());
}

TEST_CASE("rising removal rate cuts the peak")
{
    const auto lam = Schedule::constant(0.25);
    const double base = sirnc_timevarying_peak(lam, Schedule::constant(1.0 / 15.0), kInit).at(0).i_max;
    const auto ramp = Schedule::linear_ramp(1.0 / 15.0, 0.03);
    const auto peaks = sirnc_timevarying_peak(lam, ramp, kInit);
    REQUIRE(peaks.size() == 1);
    const double reduction = 1.0 - peaks[0].i_max / base;
    CHECK(reduction >= 0.60);
    CHECK(reduction <= 0.80);

    // Quadrature path against RK4 of the time-varying system.
    const TimeVaryingSolution sol(lam, ramp, kInit, 0.0, 150.0);
    const auto f = oracle::sirnc_rhs([](double) { return 0.25; }, [&](double t) { return ramp(t); }, 0.0);
    const auto x = oracle::rk4<3>(f, {9999.0, 1.0, 0.0}, 0.0, 60.0, 1e-3);
    CHECK(rel_err(sol.state(60.0).second, x[1]) <= 1e-7);
    CHECK(rel_err(sol.state(60.0).first, x[0]) <= 1e-7);
    CHECK(rel_err(sol.state(60.003).second, oracle::rk4<3>(f, x, 60.0, 60.003, 1e-3)[1]) <= 1e-7);
}

TEST_CASE("coarse quadrature is rejected")
{
    CHECK_THROWS_AS(TimeVaryingSolution(Schedule::constant(0.25), Schedule::linear_ramp(1.0 / 15.0, 0.03), kInit,
                                        0.0, 150.0, {QuadratureSpec::Rule::Simpson, 5.0}),
                    Error);
}

TEST_CASE("imported infections")
{
    const ModelParams p{0.25, 1.0 / 15.0, 0.0};
    const ImportedSolution zero(p, 0.0, kInit);
    const ClosedFormSolution base(p, kInit);
    CHECK(zero.c1() == doctest::Approx(base.c()));
    for (double t : {0.0, 10.0, 55.0, 150.0}) {
        CHECK(rel_err(zero.susceptible(t), base.susceptible(t)) <= 1e-9);
        CHECK(rel_err(zero.infected(t), base.infected(t)) <= 1e-9);
    }

    const ImportedSolution imp(p, 0.0025, kInit);
    CHECK(imp.susceptible(0.0) == doctest::Approx(9999.0).epsilon(1e-14));
    CHECK(imp.infected(0.0) == doctest::Approx(1.0).epsilon(1e-14));
    std::array<double, 3> x{9999.0, 1.0, 0.0};
    const auto f = [&](double, const std::array<double, 3>& v) {
        const double flow = p.lambda * v[0] * v[1] / (v[0] + v[1]) + 0.0025 * v[0];
        return std::array<double, 3>{-flow, flow - p.gamma * v[1], 0.0};
    };
    x = oracle::rk4<3>(f, x, 0.0, 30.0, 1e-3);
    CHECK(rel_err(imp.susceptible(30.0), x[0]) <= 1e-6);
    CHECK(rel_err(imp.infected(30.0), x[1]) <= 1e-6);

    const auto grid = uniform_grid(60.0, 0.5);
    const auto on_grid = imp.infected_on_grid(grid);
    for (std::size_t k = 0; k < grid.size(); k += 10) {
        CHECK(rel_err(on_grid[k], imp.infected(grid[k])) <= 1e-8);
    }
}

TEST_CASE("imported infections pull the peak forward")
{
    const ModelParams p{0.25, 1.0 / 15.0, 0.0};
    const PeakReport pk = ImportedSolution(p, 0.01 * p.lambda, kInit).peak();
    CHECK(std::abs(pk.t_max - 29.0) <= 3.0);
    const PeakReport pk0 = ImportedSolution(p, 0.0, kInit).peak();
    CHECK(std::abs(pk0.t_max - ClosedFormSolution(p, kInit).peak().t_max) <= 1e-3);
}

TEST_CASE("imported solution is continuous at nu = 0")
{
    const ModelParams p{0.25, 1.0 / 15.0, 0.0};
    const InitialState s{900.0, 100.0, 0.0};
    const ImportedSolution a(p, 0.0, s);
    const ImportedSolution b(p, 1e-9, s);
    for (double t : {1.0, 10.0, 30.0}) {
        CHECK(rel_err(a.susceptible(t), b.susceptible(t)) <= 1e-6);
        CHECK(rel_err(a.infected(t), b.infected(t)) <= 1e-6);
    }
}

TEST_CASE("classic SIR peak")
{
    const ModelParams p{0.25, 1.0 / 15.0, 0.0};
    const InitialState s{9999.0, 1.0, 0.0};
    const ClassicImax im = sir_classic_imax(p, s);
    CHECK(im.exact < ClosedFormSolution(p, s).peak().i_max);
    const auto [t_pk, i_pk] = oracle::classic_sir_peak(p.lambda, p.gamma, s.s0, s.i0);
    CHECK(t_pk > 0.0);
    CHECK(rel_err(im.exact, i_pk) <= 1e-3);
    const ClassicImax near_one = sir_classic_imax({0.1, 0.0999999, 0.0}, s);
    CHECK(std::abs(near_one.approx) < 1e-6 * s.n0());
}

TEST_CASE("tanh approximation of R")
{
    const ModelParams p{0.25, 1.0 / 15.0, 0.0};
    const InitialState s{9999.0, 1.0, 0.0};
    const DaleyApproximation d = sir_daley_R(p, s, 10.0);
    CHECK(std::isfinite(d.alpha));
    CHECK(std::isfinite(d.phi));
    const double far = sir_daley_R(p, s, 1e6).r;
    CHECK(std::isfinite(far));
    CHECK(far == doctest::Approx(sir_daley_R(p, s, 2e6).r));

    // Diagnostic only: deviation from RK4 classic SIR R(t).
    const double n = s.n0();
    const auto f = [&](double, const std::array<double, 3>& v) {
        const double flow = p.lambda * v[0] * v[1] / n;
        return std::array<double, 3>{-flow, flow - p.gamma * v[1], p.gamma * v[1]};
    };
    std::array<double, 3> x{s.s0, s.i0, 0.0};
    double worst = 0.0;
    for (int k = 1; k <= 200; ++k) {
        x = oracle::rk4<3>(f, x, k - 1.0, static_cast<double>(k), 1e-2);
        worst = std::max(worst, std::abs(sir_daley_R(p, s, k).r - x[2]));
    }
    MESSAGE("max |R_tanh - R_rk4| over [0, 200]: " << worst);
    CHECK(std::isfinite(worst));
}
