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

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "doctest.h"
#include "oracles.hpp"
#include "sirnc/closedform.hpp"
#include "sirnc/control.hpp"

using namespace sirnc;
using namespace sirnc::control;
using oracle::rel_err;

namespace {

// Independent Euler map used by the brute-force references.
ControlState step_ref(const ControlState& z, double lam, double gam, double a)
{
    const double inf = lam * z.s * z.i / (z.s + z.i);
    ControlState o{z.s - a * inf, z.i + a * (inf - gam * z.i), 0.0};
    o.m = std::max(z.m, o.i);
    return o;
}

// Minimum over every action sequence of the full cost, exact dynamics.
double brute(const ControlProblem& cp, const ControlState& z, std::size_t level, std::size_t t, std::size_t t_end)
{
    if (t == t_end) {
        return cp.terminal(z, t);
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cp.levels.size(); ++j) {
        for (std::size_t u = 0; u < cp.gamma_grid.size(); ++u) {
            const double g = cp.gamma_grid[u];
            const double c = cp.switch_cost[level][j] + cp.running(z, j, g, t) +
                             brute(cp, step_ref(z, cp.levels[j], g, cp.step), j, t + 1, t_end);
            best = std::min(best, c);
        }
    }
    return best;
}

// Same enumeration with every intermediate state snapped to the grid.
double brute_grid(const ControlProblem& cp, const QuantizedGrid& grid, const ControlState& z, std::size_t level,
                  std::size_t t)
{
    if (t == cp.horizon) {
        return cp.terminal(z, t);
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cp.levels.size(); ++j) {
        for (std::size_t u = 0; u < cp.gamma_grid.size(); ++u) {
            const double g = cp.gamma_grid[u];
            const ControlState next = grid.state(0, grid.locate(0, step_ref(z, cp.levels[j], g, cp.step)));
            const double c = cp.switch_cost[level][j] + cp.running(z, j, g, t) + brute_grid(cp, grid, next, j, t + 1);
            best = std::min(best, c);
        }
    }
    return best;
}

ControlProblem random_problem(oracle::Gen& g, std::size_t horizon)
{
    ControlProblem cp;
    const int n_levels = g.integer(2, 3);
    const int n_gammas = g.integer(2, 3);
    for (int k = 0; k < n_levels; ++k) {
        cp.levels.push_back(g.uniform(0.1, 0.4));
    }
    for (int k = 0; k < n_gammas; ++k) {
        cp.gamma_grid.push_back(g.uniform(0.05, 0.3));
    }
    cp.switch_cost.assign(n_levels, std::vector<double>(n_levels, 0.0));
    for (int a = 0; a < n_levels; ++a) {
        for (int b = 0; b < n_levels; ++b) {
            if (a != b) {
                cp.switch_cost[a][b] = g.uniform(0.0, 5.0);
            }
        }
    }
    std::vector<double> lvl_cost;
    for (int k = 0; k < n_levels; ++k) {
        lvl_cost.push_back(g.uniform(0.0, 3.0));
    }
    const double w_gamma = g.uniform(0.0, 2.0);
    const double w_i = g.uniform(0.01, 0.2);
    const double w_term = g.uniform(0.1, 1.0);
    const double w_s = g.uniform(0.0, 0.01);
    cp.running = [=](const ControlState& z, std::size_t j, double gam, std::size_t t) {
        return lvl_cost[j] + w_gamma * gam * z.i / (1.0 + static_cast<double>(t)) + w_i * z.i;
    };
    cp.terminal = [=](const ControlState& z, std::size_t) { return w_term * z.i + w_s * z.s; };
    cp.step = 1.0;
    cp.horizon = horizon;
    return cp;
}

ControlState random_state(oracle::Gen& g)
{
    const ControlState z{g.uniform(500.0, 1000.0), g.uniform(1.0, 50.0), 0.0};
    return {z.s, z.i, z.i};
}

}  // namespace

TEST_CASE("Euler step follows the discretised dynamics")
{
    const ControlState z{900.0, 100.0, 120.0};
    const ControlState o = euler_step(z, 0.25, 0.1, 0.5);
    const double inf = 0.25 * 900.0 * 100.0 / 1000.0;
    CHECK(o.s == doctest::Approx(900.0 - 0.5 * inf));
    CHECK(o.i == doctest::Approx(100.0 + 0.5 * (inf - 10.0)));
    CHECK(o.m == 120.0);
    const ControlState o2 = euler_step(z, 0.25, 0.1, 1.0, 0.01);
    CHECK(o2.s == doctest::Approx(900.0 - (inf + 9.0)));
    CHECK(o2.i == doctest::Approx(100.0 + inf + 9.0 - 10.0));
    CHECK(o2.m == doctest::Approx(o2.i));
    CHECK_THROWS_AS(euler_step(z, 0.25, 2.0, 1.0), Error);
    try {
        euler_step(z, 0.25, 2.0, 1.0);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::StepTooLarge);
    }
    CHECK_THROWS_AS(euler_step({0.0, 0.0, 0.0}, 0.25, 0.1, 1.0), Error);
}

TEST_CASE("problem validation and triangle warnings")
{
    const PaperCostParams pp = paper_defaults();
    ControlProblem cp = make_paper_problem(pp);
    CHECK(validate_problem(cp).empty());
    ControlProblem bad = cp;
    bad.switch_cost[1][1] = 1.0;
    CHECK_THROWS_AS(validate_problem(bad), Error);
    bad = cp;
    bad.switch_cost[0][1] = -1.0;
    CHECK_THROWS_AS(validate_problem(bad), Error);
    bad = cp;
    bad.switch_cost.pop_back();
    CHECK_THROWS_AS(validate_problem(bad), Error);
    bad = cp;
    bad.gamma_grid.clear();
    CHECK_THROWS_AS(validate_problem(bad), Error);
    ControlProblem tri = cp;
    tri.switch_cost[0][2] = 10.0 * pp.a2;
    const auto w = validate_problem(tri);
    REQUIRE(w.size() == 1);
    CHECK(w[0].find("0->2") != std::string::npos);
}

TEST_CASE("worked-example cost terms")
{
    PaperCostParams pp = paper_defaults(1.2);
    CHECK(pp.alpha_t_max == doctest::Approx(55.755).epsilon(1e-4));
    const ControlState z{5000.0, 100.0, 100.0};
    const double expect = 1e4 + (100.0 + 100.0 / 4.0) * 100.0 * (0.2 - 1.0 / 15.0) + 10.0 * std::pow(100.0, 1.2);
    CHECK(paper_running_cost(pp, z, 1, 0.2, 4.0) == doctest::Approx(expect));
    CHECK_THROWS_AS(paper_running_cost(pp, z, 0, 0.2, 0.0), Error);
    CHECK(paper_terminal_cost(pp, {0.0, 1.0, 0.0}, 0.0, 10.0) == doctest::Approx(100.0));
    // Overflow continuation: finite, increasing, continuous at the cap.
    const double i_cap = 60.0 + 0.1 * 10.0;
    const double at_cap = paper_terminal_cost(pp, {0.0, i_cap, 0.0}, 0.0, 10.0);
    CHECK(rel_err(at_cap, 100.0 * std::exp(600.0)) < 1e-12);
    double prev = at_cap;
    for (double i = i_cap + 1.0; i < 1e4; i *= 1.5) {
        const double h = paper_terminal_cost(pp, {0.0, i, 0.0}, 0.0, 10.0);
        CHECK(std::isfinite(h));
        CHECK(h > prev);
        prev = h;
    }
    pp.alpha_mode = AlphaMode::Ramp;
    CHECK(alpha_at(pp, 0.0) == doctest::Approx(1.0));
    CHECK(alpha_at(pp, pp.alpha_t_max / 2.0) == doctest::Approx(0.55));
    CHECK(alpha_at(pp, pp.alpha_t_max) == doctest::Approx(0.1));
    CHECK(alpha_at(pp, 1000.0) == 0.1);
    const auto gr = paper_gamma_grid();
    CHECK(gr.size() == 10);
    CHECK(gr.front() == doctest::Approx(1.0 / 15.0));
    CHECK(gr.back() == doctest::Approx(1.0 / 3.0));
    const double io = uncontrolled_reference({0.25, 1.0 / 15.0, 1.0 / 15.0}, {9999.0, 1.0, 0.0}, pp.alpha_t_max);
    CHECK(io == doctest::Approx(4535.0).epsilon(1e-3));
}

TEST_CASE("tree search matches brute force on random problems")
{
    oracle::Gen g(101);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t depth = static_cast<std::size_t>(g.integer(1, 4));
        const ControlProblem cp = random_problem(g, depth);
        const ControlState z = random_state(g);
        const std::size_t level = static_cast<std::size_t>(g.integer(0, static_cast<int>(cp.levels.size()) - 1));
        const PlanResult r = tree_search(cp, z, level, 0, depth);
        CHECK(rel_err(r.cost, brute(cp, z, level, 0, depth)) < 1e-12);
        CHECK(r.actions.size() == depth);
    }
}

TEST_CASE("tree search ties resolve to the lowest level then lowest rate")
{
    ControlProblem cp;
    cp.levels = {0.3, 0.2, 0.1};
    cp.gamma_grid = {0.1, 0.2};
    cp.switch_cost.assign(3, std::vector<double>(3, 0.0));
    cp.running = [](const ControlState&, std::size_t, double, std::size_t) { return 1.0; };
    cp.terminal = [](const ControlState&, std::size_t) { return 0.0; };
    const PlanResult r = tree_search(cp, {100.0, 1.0, 1.0}, 2, 0, 3);
    for (const auto& [j, u] : r.actions) {
        CHECK(j == 0);
        CHECK(u == 0);
    }
    CHECK(r.cost == 3.0);
}

TEST_CASE("tree search refuses oversized trees")
{
    const ControlProblem cp = make_paper_problem(paper_defaults());
    try {
        tree_search(cp, {9999.0, 1.0, 1.0}, 0, 0, 5);
        FAIL("expected TreeTooLarge");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TreeTooLarge);
    }
}

TEST_CASE("MPC with full lookahead attains the global optimum")
{
    oracle::Gen g(202);
    for (int trial = 0; trial < 15; ++trial) {
        const std::size_t horizon = static_cast<std::size_t>(g.integer(1, 4));
        const ControlProblem cp = random_problem(g, horizon);
        const ControlState z = random_state(g);
        const PolicyTrace tr = tree_search_mpc(cp, z, 0, horizon);
        CHECK(rel_err(tr.total, brute(cp, z, 0, 0, horizon)) < 1e-12);
        CHECK(rel_err(replay_total(cp, tr), tr.total) < 1e-12);
    }
}

TEST_CASE("MPC trace replays to its recorded cost")
{
    const PaperCostParams pp = paper_defaults(1.2);
    const ControlProblem cp = make_paper_problem(pp);
    const PolicyTrace tr = tree_search_mpc(cp, {9999.0, 1.0, 1.0}, 0, 30);
    REQUIRE(tr.steps.size() == 30);
    CHECK(rel_err(replay_total(cp, tr), tr.total) < 1e-9);
    double run = 0.0;
    double sw = 0.0;
    for (const auto& st : tr.steps) {
        run += st.running;
        sw += st.switching;
    }
    CHECK(rel_err(run, tr.total_running) < 1e-12);
    CHECK(sw == doctest::Approx(tr.total_switching));
}

TEST_CASE("backward recursion on the reachable set is exact")
{
    oracle::Gen g(303);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t horizon = static_cast<std::size_t>(g.integer(1, 4));
        const ControlProblem cp = random_problem(g, horizon);
        const ControlState z = random_state(g);
        const std::size_t level = static_cast<std::size_t>(g.integer(0, static_cast<int>(cp.levels.size()) - 1));
        const auto space = std::make_shared<ReachableSet>(cp, z, false);
        const DpResult dp = backward_dp(cp, space);
        const double v = dp.value(0, level, z);
        CHECK(rel_err(v, brute(cp, z, level, 0, horizon)) < 1e-12);
        const PolicyTrace tr = dp.rollout(z, level, Rollout::Exact);
        CHECK(rel_err(tr.total, v) < 1e-12);
        CHECK(rel_err(replay_total(cp, tr), v) < 1e-12);
    }
}

TEST_CASE("backward recursion on a quantized grid matches enumeration of projected paths")
{
    oracle::Gen g(404);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t horizon = static_cast<std::size_t>(g.integer(1, 3));
        const ControlProblem cp = random_problem(g, horizon);
        GridSpec spec;
        spec.s_min = 0.0;
        spec.s_max = 1000.0;
        spec.n_s = 20;
        spec.i_min = 1.0;
        spec.i_max = 1000.0;
        spec.n_i = 20;
        const auto grid = std::make_shared<QuantizedGrid>(spec);
        const ControlState z0 = grid->state(0, grid->locate(0, random_state(g)));
        const DpResult dp = backward_dp(cp, grid);
        const double v = dp.value(0, 0, z0);
        CHECK(rel_err(v, brute_grid(cp, *grid, z0, 0, 0)) < 1e-12);
        const PolicyTrace tr = dp.rollout(z0, 0, Rollout::Grid);
        CHECK(rel_err(tr.total, v) < 1e-12);
    }
}

TEST_CASE("grid projection is nearest per axis")
{
    GridSpec spec;
    spec.s_min = 0.0;
    spec.s_max = 100.0;
    spec.n_s = 11;
    spec.i_min = 1.0;
    spec.i_max = 100.0;
    spec.n_i = 3;
    spec.peak_mode = true;
    const QuantizedGrid grid(spec);
    CHECK(grid.layer_size(0) == 11 * 3 * 3);
    const ControlState z = grid.state(0, grid.locate(0, {44.0, 20.0, 5.0}));
    CHECK(z.s == doctest::Approx(40.0));
    CHECK(z.i == doctest::Approx(10.0));
    CHECK(z.m == doctest::Approx(10.0));
    CHECK(grid.state(0, grid.locate(0, {1e9, 1e-3, 1e9})).s == doctest::Approx(100.0));
    CHECK(grid.state(0, grid.locate(0, {1e9, 1e-3, 1e9})).i == doctest::Approx(1.0));
    for (std::size_t k = 0; k < grid.layer_size(0); ++k) {
        CHECK(grid.locate(0, grid.state(0, k)) == k);
    }
    const GridSpec fine = spec.refined();
    CHECK(fine.n_s == 21);
    CHECK(fine.n_i == 5);
}

TEST_CASE("raising switching costs never lowers the value")
{
    oracle::Gen g(505);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t horizon = static_cast<std::size_t>(g.integer(1, 4));
        const ControlProblem cp = random_problem(g, horizon);
        ControlProblem dear = cp;
        for (auto& row : dear.switch_cost) {
            for (double& c : row) {
                c *= g.uniform(1.0, 3.0);
            }
        }
        const ControlState z = random_state(g);
        const auto s1 = std::make_shared<ReachableSet>(cp, z, false);
        const auto s2 = std::make_shared<ReachableSet>(dear, z, false);
        for (std::size_t level = 0; level < cp.levels.size(); ++level) {
            CHECK(backward_dp(dear, s2).value(0, level, z) >= backward_dp(cp, s1).value(0, level, z) - 1e-12);
        }
    }
}

TEST_CASE("peak-min recursion returns the smallest attainable peak")
{
    oracle::Gen g(606);
    for (int trial = 0; trial < 15; ++trial) {
        const std::size_t horizon = static_cast<std::size_t>(g.integer(1, 4));
        const ControlProblem cp = make_peak_problem(random_problem(g, horizon));
        const ControlState z = random_state(g);
        const auto space = std::make_shared<ReachableSet>(cp, z, true);
        const DpResult dp = backward_dp(cp, space);
        const double v = dp.value(0, 0, z);
        CHECK(rel_err(v, brute(cp, z, 0, 0, horizon)) < 1e-12);
        CHECK(v >= z.i);
        const PolicyTrace tr = dp.rollout(z, 0, Rollout::Exact);
        double peak = z.i;
        for (const auto& st : tr.steps) {
            peak = std::max(peak, st.after.i);
        }
        // Switching costs still apply; the terminal part is the peak itself.
        CHECK(peak == doctest::Approx(tr.terminal).epsilon(1e-12));
        CHECK(tr.total == doctest::Approx(v).epsilon(1e-12));
    }
}

TEST_CASE("peak-min on a quantized grid")
{
    ControlProblem base = make_paper_problem(paper_defaults());
    base.horizon = 20;
    const ControlProblem cp = make_peak_problem(base);
    GridSpec spec;
    spec.s_min = 0.0;
    spec.s_max = 10000.0;
    spec.n_s = 30;
    spec.i_min = 1.0;
    spec.i_max = 10000.0;
    spec.n_i = 30;
    spec.peak_mode = true;
    const auto grid = std::make_shared<QuantizedGrid>(spec);
    const ControlState z0 = grid->state(0, grid->locate(0, {10000.0, 1.0, 1.0}));
    const DpResult dp = backward_dp(cp, grid);
    const double v = dp.value(0, 0, z0);
    CHECK(v >= z0.i);
    const PolicyTrace tr = dp.rollout(z0, 0, Rollout::Grid);
    double peak = z0.m;
    for (const auto& st : tr.steps) {
        peak = std::max(peak, st.after.i);
    }
    CHECK(peak == doctest::Approx(v));
    // Strongest control everywhere keeps I at its start value, so the optimum is I(0).
    CHECK(v == doctest::Approx(z0.i));
}

TEST_CASE("grid refinement check")
{
    ControlProblem cp;
    cp.levels = {0.25, 0.125};
    cp.gamma_grid = {0.1, 0.2};
    cp.switch_cost = {{0.0, 1.0}, {1.0, 0.0}};
    cp.step = 1.0;
    cp.horizon = 5;
    cp.running = [](const ControlState& z, std::size_t j, double, std::size_t) { return (j == 1 ? 5.0 : 0.0) + 0.01 * z.i; };
    cp.terminal = [](const ControlState& z, std::size_t) { return z.i; };
    GridSpec coarse;
    coarse.s_max = 10000.0;
    coarse.n_s = 3;
    coarse.i_max = 10000.0;
    coarse.n_i = 3;
    try {
        check_grid_refinement(cp, coarse, {9000.0, 1000.0, 0.0}, 0);
        FAIL("expected GridTooCoarse");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::GridTooCoarse);
    }
    GridSpec fine = coarse;
    fine.n_s = 200;
    fine.n_i = 200;
    CHECK_NOTHROW(check_grid_refinement(cp, fine, {9000.0, 1000.0, 0.0}, 0));
}

TEST_CASE("Euler step worked examples")
{
    const ControlState z = euler_step({100.0, 100.0, 100.0}, 0.2, 0.1, 1.0);
    CHECK(z.s == doctest::Approx(90.0));
    CHECK(z.i == doctest::Approx(100.0));
    const ControlState still = euler_step({500.0, 0.0, 0.0}, 0.25, 0.1, 1.0);
    CHECK(still.s == 500.0);
    CHECK(still.i == 0.0);
    // Small-step limit agrees with the continuous right-hand side.
    const double a = 1e-6;
    const ControlState w{700.0, 300.0, 300.0};
    const ControlState o = euler_step(w, 0.25, 0.1, a);
    CHECK(rel_err((o.s - w.s) / a, -0.25 * 700.0 * 300.0 / 1000.0) < 1e-4);
    CHECK(rel_err((o.i - w.i) / a, 0.25 * 700.0 * 300.0 / 1000.0 - 30.0) < 1e-4);
}

TEST_CASE("worked-example cost values")
{
    PaperCostParams pp = paper_defaults(1.0);
    CHECK(paper_running_cost(pp, {100.0, 100.0, 0.0}, 0, pp.gamma0, 1.0) == doctest::Approx(1000.0));
    CHECK(paper_running_cost(pp, {100.0, 0.0, 0.0}, 1, 0.2, 3.0) == doctest::Approx(1e4));
    CHECK(paper_running_cost(pp, {100.0, 0.0, 0.0}, 2, 0.2, 3.0) == doctest::Approx(1e5));
    CHECK(paper_terminal_cost(pp, {0.0, 50.0, 0.0}, 0.0, 500.0) == doctest::Approx(100.0));
    CHECK(paper_terminal_cost(pp, {0.0, 49.0, 0.0}, 0.0, 500.0) == doctest::Approx(100.0 * std::exp(-10.0)));
    const ModelParams natural{0.25, 1.0 / 15.0, 1.0 / 15.0};
    CHECK(uncontrolled_reference(natural, {9999.0, 1.0, 0.0}, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("one-step recursion")
{
    oracle::Gen g(707);
    for (int trial = 0; trial < 10; ++trial) {
        const ControlProblem cp = random_problem(g, 1);
        const ControlState z = random_state(g);
        const DpResult dp = backward_dp(cp, std::make_shared<ReachableSet>(cp, z, false));
        for (std::size_t i = 0; i < cp.levels.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < cp.levels.size(); ++j) {
                for (double gam : cp.gamma_grid) {
                    best = std::min(best, cp.switch_cost[i][j] + cp.running(z, j, gam, 0) +
                                              cp.terminal(step_ref(z, cp.levels[j], gam, 1.0), 1));
                }
            }
            CHECK(rel_err(dp.value(0, i, z), best) < 1e-12);
        }
    }
}

TEST_CASE("peak-min without choices is the uncontrolled running max")
{
    ControlProblem base;
    base.levels = {0.25};
    base.gamma_grid = {1.0 / 15.0};
    base.switch_cost = {{0.0}};
    base.step = 1.0;
    base.horizon = 5;
    base.running = [](const ControlState&, std::size_t, double, std::size_t) { return 0.0; };
    base.terminal = [](const ControlState&, std::size_t) { return 0.0; };
    const ControlProblem cp = make_peak_problem(base);
    ControlState z{9999.0, 1.0, 1.0};
    const DpResult dp = backward_dp(cp, std::make_shared<ReachableSet>(cp, z, true));
    double peak = z.i;
    for (int k = 0; k < 5; ++k) {
        z = step_ref(z, 0.25, 1.0 / 15.0, 1.0);
        peak = std::max(peak, z.i);
    }
    CHECK(dp.value(0, 0, {9999.0, 1.0, 1.0}) == doctest::Approx(peak).epsilon(1e-14));
}

TEST_CASE("worked-example MPC never switches away from the natural rate")
{
    for (const AlphaMode mode : {AlphaMode::Constant, AlphaMode::Ramp}) {
        const ControlProblem cp = make_paper_problem(paper_defaults(1.2, mode));
        const PolicyTrace tr = tree_search_mpc(cp, {9999.0, 1.0, 1.0}, 0, 60);
        for (const auto& st : tr.steps) {
            CHECK(st.level == 0);
        }
        CHECK(tr.total_switching == 0.0);
    }
}
