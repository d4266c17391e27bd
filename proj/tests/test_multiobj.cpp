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
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "sirnc/multiobj.hpp"

using namespace sirnc;
using namespace sirnc::control;
using namespace sirnc::multiobj;
using oracle::rel_err;

namespace {

ControlState step_ref(const ControlState& z, double lam, double gam)
{
    const double inf = lam * z.s * z.i / (z.s + z.i);
    ControlState o{z.s - inf, z.i + inf - gam * z.i, 0.0};
    o.m = std::max(z.m, o.i);
    return o;
}

double brute(const ControlProblem& cp, const ControlState& z, std::size_t level, std::size_t t)
{
    if (t == cp.horizon) {
        return cp.terminal(z, t);
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cp.levels.size(); ++j) {
        for (double g : cp.gamma_grid) {
            best = std::min(best, cp.switch_cost[level][j] + cp.running(z, j, g, t) +
                                      brute(cp, step_ref(z, cp.levels[j], g), j, t + 1));
        }
    }
    return best;
}

struct Small {
    ControlProblem base;
    ObjectiveSet obj;
    ControlState z0{900.0, 100.0, 100.0};
};

Small small_instance(std::size_t horizon)
{
    Small s;
    s.base.levels = {0.3, 0.15};
    s.base.gamma_grid = {0.1, 0.25};
    s.base.step = 1.0;
    s.base.horizon = horizon;
    s.base.switch_cost = {{0.0, 0.0}, {0.0, 0.0}};
    s.base.running = [](const ControlState&, std::size_t, double, std::size_t) { return 0.0; };
    s.base.terminal = [](const ControlState&, std::size_t) { return 0.0; };
    Objective peak{s.base.running, s.base.switch_cost, [](const ControlState& z, std::size_t) { return z.m; }, 0.0};
    Objective econ{[](const ControlState& z, std::size_t j, double g, std::size_t) {
                       return (j == 1 ? 20.0 : 0.0) + 50.0 * g + 0.01 * z.i;
                   },
                   {{0.0, 5.0}, {1.0, 0.0}},
                   [](const ControlState& z, std::size_t) { return 0.05 * z.i; },
                   0.0};
    s.obj.objectives = {peak, econ};
    return s;
}

std::shared_ptr<const StateSpace> reachable(const Small& s)
{
    return std::make_shared<ReachableSet>(s.base, s.z0, true);
}

}  // namespace

TEST_CASE("objective tables are the single-objective recursions")
{
    const Small s = small_instance(4);
    const auto space = reachable(s);
    const auto tables = solve_k_objectives(s.obj, s.base, space);
    REQUIRE(tables.size() == 2);
    for (std::size_t m = 0; m < 2; ++m) {
        const DpResult single = backward_dp(problem_for(s.base, s.obj.objectives[m]), space);
        CHECK(table_hash(single) == table_hash(tables[m]));
        const double v = tables[m].value(0, 0, s.z0);
        CHECK(rel_err(v, brute(problem_for(s.base, s.obj.objectives[m]), s.z0, 0, 0)) < 1e-12);
    }
    ObjectiveSet twin;
    twin.objectives = {s.obj.objectives[1], s.obj.objectives[1]};
    const auto same = solve_k_objectives(twin, s.base, space);
    CHECK(table_hash(same[0]) == table_hash(same[1]));
}

TEST_CASE("scalarization properties")
{
    const Small s = small_instance(4);
    const auto space = reachable(s);
    const auto tables = solve_k_objectives(s.obj, s.base, space);
    for (std::size_t m = 0; m < 2; ++m) {
        std::vector<double> w(2, 1e-9);
        w[m] = 1.0 - 1e-9;
        const DpResult d = solve_scalarized(s.obj, w, s.base, space);
        CHECK(std::abs(d.value(0, 0, s.z0) - tables[m].value(0, 0, s.z0)) < 1e-5);
    }
    oracle::Gen g(11);
    for (int trial = 0; trial < 20; ++trial) {
        const double w0 = g.uniform(0.01, 0.99);
        const std::vector<double> w{w0, 1.0 - w0};
        const DpResult d = solve_scalarized(s.obj, w, s.base, space);
        const double v_bar = d.value(0, 0, s.z0);
        const auto costs = evaluate_policy_per_objective(d, s.obj, s.z0, 0);
        const double weighted = w[0] * costs[0] + w[1] * costs[1];
        CHECK(rel_err(weighted, v_bar) < 1e-9);
        // Each objective cost under any policy is at least its own optimum.
        CHECK(costs[0] >= tables[0].value(0, 0, s.z0) - 1e-9);
        CHECK(costs[1] >= tables[1].value(0, 0, s.z0) - 1e-9);
    }
    // Uniform scaling: weights (1/2, 1/2) on c and 3c give twice the table of c.
    ObjectiveSet scaled;
    Objective c = s.obj.objectives[1];
    Objective c3 = c;
    c3.running = [r = c.running](const ControlState& z, std::size_t j, double gm, std::size_t t) {
        return 3.0 * r(z, j, gm, t);
    };
    for (auto& row : c3.switch_cost) {
        for (double& x : row) {
            x *= 3.0;
        }
    }
    c3.terminal = [h = c.terminal](const ControlState& z, std::size_t t) { return 3.0 * h(z, t); };
    scaled.objectives = {c, c3};
    const DpResult half = solve_scalarized(scaled, {0.5, 0.5}, s.base, space);
    const DpResult single = backward_dp(problem_for(s.base, c), space);
    for (std::size_t t = 0; t <= 4; ++t) {
        const auto& a = half.table()[t];
        const auto& b = single.table()[t];
        REQUIRE(a.size() == b.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK(rel_err(a[k], 2.0 * b[k]) < 1e-12);
        }
    }
}

TEST_CASE("scalarized value is concave in the weights")
{
    const Small s = small_instance(4);
    const auto space = reachable(s);
    oracle::Gen g(12);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = g.uniform(0.0, 1.0);
        const double b = g.uniform(0.0, 1.0);
        const double mid = 0.5 * (a + b);
        const double va = solve_scalarized(s.obj, {a, 1.0 - a}, s.base, space).value(0, 0, s.z0);
        const double vb = solve_scalarized(s.obj, {b, 1.0 - b}, s.base, space).value(0, 0, s.z0);
        const double vm = solve_scalarized(s.obj, {mid, 1.0 - mid}, s.base, space).value(0, 0, s.z0);
        CHECK(vm >= 0.5 * (va + vb) - 1e-9);
    }
}

TEST_CASE("replicator update")
{
    // Equal slacks leave the weights unchanged.
    const std::vector<double> w{0.2, 0.3, 0.5};
    const auto same = replicator_update(w, {5.0, 6.0, 7.0}, 10.0, {1.0, 2.0, 3.0}, 0.1);
    for (std::size_t m = 0; m < 3; ++m) {
        CHECK(same.w[m] == doctest::Approx(w[m]).epsilon(1e-14));
    }
    CHECK(replicator_update({1.0}, {3.0}, 2.0, {1.0}, 0.5).w == std::vector<double>{1.0});
    // The objective furthest above its threshold gains weight relative to the others.
    const auto up = replicator_update(w, {5.0, 2.0, 3.0}, 4.0, {1.0, 1.0, 1.0}, 0.05);
    CHECK(up.w[0] / up.w[1] > w[0] / w[1]);
    CHECK(up.w[0] / up.w[2] > w[0] / w[2]);
    // Huge steps are halved until every entry stays above -w/2.
    const auto big = replicator_update({0.5, 0.5}, {-1e6, 0.0}, 0.0, {1.0, 1.0}, 1.0);
    CHECK(big.halvings > 0);
    CHECK_THROWS_AS(replicator_update({0.0, 1.0}, {0.0, 1.0}, 0.0, {1.0, 1.0}, 0.1), Error);
    // Simplex membership on random inputs.
    oracle::Gen g(13);
    for (int trial = 0; trial < 500; ++trial) {
        const int k = g.integer(2, 5);
        std::vector<double> wr(k), v(k), c(k);
        for (int m = 0; m < k; ++m) {
            wr[m] = g.uniform(0.01, 1.0);
            v[m] = g.uniform(-100.0, 100.0);
            c[m] = g.uniform(0.1, 100.0);
        }
        const double sum = std::accumulate(wr.begin(), wr.end(), 0.0);
        for (double& x : wr) {
            x /= sum;
        }
        const auto r = replicator_update(wr, v, g.uniform(-100.0, 100.0), c, g.uniform(0.001, 2.0));
        CHECK(std::accumulate(r.w.begin(), r.w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
        for (double x : r.w) {
            CHECK(x >= kWeightFloor * 0.999);
            CHECK(x <= 1.0);
        }
    }
    StepSizeRule rule;
    CHECK(rule.at(0) == 0.5);
    CHECK(rule.at(3) == doctest::Approx(0.125));
}

TEST_CASE("feasible two-objective instance meets both thresholds")
{
    ToyInstance toy = make_toy_instance(20);
    const auto grid = std::make_shared<QuantizedGrid>(toy.grid);
    construct_feasible_thresholds(toy.objectives, toy.base, grid, toy.z0, toy.level);
    const MultiObjResult r = run_multiobjective(toy.objectives, toy.base, grid, StepSizeRule{}, toy.z0, toy.level, 200);
    CHECK(r.feasible);
    CHECK(r.converged);
    CHECK_FALSE(r.error.has_value());
    for (std::size_t m = 0; m < 2; ++m) {
        CHECK(r.costs[m] <= r.thresholds[m]);
    }
    for (const auto& rec : r.log) {
        CHECK(std::accumulate(rec.w.begin(), rec.w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
        for (double x : rec.w) {
            CHECK(x > 0.0);
        }
    }
    const auto tables = solve_k_objectives(toy.objectives, toy.base, grid);
    CHECK(r.objective_table_hash == table_hash(tables[0]) * 31 + table_hash(tables[1]));
}

TEST_CASE("loose and infeasible thresholds")
{
    Small s = small_instance(3);
    const auto space = reachable(s);
    s.obj.objectives[0].threshold = 1e12;
    s.obj.objectives[1].threshold = 1e12;
    const MultiObjResult loose = run_multiobjective(s.obj, s.base, space, StepSizeRule{}, s.z0, 0, 100);
    CHECK(loose.feasible);
    CHECK(loose.converged);
    const auto tables = solve_k_objectives(s.obj, s.base, space);
    s.obj.objectives[0].threshold = 0.5 * tables[0].value(0, 0, s.z0);
    s.obj.objectives[1].threshold = 0.5 * tables[1].value(0, 0, s.z0);
    const MultiObjResult bad = run_multiobjective(s.obj, s.base, space, StepSizeRule{}, s.z0, 0, 100);
    CHECK_FALSE(bad.feasible);
    REQUIRE(bad.error.has_value());
    CHECK(*bad.error == ErrorCode::NotConverged);
    CHECK(bad.report.find("VIOLATED") != std::string::npos);
}

namespace {

ControlProblem community_problem(double lockdown_weight)
{
    ControlProblem cp;
    cp.levels = paper_levels();
    cp.gamma_grid = linspace(1.0 / 15.0, 1.0 / 3.0, 3);
    cp.switch_cost = paper_switch_matrix(1.0);
    cp.running = [lockdown_weight](const ControlState& z, std::size_t j, double g, std::size_t) {
        return lockdown_weight * static_cast<double>(j) + 0.5 * (g - 1.0 / 15.0) * z.i + 0.01 * z.i;
    };
    cp.terminal = [](const ControlState& z, std::size_t) { return z.i; };
    return cp;
}

TwoTimescaleSpec base_spec()
{
    TwoTimescaleSpec spec;
    spec.eps = 0.1;
    spec.a = 1.0;
    spec.horizon = 40.0;
    spec.init_a = {9000.0, 1000.0, 1000.0};
    spec.init_b = {9500.0, 500.0, 500.0};
    GridSpec g;
    g.s_min = 0.0;
    g.s_max = 10000.0;
    g.n_s = 30;
    g.i_min = 1.0;
    g.i_max = 10000.0;
    g.n_i = 30;
    spec.fast_grid = g;
    spec.slow_grid = g;
    return spec;
}

}  // namespace

TEST_CASE("two-timescale counts")
{
    TwoTimescaleSpec spec = base_spec();
    CHECK(spec.steps_per_interval() == 10);
    CHECK(spec.n_intervals() == 4);
    CHECK(spec.slow_step() == doctest::Approx(1.0));
    spec.eps = 0.3;
    CHECK(spec.steps_per_interval() == 4);
    CHECK(spec.n_intervals() == 10);
    CHECK(spec.slow_step() == doctest::Approx(1.2));
}

TEST_CASE("uncoupled two-timescale control is two independent recursions")
{
    const TwoTimescaleSpec spec = base_spec();
    const ControlProblem fast = community_problem(2.0);
    const ControlProblem slow = community_problem(5.0);
    const TwoTimescaleResult r = two_timescale_control(spec, fast, slow);

    ControlProblem f = fast;
    f.step = spec.a;
    f.horizon = r.n_intervals * r.steps_per_interval;
    const DpResult fd = backward_dp(f, std::make_shared<QuantizedGrid>(spec.fast_grid));
    CHECK(rel_err(r.fast_value, fd.value(0, 0, spec.init_a)) < 1e-9);
    const PolicyTrace ft = fd.rollout(spec.init_a, 0, Rollout::Exact);
    REQUIRE(ft.steps.size() == r.fast.steps.size());
    for (std::size_t k = 0; k < ft.steps.size(); ++k) {
        CHECK(ft.steps[k].level == r.fast.steps[k].level);
        CHECK(ft.steps[k].gamma == r.fast.steps[k].gamma);
    }
    CHECK(rel_err(ft.total, r.fast.total) < 1e-9);

    ControlProblem s = slow;
    s.step = r.slow_step;
    s.horizon = r.n_intervals;
    const DpResult sd = backward_dp(s, std::make_shared<QuantizedGrid>(spec.slow_grid));
    CHECK(rel_err(r.slow_value, sd.value(0, 0, spec.init_b)) < 1e-9);
    CHECK(rel_err(sd.rollout(spec.init_b, 0, Rollout::Exact).total, r.slow.total) < 1e-9);
}

TEST_CASE("single interval base case")
{
    TwoTimescaleSpec spec = base_spec();
    spec.horizon = 10.0;
    spec.lambda_ab = 0.05;
    spec.lambda_ba = 0.05;
    const TwoTimescaleResult r = two_timescale_control(spec, community_problem(2.0), community_problem(5.0));
    CHECK(r.n_intervals == 1);
    CHECK(r.fast.steps.size() == 10);
    CHECK(r.slow.steps.size() == 1);
    CHECK(r.fast_fraction.size() == 2);
}

TEST_CASE("halving eps halves the slow movement over a fixed horizon")
{
    TwoTimescaleSpec spec = base_spec();
    spec.lambda_ab = 0.05;
    spec.lambda_ba = 0.05;
    const ControlProblem fast = community_problem(2.0);
    const ControlProblem slow = community_problem(5.0);
    auto movement = [](const TwoTimescaleResult& r) {
        double d = 0.0;
        for (const auto& st : r.slow.steps) {
            d = std::max({d, std::abs(st.after.s - r.slow.initial.s), std::abs(st.after.i - r.slow.initial.i)});
        }
        return d;
    };
    const TwoTimescaleResult r1 = two_timescale_control(spec, fast, slow);
    spec.eps = 0.05;
    const TwoTimescaleResult r2 = two_timescale_control(spec, fast, slow);
    const double ratio = movement(r1) / movement(r2);
    MESSAGE("slow movement ratio " << ratio << ", coupled deviation " << r1.coupled_deviation << " vs "
                                   << r2.coupled_deviation);
    CHECK(ratio >= 1.5);
    CHECK(ratio <= 3.0);
}

TEST_CASE("Z-grid refinement check")
{
    TwoTimescaleSpec spec = base_spec();
    spec.lambda_ab = 0.05;
    spec.z_refinement_check = true;
    CHECK_NOTHROW(two_timescale_control(spec, community_problem(2.0), community_problem(5.0)));
    spec.z_points = 1;
    CHECK_THROWS_AS(two_timescale_control(spec, community_problem(2.0), community_problem(5.0)), Error);
}
