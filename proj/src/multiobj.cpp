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

#include "sirnc/multiobj.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace sirnc::multiobj {

using control::backward_dp;
using control::euler_step;
using control::GridSpec;
using control::PolicyStep;
using control::PolicyTrace;
using control::QuantizedGrid;
using control::Rollout;

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok) {
        throw Error(ErrorCode::InvalidArgument, what);
    }
}

void check_weights(const ObjectiveSet& obj, const std::vector<double>& w)
{
    require(obj.size() > 0, "at least one objective is required");
    require(w.size() == obj.size(), "one weight per objective is required");
    double sum = 0.0;
    for (double x : w) {
        require(x >= 0.0 && std::isfinite(x), "weights must be non-negative");
        sum += x;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "weights must sum to one");
}

}  // namespace

std::vector<double> ObjectiveSet::thresholds() const
{
    std::vector<double> out;
    out.reserve(objectives.size());
    for (const auto& o : objectives) {
        out.push_back(o.threshold);
    }
    return out;
}

ControlProblem problem_for(const ControlProblem& base, const Objective& obj)
{
    ControlProblem cp = base;
    cp.running = obj.running;
    cp.switch_cost = obj.switch_cost;
    cp.terminal = obj.terminal;
    return cp;
}

ControlProblem scalarize(const ControlProblem& base, const ObjectiveSet& obj, const std::vector<double>& w)
{
    check_weights(obj, w);
    ControlProblem cp = base;
    const std::size_t n = base.n_levels();
    cp.switch_cost.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t m = 0; m < obj.size(); ++m) {
        const auto& c = obj.objectives[m].switch_cost;
        require(c.size() == n, "switching matrix must match the level count");
        for (std::size_t i = 0; i < n; ++i) {
            require(c[i].size() == n, "switching matrix must match the level count");
            for (std::size_t j = 0; j < n; ++j) {
                cp.switch_cost[i][j] += w[m] * c[i][j];
            }
        }
    }
    const ObjectiveSet set = obj;
    cp.running = [set, w](const ControlState& z, std::size_t j, double g, std::size_t t) {
        double s = 0.0;
        for (std::size_t m = 0; m < set.size(); ++m) {
            s += w[m] * set.objectives[m].running(z, j, g, t);
        }
        return s;
    };
    cp.terminal = [set, w](const ControlState& z, std::size_t t) {
        double s = 0.0;
        for (std::size_t m = 0; m < set.size(); ++m) {
            s += w[m] * set.objectives[m].terminal(z, t);
        }
        return s;
    };
    return cp;
}

std::vector<DpResult> solve_k_objectives(const ObjectiveSet& obj, const ControlProblem& base,
                                         std::shared_ptr<const StateSpace> space)
{
    std::vector<DpResult> out;
    out.reserve(obj.size());
    for (const auto& o : obj.objectives) {
        out.push_back(backward_dp(problem_for(base, o), space));
    }
    return out;
}

DpResult solve_scalarized(const ObjectiveSet& obj, const std::vector<double>& w, const ControlProblem& base,
                          std::shared_ptr<const StateSpace> space)
{
    return backward_dp(scalarize(base, obj, w), std::move(space));
}

double StepSizeRule::at(std::size_t n) const
{
    require(a0 > 0.0, "step size must be positive");
    return kind == Kind::Constant ? a0 : a0 / static_cast<double>(n + 1);
}

ReplicatorStep replicator_update(const std::vector<double>& w, const std::vector<double>& v_m, double v_bar,
                                 const std::vector<double>& thresholds, double a_n)
{
    const std::size_t k = w.size();
    require(k > 0 && v_m.size() == k && thresholds.size() == k, "weights, values and thresholds must match");
    require(a_n > 0.0, "step size must be positive");
    for (double x : w) {
        require(x > 0.0, "weights must be strictly positive");
    }
    ReplicatorStep out;
    if (k == 1) {
        out.w = {1.0};
        return out;
    }
    double c_bar = 0.0;
    for (std::size_t m = 0; m < k; ++m) {
        c_bar += w[m] * thresholds[m];
    }
    std::vector<double> raw(k);
    double a = a_n;
    for (;;) {
        bool ok = true;
        for (std::size_t m = 0; m < k; ++m) {
            raw[m] = w[m] + a * w[m] * ((v_m[m] - thresholds[m]) - (v_bar - c_bar));
            ok = ok && raw[m] > -0.5 * w[m];
        }
        if (ok) {
            break;
        }
        if (++out.halvings > 60) {
            throw Error(ErrorCode::StepTooLarge, "replicator step stays too large after 60 halvings");
        }
        a *= 0.5;
    }
    out.raw_sum = std::accumulate(raw.begin(), raw.end(), 0.0);
    // Entries pinned at the floor stay there; the rest share what remains.
    std::vector<bool> pinned(k, false);
    for (;;) {
        double free_sum = 0.0;
        std::size_t n_pinned = 0;
        for (std::size_t m = 0; m < k; ++m) {
            if (pinned[m] || raw[m] <= kWeightFloor) {
                pinned[m] = true;
                ++n_pinned;
            } else {
                free_sum += raw[m];
            }
        }
        if (n_pinned == k) {
            // Every entry collapsed; the update carries no ranking information.
            std::fill(raw.begin(), raw.end(), 1.0 / static_cast<double>(k));
            break;
        }
        const double budget = 1.0 - static_cast<double>(n_pinned) * kWeightFloor;
        bool changed = false;
        for (std::size_t m = 0; m < k; ++m) {
            if (pinned[m]) {
                raw[m] = kWeightFloor;
            } else {
                raw[m] *= budget / free_sum;
                if (raw[m] < kWeightFloor) {
                    changed = true;
                }
            }
        }
        if (!changed) {
            break;
        }
    }
    out.w = std::move(raw);
    return out;
}

std::vector<double> evaluate_policy_per_objective(const DpResult& policy, const ObjectiveSet& obj,
                                                  const ControlState& z0, std::size_t level)
{
    const PolicyTrace tr = policy.rollout(z0, level, Rollout::Grid);
    std::vector<double> out(obj.size(), 0.0);
    for (std::size_t m = 0; m < obj.size(); ++m) {
        const Objective& o = obj.objectives[m];
        std::size_t prev = tr.initial_level;
        ControlState z = tr.initial;
        for (const PolicyStep& st : tr.steps) {
            out[m] += o.switch_cost.at(prev).at(st.level) + o.running(st.before, st.level, st.gamma, st.t);
            prev = st.level;
            z = st.after;
        }
        out[m] += o.terminal(z, policy.horizon());
    }
    return out;
}

std::uint64_t table_hash(const DpResult& dp)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& layer : dp.table()) {
        for (double v : layer) {
            std::uint64_t bits = 0;
            std::memcpy(&bits, &v, sizeof bits);
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xffU;
                h *= 1099511628211ULL;
            }
        }
    }
    return h;
}

MultiObjResult run_multiobjective(const ObjectiveSet& obj, const ControlProblem& base,
                                  std::shared_ptr<const StateSpace> space, const StepSizeRule& rule,
                                  const ControlState& z0, std::size_t level, std::size_t iters, double tolerance)
{
    require(obj.size() > 0, "at least one objective is required");
    for (const auto& o : obj.objectives) {
        require(o.threshold > 0.0, "thresholds must be positive");
    }
    const std::size_t k = obj.size();
    const std::vector<double> thresholds = obj.thresholds();
    const std::vector<DpResult> tables = solve_k_objectives(obj, base, space);
    std::vector<double> v_m(k);
    std::uint64_t hash = 0;
    for (std::size_t m = 0; m < k; ++m) {
        v_m[m] = tables[m].value(0, level, z0);
        hash = hash * 31 + table_hash(tables[m]);
    }

    MultiObjResult res;
    res.thresholds = thresholds;
    res.objective_table_hash = hash;
    std::vector<double> w(k, 1.0 / static_cast<double>(k));
    for (std::size_t n = 0; n < iters; ++n) {
        const DpResult scal = solve_scalarized(obj, w, base, space);
        IterationRecord rec;
        rec.n = n;
        rec.w = w;
        rec.v_m = v_m;
        rec.v_bar = scal.value(0, level, z0);
        const std::vector<double> costs = evaluate_policy_per_objective(scal, obj, z0, level);
        for (std::size_t m = 0; m < k; ++m) {
            rec.slack.push_back(thresholds[m] - costs[m]);
        }
        res.log.push_back(rec);
        const ReplicatorStep st = replicator_update(w, v_m, rec.v_bar, thresholds, rule.at(n));
        double move = 0.0;
        for (std::size_t m = 0; m < k; ++m) {
            move = std::max(move, std::abs(st.w[m] - w[m]));
        }
        w = st.w;
        if (move < tolerance) {
            res.converged = true;
            break;
        }
    }

    std::uint64_t check = 0;
    for (const auto& t : tables) {
        check = check * 31 + table_hash(t);
    }
    if (check != hash) {
        throw Error(ErrorCode::InvalidArgument, "objective tables changed during the iteration");
    }

    res.weights = w;
    res.policy = std::make_shared<DpResult>(solve_scalarized(obj, w, base, space));
    res.costs = evaluate_policy_per_objective(*res.policy, obj, z0, level);
    res.feasible = true;
    std::ostringstream os;
    for (std::size_t m = 0; m < k; ++m) {
        const bool ok = res.costs[m] <= thresholds[m] * (1.0 + 1e-12);
        res.satisfied.push_back(ok);
        res.feasible = res.feasible && ok;
        os << "objective " << m << ": cost " << res.costs[m] << " threshold " << thresholds[m]
           << (ok ? " ok" : " VIOLATED") << "\n";
    }
    if (!res.converged || !res.feasible) {
        res.error = ErrorCode::NotConverged;
        os << (res.converged ? "weights settled but a threshold is violated"
                             : "weights did not settle within the iteration budget")
           << "\n";
    }
    res.report = os.str();
    return res;
}

ToyInstance make_toy_instance(std::size_t horizon)
{
    ToyInstance t;
    t.base.levels = control::paper_levels();
    t.base.gamma_grid = linspace(1.0 / 15.0, 1.0 / 3.0, 4);
    t.base.step = 1.0;
    t.base.horizon = horizon;
    const std::size_t n = t.base.levels.size();
    t.base.switch_cost.assign(n, std::vector<double>(n, 0.0));
    t.base.running = [](const ControlState&, std::size_t, double, std::size_t) { return 0.0; };
    t.base.terminal = [](const ControlState&, std::size_t) { return 0.0; };

    Objective peak;
    peak.running = t.base.running;
    peak.switch_cost = t.base.switch_cost;
    peak.terminal = [](const ControlState& z, std::size_t) { return z.m; };

    Objective cost;
    const std::vector<double> lockdown{0.0, 10.0, 100.0};
    const double gamma0 = 1.0 / 15.0;
    cost.running = [lockdown, gamma0](const ControlState& z, std::size_t j, double g, std::size_t) {
        return lockdown[j] + (g - gamma0) * z.i;
    };
    cost.switch_cost = control::paper_switch_matrix(10.0);
    cost.terminal = t.base.terminal;

    t.objectives.objectives = {peak, cost};
    t.grid.s_min = 0.0;
    t.grid.s_max = 10000.0;
    t.grid.n_s = 20;
    t.grid.i_min = 1.0;
    t.grid.i_max = 10000.0;
    t.grid.n_i = 80;
    t.grid.peak_mode = true;
    t.z0 = {9900.0, 100.0, 100.0};
    return t;
}

void construct_feasible_thresholds(ObjectiveSet& obj, const ControlProblem& base,
                                   std::shared_ptr<const StateSpace> space, const ControlState& z0,
                                   std::size_t level, double factor)
{
    require(obj.size() == 2, "threshold construction needs exactly two objectives");
    const std::vector<DpResult> tables = solve_k_objectives(obj, base, space);
    const std::vector<double> under0 = evaluate_policy_per_objective(tables[0], obj, z0, level);
    const std::vector<double> under1 = evaluate_policy_per_objective(tables[1], obj, z0, level);
    obj.objectives[0].threshold = factor * under1[0];
    obj.objectives[1].threshold = factor * under0[1];
}

// ---------------------------------------------------------------------------

std::size_t TwoTimescaleSpec::steps_per_interval() const
{
    require(eps > 0.0 && eps <= 1.0, "eps must lie in (0, 1]");
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(1.0 / eps - 1e-9)));
}

std::size_t TwoTimescaleSpec::n_intervals() const
{
    require(a > 0.0 && horizon > 0.0, "step and horizon must be positive");
    const double len = static_cast<double>(steps_per_interval()) * a;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(horizon / len - 1e-9)));
}

double TwoTimescaleSpec::slow_step() const { return eps * static_cast<double>(steps_per_interval()) * a; }

namespace {

double fraction(const ControlState& z) { return z.i / (z.s + z.i); }

std::size_t nearest(const std::vector<double>& grid, double x)
{
    std::size_t best = 0;
    for (std::size_t q = 1; q < grid.size(); ++q) {
        if (std::abs(grid[q] - x) < std::abs(grid[best] - x)) {
            best = q;
        }
    }
    return best;
}

// Fast value tables for every interval and Z grid point, built backward.
std::vector<std::vector<std::shared_ptr<DpResult>>> fast_tables(const TwoTimescaleSpec& spec,
                                                                const ControlProblem& fast_cp,
                                                                const std::vector<double>& z_grid)
{
    const std::size_t j_steps = spec.steps_per_interval();
    const std::size_t n_int = spec.n_intervals();
    const std::size_t end = n_int * j_steps;
    const auto grid = std::make_shared<QuantizedGrid>(spec.fast_grid);
    std::vector<std::vector<std::shared_ptr<DpResult>>> dp(n_int, std::vector<std::shared_ptr<DpResult>>(z_grid.size()));
    for (std::size_t n = n_int; n-- > 0;) {
        const std::size_t offset = n * j_steps;
        for (std::size_t q = 0; q < z_grid.size(); ++q) {
            ControlProblem p = fast_cp;
            p.step = spec.a;
            p.horizon = j_steps;
            const double nu = spec.lambda_ab * z_grid[q];
            p.import_rate = nullptr;
            if (nu != 0.0) {
                p.import_rate = [nu](std::size_t) { return nu; };
            }
            p.running = [r = fast_cp.running, offset](const ControlState& z, std::size_t j, double g, std::size_t t) {
                return r(z, j, g, t + offset);
            };
            p.terminal = [h = fast_cp.terminal, end](const ControlState& z, std::size_t) { return h(z, end); };
            control::DpOptions opts;
            if (n + 1 < n_int) {
                opts.terminal_override = [next = dp[n + 1][q]](const ControlState& z, std::size_t level) {
                    return next->value(0, level, z);
                };
            }
            dp[n][q] = std::make_shared<DpResult>(backward_dp(p, grid, opts));
        }
    }
    return dp;
}

double interpolated_root(const std::vector<std::shared_ptr<DpResult>>& row, const std::vector<double>& z_grid,
                         double z, std::size_t level, const ControlState& z0)
{
    const double zc = std::clamp(z, z_grid.front(), z_grid.back());
    std::size_t q = 0;
    while (q + 2 < z_grid.size() && z_grid[q + 1] < zc) {
        ++q;
    }
    const double span = z_grid[q + 1] - z_grid[q];
    const double w = span > 0.0 ? (zc - z_grid[q]) / span : 0.0;
    return (1.0 - w) * row[q]->value(0, level, z0) + w * row[q + 1]->value(0, level, z0);
}

}  // namespace

TwoTimescaleResult two_timescale_control(const TwoTimescaleSpec& spec, const ControlProblem& fast_cp,
                                         const ControlProblem& slow_cp)
{
    control::validate_problem(fast_cp);
    control::validate_problem(slow_cp);
    require(spec.z_points >= 2, "the Z grid needs at least two points");
    require(spec.lambda_ab >= 0.0 && spec.lambda_ba >= 0.0, "coupling rates must be non-negative");
    require(spec.outer_iterations >= 1, "at least one forward pass is required");

    TwoTimescaleResult res;
    const std::size_t j_steps = spec.steps_per_interval();
    const std::size_t n_int = spec.n_intervals();
    res.steps_per_interval = j_steps;
    res.n_intervals = n_int;
    res.slow_step = spec.slow_step();
    const double yb0 = fraction(spec.init_b);
    res.z_grid = linspace(0.0, spec.z_range_factor * yb0, spec.z_points);
    if (!(res.z_grid.back() > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "slow community needs I_b(0) > 0 for the Z grid");
    }

    const auto dp = fast_tables(spec, fast_cp, res.z_grid);

    // Initial slow path: first level and removal rate held, a's fraction frozen.
    std::vector<double> y_a(n_int + 1, fraction(spec.init_a));
    std::vector<double> y_b(n_int + 1, yb0);
    {
        ControlState z = spec.init_b;
        for (std::size_t m = 0; m < n_int; ++m) {
            z = euler_step(z, slow_cp.levels[spec.level_b], slow_cp.gamma_grid[0], res.slow_step,
                           spec.lambda_ba * y_a[0]);
            y_b[m + 1] = fraction(z);
        }
    }

    const auto slow_grid = std::make_shared<QuantizedGrid>(spec.slow_grid);
    for (std::size_t it = 0; it < spec.outer_iterations; ++it) {
        // Fast rollout with the frozen slow fractions.
        PolicyTrace fast;
        fast.initial = spec.init_a;
        fast.initial_level = spec.level_a;
        ControlState z = spec.init_a;
        std::size_t level = spec.level_a;
        res.z_used.assign(n_int, 0.0);
        for (std::size_t n = 0; n < n_int; ++n) {
            const double zn = y_b[n + 1];
            res.z_used[n] = zn;
            const DpResult& table = *dp[n][nearest(res.z_grid, zn)];
            for (std::size_t t = 0; t < j_steps; ++t) {
                const auto [j, u] = table.action(t, level, z);
                PolicyStep st;
                st.t = n * j_steps + t;
                st.level = j;
                st.gamma = fast_cp.gamma_grid[u];
                st.before = z;
                st.running = fast_cp.running(z, j, st.gamma, st.t);
                st.switching = fast_cp.switch_cost[level][j];
                st.after = euler_step(z, fast_cp.levels[j], st.gamma, spec.a, spec.lambda_ab * zn);
                fast.total_running += st.running;
                fast.total_switching += st.switching;
                fast.steps.push_back(st);
                z = st.after;
                level = j;
            }
            y_a[n + 1] = fraction(z);
        }
        fast.terminal = fast_cp.terminal(z, n_int * j_steps);
        fast.total = fast.total_running + fast.total_switching + fast.terminal;
        res.fast = fast;

        // Slow recursion with a's boundary fractions frozen.
        ControlProblem sp = slow_cp;
        sp.step = res.slow_step;
        sp.horizon = n_int;
        sp.import_rate = nullptr;
        if (spec.lambda_ba != 0.0) {
            sp.import_rate = [ya = y_a, lba = spec.lambda_ba](std::size_t m) { return lba * ya.at(m); };
        }
        const DpResult slow_dp = backward_dp(sp, slow_grid);
        res.slow = slow_dp.rollout(spec.init_b, spec.level_b, Rollout::Exact);
        res.slow_value = slow_dp.value(0, spec.level_b, spec.init_b);
        for (std::size_t m = 0; m < n_int; ++m) {
            y_b[m + 1] = fraction(res.slow.steps[m].after);
        }
    }
    res.fast_fraction = y_a;
    res.fast_value = interpolated_root(dp[0], res.z_grid, res.z_used[0], spec.level_a, spec.init_a);

    if (spec.z_refinement_check) {
        const std::vector<double> fine = linspace(0.0, res.z_grid.back(), 2 * spec.z_points - 1);
        const auto dp_fine = fast_tables(spec, fast_cp, fine);
        const double v = interpolated_root(dp_fine[0], fine, res.z_used[0], spec.level_a, spec.init_a);
        const double rel = std::abs(v - res.fast_value) / std::max(std::abs(v), 1e-300);
        if (rel > 0.05) {
            std::ostringstream os;
            os << "fast value changes by " << rel << " when the Z grid is refined";
            throw Error(ErrorCode::GridTooCoarse, os.str());
        }
    }

    // Fully coupled simulation on the fast clock under the same controls.
    ControlState za = spec.init_a;
    ControlState zb = spec.init_b;
    for (std::size_t n = 0; n < n_int; ++n) {
        const PolicyStep& slow = res.slow.steps[n];
        for (std::size_t t = 0; t < j_steps; ++t) {
            const PolicyStep& f = res.fast.steps[n * j_steps + t];
            const double ya = fraction(za);
            const double yb = fraction(zb);
            za = euler_step(za, fast_cp.levels[f.level], f.gamma, spec.a, spec.lambda_ab * yb);
            zb = euler_step(zb, slow_cp.levels[slow.level], slow.gamma, spec.eps * spec.a, spec.lambda_ba * ya);
        }
        res.coupled_deviation =
            std::max({res.coupled_deviation, std::abs(zb.s - slow.after.s), std::abs(zb.i - slow.after.i)});
    }
    return res;
}

}  // namespace sirnc::multiobj
