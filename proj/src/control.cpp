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

#include "sirnc/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sirnc/closedform.hpp"

namespace sirnc::control {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& what)
{
    if (!ok) {
        throw Error(ErrorCode::InvalidArgument, what);
    }
}

double leaf_count(const ControlProblem& cp, std::size_t depth)
{
    return std::pow(static_cast<double>(cp.n_levels() * cp.n_gammas()), static_cast<double>(depth));
}

ControlState apply(const ControlProblem& cp, const ControlState& z, std::size_t j, std::size_t u, std::size_t t)
{
    return euler_step(z, cp.levels[j], cp.gamma_grid[u], cp.step, cp.nu(t));
}

}  // namespace

ControlState euler_step(const ControlState& z, double lambda, double gamma, double a, double nu)
{
    const double n = z.s + z.i;
    if (!(n > 0.0)) {
        throw Error(ErrorCode::ZeroPopulationDivisor, "Euler step needs S + I > 0");
    }
    const double infections = lambda * z.s * z.i / n + nu * z.s;
    ControlState out;
    out.s = z.s - a * infections;
    out.i = z.i + a * (infections - gamma * z.i);
    if (out.s < 0.0 || out.i < 0.0) {
        throw Error(ErrorCode::StepTooLarge, "Euler step makes the state negative; reduce the step");
    }
    if (!std::isfinite(out.s) || !std::isfinite(out.i)) {
        throw Error(ErrorCode::NonFiniteState, "Euler step produced a non-finite state");
    }
    out.m = std::max(z.m, out.i);
    return out;
}

std::vector<std::string> validate_problem(const ControlProblem& cp)
{
    const std::size_t n = cp.n_levels();
    require(n > 0, "at least one contact-rate level is required");
    require(cp.n_gammas() > 0, "at least one removal rate is required");
    for (double l : cp.levels) {
        require(l > 0.0 && std::isfinite(l), "levels must be positive");
    }
    for (double g : cp.gamma_grid) {
        require(g > 0.0 && std::isfinite(g), "removal rates must be positive");
    }
    require(cp.step > 0.0, "step must be positive");
    require(static_cast<bool>(cp.running) && static_cast<bool>(cp.terminal), "cost functions must be set");
    require(cp.switch_cost.size() == n, "switching matrix must be n x n");
    for (std::size_t i = 0; i < n; ++i) {
        require(cp.switch_cost[i].size() == n, "switching matrix must be n x n");
        require(cp.switch_cost[i][i] == 0.0, "switching matrix must have a zero diagonal");
        for (double c : cp.switch_cost[i]) {
            require(c >= 0.0 && std::isfinite(c), "switching costs must be non-negative");
        }
    }
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = 0; k < n; ++k) {
                if (i == j || j == k || i == k) {
                    continue;
                }
                const auto& c = cp.switch_cost;
                if (!(c[i][k] < c[i][j] + c[j][k])) {
                    std::ostringstream os;
                    os << "switching cost " << i << "->" << k << " is not below the detour via " << j;
                    warnings.push_back(os.str());
                }
            }
        }
    }
    return warnings;
}

double replay_total(const ControlProblem& cp, const PolicyTrace& trace)
{
    ControlState z = trace.initial;
    std::size_t level = trace.initial_level;
    double total = 0.0;
    std::size_t t_end = 0;
    for (const PolicyStep& st : trace.steps) {
        total += cp.switch_cost.at(level).at(st.level) + cp.running(z, st.level, st.gamma, st.t);
        z = euler_step(z, cp.levels.at(st.level), st.gamma, cp.step, cp.nu(st.t));
        level = st.level;
        t_end = st.t + 1;
    }
    return total + cp.terminal(z, t_end);
}

// ---------------------------------------------------------------------------

PaperCostParams paper_defaults(double a3, AlphaMode mode)
{
    PaperCostParams pp;
    pp.a3 = a3;
    pp.alpha_mode = mode;
    const ModelParams p{pp.natural_lambda, pp.gamma0, pp.gamma0};
    pp.alpha_t_max = closedform::ClosedFormSolution(p, pp.reference_init).peak().t_max;
    return pp;
}

std::vector<double> paper_levels() { return {0.25, 3.0 / 16.0, 0.125}; }

std::vector<double> paper_gamma_grid() { return linspace(1.0 / 15.0, 1.0 / 3.0, 10); }

std::vector<std::vector<double>> paper_switch_matrix(double a2)
{
    return {{0.0, 2.0 * a2, 3.0 * a2}, {0.1 * a2, 0.0, 2.0 * a2}, {0.1 * a2, 0.1 * a2, 0.0}};
}

double alpha_at(const PaperCostParams& pp, double t)
{
    if (pp.alpha_mode == AlphaMode::Constant) {
        return pp.alpha_constant;
    }
    require(pp.alpha_t_max > 0.0, "alpha ramp needs a positive T_max");
    return std::max(0.1, 1.0 - 0.9 * t / pp.alpha_t_max);
}

double paper_running_cost(const PaperCostParams& pp, const ControlState& z, std::size_t level, double gamma, double t)
{
    require(t > 0.0, "running cost epochs are counted from 1");
    require(level < pp.lockdown_cost.size(), "level index out of range");
    return pp.lockdown_cost[level] + (pp.A2 + pp.A3 / t) * z.i * (gamma - pp.gamma0) + pp.A4 * std::pow(z.i, pp.a3);
}

double paper_terminal_cost(const PaperCostParams& pp, const ControlState& z, double t, double uncontrolled_i)
{
    const double x = pp.a1 * (z.i - alpha_at(pp, t) * uncontrolled_i);
    if (x <= kTerminalExponentCap) {
        return pp.A1 * std::exp(x);
    }
    return pp.A1 * std::exp(kTerminalExponentCap) * (1.0 + (x - kTerminalExponentCap));
}

double uncontrolled_reference(const ModelParams& p, const InitialState& init, double t)
{
    return closedform::ClosedFormSolution(p, init).infected(t);
}

ControlProblem make_paper_problem(const PaperCostParams& pp, double step)
{
    ControlProblem cp;
    cp.levels = paper_levels();
    cp.switch_cost = paper_switch_matrix(pp.a2);
    cp.gamma_grid = paper_gamma_grid();
    cp.step = step;
    cp.horizon = pp.lookahead;
    require(pp.lockdown_cost.size() == cp.levels.size(), "one lockdown cost per level is required");
    cp.running = [pp](const ControlState& z, std::size_t level, double gamma, std::size_t t) {
        return paper_running_cost(pp, z, level, gamma, static_cast<double>(t + 1));
    };
    const auto reference = std::make_shared<closedform::ClosedFormSolution>(
        ModelParams{pp.natural_lambda, pp.gamma0, pp.gamma0}, pp.reference_init);
    cp.terminal = [pp, reference, step](const ControlState& z, std::size_t t) {
        const double time = static_cast<double>(t) * step;
        return paper_terminal_cost(pp, z, time, reference->infected(time));
    };
    return cp;
}

// ---------------------------------------------------------------------------

namespace {

struct TreeSearcher {
    const ControlProblem& cp;
    std::vector<std::pair<std::size_t, std::size_t>> path;
    PlanResult best;
    bool found = false;

    void run(const ControlState& z, std::size_t level, std::size_t t, std::size_t remaining, double acc)
    {
        if (remaining == 0) {
            const double c = acc + cp.terminal(z, t);
            if (!found || c < best.cost) {
                found = true;
                best.cost = c;
                best.actions = path;
            }
            return;
        }
        for (std::size_t j = 0; j < cp.n_levels(); ++j) {
            const double sw = cp.switch_cost[level][j];
            for (std::size_t u = 0; u < cp.n_gammas(); ++u) {
                const double c = acc + sw + cp.running(z, j, cp.gamma_grid[u], t);
                path.emplace_back(j, u);
                run(apply(cp, z, j, u, t), j, t + 1, remaining - 1, c);
                path.pop_back();
            }
        }
    }
};

}  // namespace

PlanResult tree_search(const ControlProblem& cp, const ControlState& z, std::size_t level, std::size_t t0,
                       std::size_t depth)
{
    validate_problem(cp);
    require(level < cp.n_levels(), "initial level out of range");
    if (leaf_count(cp, depth) > kMaxTreeLeaves) {
        throw Error(ErrorCode::TreeTooLarge, "search tree exceeds the leaf limit; use backward_dp");
    }
    TreeSearcher s{cp, {}, {}, false};
    s.run(z, level, t0, depth, 0.0);
    return s.best;
}

PolicyTrace tree_search_mpc(const ControlProblem& cp, const ControlState& init, std::size_t init_level,
                            std::size_t total_horizon)
{
    validate_problem(cp);
    require(cp.horizon > 0, "lookahead must be positive");
    PolicyTrace trace;
    trace.initial = init;
    trace.initial_level = init_level;
    ControlState z = init;
    std::size_t level = init_level;
    for (std::size_t t = 0; t < total_horizon; ++t) {
        const std::size_t depth = std::min(cp.horizon, total_horizon - t);
        const PlanResult plan = tree_search(cp, z, level, t, depth);
        const auto [j, u] = plan.actions.front();
        PolicyStep st;
        st.t = t;
        st.level = j;
        st.gamma = cp.gamma_grid[u];
        st.before = z;
        st.running = cp.running(z, j, st.gamma, t);
        st.switching = cp.switch_cost[level][j];
        st.after = apply(cp, z, j, u, t);
        trace.total_running += st.running;
        trace.total_switching += st.switching;
        z = st.after;
        level = j;
        trace.steps.push_back(st);
    }
    trace.terminal = cp.terminal(z, total_horizon);
    trace.total = trace.total_running + trace.total_switching + trace.terminal;
    return trace;
}

// ---------------------------------------------------------------------------

std::size_t StateSpace::successor(const ControlProblem& cp, std::size_t t, std::size_t k, std::size_t j,
                                  std::size_t u) const
{
    return locate(t + 1, apply(cp, state(t, k), j, u, t));
}

GridSpec GridSpec::refined() const
{
    GridSpec g = *this;
    g.n_s = 2 * n_s - 1;
    g.n_i = 2 * n_i - 1;
    return g;
}

QuantizedGrid::QuantizedGrid(GridSpec spec) : spec_(spec)
{
    require(spec_.n_s >= 2 && spec_.n_i >= 2, "grid needs at least two points per axis");
    require(spec_.s_min >= 0.0 && spec_.s_max > spec_.s_min, "grid needs 0 <= s_min < s_max");
    require(spec_.i_min > 0.0 && spec_.i_max > spec_.i_min, "grid needs 0 < i_min < i_max");
    s_pts_ = linspace(spec_.s_min, spec_.s_max, spec_.n_s);
    const std::vector<double> logs = linspace(std::log(spec_.i_min), std::log(spec_.i_max), spec_.n_i);
    i_pts_.reserve(logs.size());
    for (double l : logs) {
        i_pts_.push_back(std::exp(l));
    }
    i_pts_.front() = spec_.i_min;
    i_pts_.back() = spec_.i_max;
    size_ = spec_.n_s * spec_.n_i * (spec_.peak_mode ? spec_.n_i : 1);
}

std::size_t QuantizedGrid::s_index(double s) const
{
    const double ds = (spec_.s_max - spec_.s_min) / static_cast<double>(spec_.n_s - 1);
    const double x = std::round((std::clamp(s, spec_.s_min, spec_.s_max) - spec_.s_min) / ds);
    return std::min(static_cast<std::size_t>(x), spec_.n_s - 1);
}

std::size_t QuantizedGrid::i_index(double i) const
{
    const double lo = std::log(spec_.i_min);
    const double dl = (std::log(spec_.i_max) - lo) / static_cast<double>(spec_.n_i - 1);
    const double x = std::round((std::log(std::clamp(i, spec_.i_min, spec_.i_max)) - lo) / dl);
    return std::min(static_cast<std::size_t>(x), spec_.n_i - 1);
}

ControlState QuantizedGrid::state(std::size_t, std::size_t k) const
{
    const std::size_t n_m = spec_.peak_mode ? spec_.n_i : 1;
    const std::size_t im = k % n_m;
    const std::size_t ii = (k / n_m) % spec_.n_i;
    const std::size_t is = k / (n_m * spec_.n_i);
    return {s_pts_.at(is), i_pts_.at(ii), spec_.peak_mode ? i_pts_[im] : 0.0};
}

std::size_t QuantizedGrid::locate(std::size_t, const ControlState& z) const
{
    const std::size_t n_m = spec_.peak_mode ? spec_.n_i : 1;
    const std::size_t im = spec_.peak_mode ? i_index(z.m) : 0;
    return (s_index(z.s) * spec_.n_i + i_index(z.i)) * n_m + im;
}

ReachableSet::ReachableSet(const ControlProblem& cp, const ControlState& z0, bool peak_mode)
    : peak_mode_(peak_mode), n_actions_(cp.n_levels() * cp.n_gammas())
{
    validate_problem(cp);
    layers_.push_back({z0});
    index_.emplace_back();
    index_.back().emplace(key(z0), 0);
    double total = 1.0;
    for (std::size_t t = 0; t < cp.horizon; ++t) {
        const auto& cur = layers_[t];
        std::vector<ControlState> next;
        std::map<Key, std::size_t> idx;
        std::vector<std::size_t> succ(cur.size() * n_actions_);
        for (std::size_t k = 0; k < cur.size(); ++k) {
            for (std::size_t j = 0; j < cp.n_levels(); ++j) {
                for (std::size_t u = 0; u < cp.n_gammas(); ++u) {
                    const ControlState z = apply(cp, cur[k], j, u, t);
                    const auto [it, inserted] = idx.emplace(key(z), next.size());
                    if (inserted) {
                        next.push_back(z);
                    }
                    succ[k * n_actions_ + j * cp.n_gammas() + u] = it->second;
                }
            }
        }
        total += static_cast<double>(next.size());
        if (total > kMaxTreeLeaves) {
            throw Error(ErrorCode::TreeTooLarge, "reachable set exceeds the state limit; use a quantized grid");
        }
        succ_.push_back(std::move(succ));
        layers_.push_back(std::move(next));
        index_.push_back(std::move(idx));
    }
}

ReachableSet::Key ReachableSet::key(const ControlState& z) const
{
    return {z.s, z.i, peak_mode_ ? z.m : 0.0};
}

std::size_t ReachableSet::locate(std::size_t t, const ControlState& z) const
{
    const auto& idx = index_.at(t);
    const auto it = idx.find(key(z));
    if (it == idx.end()) {
        throw Error(ErrorCode::InvalidArgument, "state is not in the reachable set");
    }
    return it->second;
}

std::size_t ReachableSet::successor(const ControlProblem& cp, std::size_t t, std::size_t k, std::size_t j,
                                    std::size_t u) const
{
    return succ_.at(t).at(k * n_actions_ + j * cp.n_gammas() + u);
}

std::size_t ReachableSet::total_states() const
{
    std::size_t n = 0;
    for (const auto& l : layers_) {
        n += l.size();
    }
    return n;
}

// ---------------------------------------------------------------------------

DpResult::DpResult(const ControlProblem& cp, std::shared_ptr<const StateSpace> space, DpOptions opts)
    : cp_(cp), space_(std::move(space)), opts_(std::move(opts)), horizon_(cp.horizon), n_levels_(cp.n_levels())
{
    validate_problem(cp);
    require(space_ != nullptr, "state space must be set");
    const std::size_t L = n_levels_;
    const std::size_t G = cp.n_gammas();
    value_.resize(horizon_ + 1);
    choice_.resize(horizon_);

    const std::size_t n_end = space_->layer_size(horizon_);
    auto& v_end = value_[horizon_];
    v_end.assign(L * n_end, 0.0);
    for (std::size_t k = 0; k < n_end; ++k) {
        const ControlState z = space_->state(horizon_, k);
        for (std::size_t i = 0; i < L; ++i) {
            v_end[i * n_end + k] = opts_.terminal_override ? opts_.terminal_override(z, i) : cp.terminal(z, horizon_);
        }
    }

    // Successor tables are time independent on a stationary grid without imports.
    const bool reuse = space_->stationary() && !cp.import_rate;
    std::vector<std::size_t> succ;
    bool have_succ = false;

    std::vector<double> best_j(L);
    std::vector<std::size_t> best_u(L);
    for (std::size_t tt = horizon_; tt-- > 0;) {
        const std::size_t n = space_->layer_size(tt);
        const std::size_t n_next = space_->layer_size(tt + 1);
        if (!(reuse && have_succ)) {
            succ.resize(n * L * G);
            for (std::size_t k = 0; k < n; ++k) {
                for (std::size_t j = 0; j < L; ++j) {
                    for (std::size_t u = 0; u < G; ++u) {
                        succ[(k * L + j) * G + u] = space_->successor(cp, tt, k, j, u);
                    }
                }
            }
            have_succ = true;
        }
        const auto& v_next = value_[tt + 1];
        auto& v = value_[tt];
        auto& ch = choice_[tt];
        v.assign(L * n, 0.0);
        ch.assign(L * n, 0);
        for (std::size_t k = 0; k < n; ++k) {
            const ControlState z = space_->state(tt, k);
            for (std::size_t j = 0; j < L; ++j) {
                double best = kInf;
                std::size_t arg = 0;
                for (std::size_t u = 0; u < G; ++u) {
                    const double c = cp.running(z, j, cp.gamma_grid[u], tt) +
                                     v_next[j * n_next + succ[(k * L + j) * G + u]];
                    if (u == 0 || c < best) {
                        best = c;
                        arg = u;
                    }
                }
                best_j[j] = best;
                best_u[j] = arg;
            }
            for (std::size_t i = 0; i < L; ++i) {
                double best = kInf;
                std::size_t arg = 0;
                for (std::size_t j = 0; j < L; ++j) {
                    const double c = cp.switch_cost[i][j] + best_j[j];
                    if (j == 0 || c < best) {
                        best = c;
                        arg = j;
                    }
                }
                v[i * n + k] = best;
                ch[i * n + k] = static_cast<std::uint32_t>(arg * G + best_u[arg]);
            }
        }
    }
}

double DpResult::value_at(std::size_t t, std::size_t level, std::size_t k) const
{
    const std::size_t n = space_->layer_size(t);
    require(level < n_levels_ && k < n, "value lookup out of range");
    return value_.at(t)[level * n + k];
}

double DpResult::value(std::size_t t, std::size_t level, const ControlState& z) const
{
    return value_at(t, level, space_->locate(t, z));
}

std::pair<std::size_t, std::size_t> DpResult::action(std::size_t t, std::size_t level, std::size_t k) const
{
    const std::size_t n = space_->layer_size(t);
    require(t < horizon_ && level < n_levels_ && k < n, "action lookup out of range");
    const std::uint32_t c = choice_[t][level * n + k];
    const std::size_t g = cp_.n_gammas();
    return {c / g, c % g};
}

std::pair<std::size_t, std::size_t> DpResult::action(std::size_t t, std::size_t level, const ControlState& z) const
{
    return action(t, level, space_->locate(t, z));
}

PolicyTrace DpResult::rollout(const ControlState& z0, std::size_t level, Rollout mode) const
{
    const ControlProblem& cp = cp_;
    PolicyTrace trace;
    std::size_t k = space_->locate(0, z0);
    ControlState z = mode == Rollout::Grid ? space_->state(0, k) : z0;
    trace.initial = z;
    trace.initial_level = level;
    for (std::size_t t = 0; t < horizon_; ++t) {
        const auto [j, u] = action(t, level, k);
        PolicyStep st;
        st.t = t;
        st.level = j;
        st.gamma = cp.gamma_grid[u];
        st.before = z;
        st.running = cp.running(z, j, st.gamma, t);
        st.switching = cp.switch_cost[level][j];
        if (mode == Rollout::Grid) {
            k = space_->successor(cp, t, k, j, u);
            st.after = space_->state(t + 1, k);
        } else {
            st.after = apply(cp, z, j, u, t);
            k = space_->locate(t + 1, st.after);
        }
        trace.total_running += st.running;
        trace.total_switching += st.switching;
        z = st.after;
        level = j;
        trace.steps.push_back(st);
    }
    trace.terminal = opts_.terminal_override ? opts_.terminal_override(z, level) : cp.terminal(z, horizon_);
    trace.total = trace.total_running + trace.total_switching + trace.terminal;
    return trace;
}

DpResult backward_dp(const ControlProblem& cp, std::shared_ptr<const StateSpace> space, DpOptions opts)
{
    return DpResult(cp, std::move(space), std::move(opts));
}

void check_grid_refinement(const ControlProblem& cp, const GridSpec& spec, const ControlState& z0, std::size_t level,
                           double tolerance)
{
    const DpResult coarse = backward_dp(cp, std::make_shared<QuantizedGrid>(spec));
    const DpResult fine = backward_dp(cp, std::make_shared<QuantizedGrid>(spec.refined()));
    const double v0 = coarse.value(0, level, z0);
    const double v1 = fine.value(0, level, z0);
    const double rel = std::abs(v0 - v1) / std::max(std::abs(v1), 1e-300);
    if (!(rel <= tolerance)) {
        std::ostringstream os;
        os << "value changes by " << rel << " under grid refinement (coarse " << v0 << ", fine " << v1 << ")";
        throw Error(ErrorCode::GridTooCoarse, os.str());
    }
}

ControlProblem make_peak_problem(const ControlProblem& base)
{
    ControlProblem cp = base;
    cp.running = [](const ControlState&, std::size_t, double, std::size_t) { return 0.0; };
    cp.terminal = [](const ControlState& z, std::size_t) { return z.m; };
    return cp;
}

}  // namespace sirnc::control
