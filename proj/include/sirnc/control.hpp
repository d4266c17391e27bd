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

#ifndef SIRNC_CONTROL_HPP_
#define SIRNC_CONTROL_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "sirnc/core.hpp"

/**
 * @file
 * @brief Discrete-time lockdown / testing control of the SIR-NC model.
 *
 * Epochs are indexed t = 0, 1, ..., T. At epoch t the controller picks a
 * contact-rate level l_j (paying c(l_i, l_j) when it differs from the previous
 * level l_i) and a removal rate u from a finite grid, pays k^j(z, u, t), and the
 * state moves by one Euler step of length a. The terminal cost h(z, T) closes
 * the horizon.
 */

namespace sirnc::control {

/// (S, I) plus the running maximum of I, used only in peak mode.
struct ControlState {
    double s = 0.0;
    double i = 0.0;
    double m = 0.0;
};

/// One Euler step; m becomes max(m, I+). `nu` adds an external infection
/// inflow nu * S. Throws StepTooLarge when S or I would turn negative.
ControlState euler_step(const ControlState& z, double lambda, double gamma, double a, double nu = 0.0);

using RunningCost = std::function<double(const ControlState&, std::size_t level, double gamma, std::size_t t)>;
using TerminalCost = std::function<double(const ControlState&, std::size_t t)>;

struct ControlProblem {
    std::vector<double> levels;
    /// switch_cost[i][j]: cost of moving from level i to level j.
    std::vector<std::vector<double>> switch_cost;
    std::vector<double> gamma_grid;
    double step = 1.0;
    /// Number of decision epochs (lookahead for MPC).
    std::size_t horizon = 3;
    RunningCost running;
    TerminalCost terminal;
    /// Optional per-epoch imported-infection rate.
    std::function<double(std::size_t t)> import_rate;

    std::size_t n_levels() const { return levels.size(); }
    std::size_t n_gammas() const { return gamma_grid.size(); }
    double nu(std::size_t t) const { return import_rate ? import_rate(t) : 0.0; }
};

/// Checks shapes, zero diagonal, non-negative entries and positive rates;
/// throws InvalidArgument on hard errors. Returns warnings for triples that
/// violate the strict triangle inequality c(i,k) < c(i,j) + c(j,k).
std::vector<std::string> validate_problem(const ControlProblem& cp);

struct PolicyStep {
    std::size_t t = 0;
    std::size_t level = 0;
    double gamma = 0.0;
    ControlState before;
    ControlState after;
    double running = 0.0;
    double switching = 0.0;
};

struct PolicyTrace {
    ControlState initial;
    std::size_t initial_level = 0;
    std::vector<PolicyStep> steps;
    double total_running = 0.0;
    double total_switching = 0.0;
    double terminal = 0.0;
    double total = 0.0;
};

/// Re-runs the recorded controls through euler_step and the cost functions and
/// returns the recomputed total.
double replay_total(const ControlProblem& cp, const PolicyTrace& trace);

// ---------------------------------------------------------------------------
// Cost model of the worked example

enum class AlphaMode { Constant, Ramp };

struct PaperCostParams {
    double A1 = 100.0;
    double a1 = 10.0;
    AlphaMode alpha_mode = AlphaMode::Constant;
    double alpha_constant = 0.1;
    /// Time at which the ramp reaches 0.1; defaults to the closed-form peak time.
    double alpha_t_max = 0.0;
    std::vector<double> lockdown_cost{0.0, 1e4, 1e5};
    double a2 = 1e4;
    double A2 = 100.0;
    double A3 = 100.0;
    double gamma0 = 1.0 / 15.0;
    double A4 = 10.0;
    double a3 = 1.2;
    std::size_t lookahead = 3;
    /// Natural dynamics for the uncontrolled reference I_o.
    double natural_lambda = 0.25;
    InitialState reference_init{9999.0, 1.0, 0.0};
};

/// Paper defaults with alpha_t_max filled in from the closed form.
PaperCostParams paper_defaults(double a3 = 1.2, AlphaMode mode = AlphaMode::Constant);

std::vector<double> paper_levels();
std::vector<double> paper_gamma_grid();
std::vector<std::vector<double>> paper_switch_matrix(double a2);

/// alpha(t): constant, or 1 - 0.9 t / T_max clipped below at 0.1.
double alpha_at(const PaperCostParams& pp, double t);

/// L_level + (A2 + A3 / t) I (gamma - gamma0) + A4 I^a3. `t` is the decision
/// epoch counted from 1.
double paper_running_cost(const PaperCostParams& pp, const ControlState& z, std::size_t level, double gamma,
                          double t);

/// Exponent above which the terminal cost continues linearly in the exponent,
/// keeping it finite and strictly increasing.
inline constexpr double kTerminalExponentCap = 600.0;

/// A1 exp(a1 (I - alpha(t) I_o(t))) with the overflow continuation above.
double paper_terminal_cost(const PaperCostParams& pp, const ControlState& z, double t, double uncontrolled_i);

/// I_o(t): uncontrolled closed-form I at physical time t.
double uncontrolled_reference(const ModelParams& p, const InitialState& init, double t);

/// ControlProblem for the worked example. Epoch k corresponds to physical time
/// k * step and to decision epoch k + 1 in the running cost.
ControlProblem make_paper_problem(const PaperCostParams& pp, double step = 1.0);

// ---------------------------------------------------------------------------
// Forward tree search and MPC

/// Largest tree (number of leaves) the search is allowed to enumerate.
inline constexpr double kMaxTreeLeaves = 1e7;

struct PlanResult {
    double cost = 0.0;
    std::vector<std::pair<std::size_t, std::size_t>> actions;  // (level, gamma index)
};

/// Exhaustive search over all action sequences of length `depth` starting at
/// epoch t0, with terminal cost at t0 + depth. Ties keep the first sequence in
/// lexicographic (level, gamma) order.
PlanResult tree_search(const ControlProblem& cp, const ControlState& z, std::size_t level, std::size_t t0,
                       std::size_t depth);

/// Receding-horizon control: plan over min(lookahead, remaining) epochs, apply
/// the first action, repeat for total_horizon epochs.
PolicyTrace tree_search_mpc(const ControlProblem& cp, const ControlState& init, std::size_t init_level,
                            std::size_t total_horizon);

// ---------------------------------------------------------------------------
// Backward dynamic programming

/// Layered state space for the backward recursion.
class StateSpace {
public:
    virtual ~StateSpace() = default;
    virtual std::size_t layer_size(std::size_t t) const = 0;
    virtual ControlState state(std::size_t t, std::size_t k) const = 0;
    /// Index in layer t of the point representing z.
    virtual std::size_t locate(std::size_t t, const ControlState& z) const = 0;
    /// True when every layer is the same set of points.
    virtual bool stationary() const { return false; }
    /// Index in layer t+1 reached from point k of layer t under action (j, u).
    virtual std::size_t successor(const ControlProblem& cp, std::size_t t, std::size_t k, std::size_t j,
                                  std::size_t u) const;
};

/// Tensor grid: S linear, I log-spaced, M (peak mode) on the same log grid as I.
/// Projection is to the nearest point per coordinate (nearest in log for I, M).
struct GridSpec {
    double s_min = 0.0;
    double s_max = 1e4;
    std::size_t n_s = 40;
    double i_min = 1.0;
    double i_max = 1e4;
    std::size_t n_i = 40;
    bool peak_mode = false;

    GridSpec refined() const;
};

class QuantizedGrid : public StateSpace {
public:
    explicit QuantizedGrid(GridSpec spec);
    std::size_t layer_size(std::size_t) const override { return size_; }
    ControlState state(std::size_t t, std::size_t k) const override;
    std::size_t locate(std::size_t t, const ControlState& z) const override;
    bool stationary() const override { return true; }
    const GridSpec& spec() const { return spec_; }
    std::size_t s_index(double s) const;
    std::size_t i_index(double i) const;

private:
    GridSpec spec_;
    std::vector<double> s_pts_;
    std::vector<double> i_pts_;
    std::size_t size_;
};

/// Exact reachable states from z0 under every action sequence (no quantization).
/// With peak_mode false, states differing only in m are merged.
class ReachableSet : public StateSpace {
public:
    ReachableSet(const ControlProblem& cp, const ControlState& z0, bool peak_mode);
    std::size_t layer_size(std::size_t t) const override { return layers_.at(t).size(); }
    ControlState state(std::size_t t, std::size_t k) const override { return layers_.at(t).at(k); }
    std::size_t locate(std::size_t t, const ControlState& z) const override;
    std::size_t successor(const ControlProblem& cp, std::size_t t, std::size_t k, std::size_t j,
                          std::size_t u) const override;
    std::size_t total_states() const;

private:
    using Key = std::tuple<double, double, double>;
    Key key(const ControlState& z) const;

    bool peak_mode_;
    std::size_t n_actions_;
    std::vector<std::vector<ControlState>> layers_;
    std::vector<std::map<Key, std::size_t>> index_;
    // succ_[t][k * n_actions + j * G + u]
    std::vector<std::vector<std::size_t>> succ_;
};

enum class Rollout { Grid, Exact };

struct DpOptions {
    /// Replaces h(z) at the final layer: value for (state, level).
    std::function<double(const ControlState&, std::size_t level)> terminal_override;
};

class DpResult {
public:
    DpResult(const ControlProblem& cp, std::shared_ptr<const StateSpace> space, DpOptions opts);

    /// V^level(z, t) at the grid point representing z.
    double value(std::size_t t, std::size_t level, const ControlState& z) const;
    double value_at(std::size_t t, std::size_t level, std::size_t k) const;
    /// Optimal (next level, gamma index) at (t, level, k).
    std::pair<std::size_t, std::size_t> action(std::size_t t, std::size_t level, std::size_t k) const;
    std::pair<std::size_t, std::size_t> action(std::size_t t, std::size_t level, const ControlState& z) const;

    /// Greedy rollout from z0. Grid: states follow the projected dynamics used by
    /// the recursion (costs add up to the table value). Exact: the true state is
    /// propagated and only the action lookup is projected.
    PolicyTrace rollout(const ControlState& z0, std::size_t level, Rollout mode = Rollout::Grid) const;

    std::size_t horizon() const { return horizon_; }
    const StateSpace& space() const { return *space_; }
    const ControlProblem& problem() const { return cp_; }
    const std::vector<std::vector<double>>& table() const { return value_; }

private:
    ControlProblem cp_;
    std::shared_ptr<const StateSpace> space_;
    DpOptions opts_;
    std::size_t horizon_;
    std::size_t n_levels_;
    std::vector<std::vector<double>> value_;           // [t][level * n + k]
    std::vector<std::vector<std::uint32_t>> choice_;   // [t][level * n + k] = j * G + u
};

/// Backward recursion V^i(z,t) = min_{j,u} c(i,j) + k^j(z,u,t) + V^j(F(z,l_j,u), t+1).
DpResult backward_dp(const ControlProblem& cp, std::shared_ptr<const StateSpace> space, DpOptions opts = {});

/// Solves on `spec` and on spec.refined() and throws GridTooCoarse when the
/// root values differ by more than `tolerance` (relative).
void check_grid_refinement(const ControlProblem& cp, const GridSpec& spec, const ControlState& z0,
                           std::size_t level, double tolerance = 0.05);

/// Peak-min problem: zero running cost, terminal cost m.
ControlProblem make_peak_problem(const ControlProblem& base);

}  // namespace sirnc::control

#endif  // SIRNC_CONTROL_HPP_
