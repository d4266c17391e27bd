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

#ifndef SIRNC_MULTIOBJ_HPP_
#define SIRNC_MULTIOBJ_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "sirnc/control.hpp"
#include "sirnc/core.hpp"

// Constrained multi-objective control by replicator weights over scalarized
// dynamic programs, and the fast/slow two-community control procedure.

namespace sirnc::multiobj {

using control::ControlProblem;
using control::ControlState;
using control::DpResult;
using control::StateSpace;

struct Objective {
    control::RunningCost running;
    std::vector<std::vector<double>> switch_cost;
    control::TerminalCost terminal;
    double threshold = 0.0;
};

/// Objectives share the dynamics, levels and removal-rate grid of a base problem.
struct ObjectiveSet {
    std::vector<Objective> objectives;

    std::size_t size() const { return objectives.size(); }
    std::vector<double> thresholds() const;
};

/// Base problem with the costs of objective m.
ControlProblem problem_for(const ControlProblem& base, const Objective& obj);

/// Base problem with running, switching and terminal costs weighted by w.
ControlProblem scalarize(const ControlProblem& base, const ObjectiveSet& obj, const std::vector<double>& w);

/// One backward recursion per objective.
std::vector<DpResult> solve_k_objectives(const ObjectiveSet& obj, const ControlProblem& base,
                                         std::shared_ptr<const StateSpace> space);

DpResult solve_scalarized(const ObjectiveSet& obj, const std::vector<double>& w, const ControlProblem& base,
                          std::shared_ptr<const StateSpace> space);

/// Lower clip for weights.
inline constexpr double kWeightFloor = 1e-8;

struct StepSizeRule {
    enum class Kind { Constant, Harmonic };
    Kind kind = Kind::Harmonic;
    double a0 = 0.5;

    double at(std::size_t n) const;
};

struct ReplicatorStep {
    std::vector<double> w;
    /// Sum of the weights after the raw update, before clipping.
    double raw_sum = 1.0;
    /// Number of times the step was halved to keep every entry above -w/2.
    int halvings = 0;
};

/// w+(m) = w(m) + a w(m) ((V_m - C_m) - (Vbar - sum_k w(k) C_k)), then clip to
/// [kWeightFloor, 1] and renormalise. Throws StepTooLarge if halving the step
/// 60 times still leaves an entry at or below -w(m)/2.
ReplicatorStep replicator_update(const std::vector<double>& w, const std::vector<double>& v_m, double v_bar,
                                 const std::vector<double>& thresholds, double a_n);

/// Rolls the policy forward on the grid from z0 and returns each objective's
/// accumulated running + switching + terminal cost along the same path.
std::vector<double> evaluate_policy_per_objective(const DpResult& policy, const ObjectiveSet& obj,
                                                  const ControlState& z0, std::size_t level);

/// Order-dependent hash of a value table, used to check it is not recomputed.
std::uint64_t table_hash(const DpResult& dp);

struct IterationRecord {
    std::size_t n = 0;
    std::vector<double> w;
    std::vector<double> v_m;
    double v_bar = 0.0;
    /// C_m minus the cost of objective m under the current scalarized policy.
    std::vector<double> slack;
};

struct MultiObjResult {
    std::vector<double> weights;
    std::vector<IterationRecord> log;
    /// Per-objective cost of the final scalarized policy, and the thresholds.
    std::vector<double> costs;
    std::vector<double> thresholds;
    std::vector<bool> satisfied;
    bool converged = false;
    bool feasible = false;
    /// NotConverged when the weights did not settle or a threshold is violated.
    std::optional<ErrorCode> error;
    std::string report;
    std::uint64_t objective_table_hash = 0;
    std::shared_ptr<DpResult> policy;
};

/// Replicator iteration: objective tables are solved once, then each step
/// solves the scalarized recursion and updates w. Stops after `iters` steps or
/// when the weights move less than `tolerance` in the sup norm.
MultiObjResult run_multiobjective(const ObjectiveSet& obj, const ControlProblem& base,
                                  std::shared_ptr<const StateSpace> space, const StepSizeRule& rule,
                                  const ControlState& z0, std::size_t level, std::size_t iters,
                                  double tolerance = 1e-6);

/// Two-objective test instance on the worked-example levels: objective 0 is the
/// peak of I (running max state), objective 1 is lockdown plus testing cost.
struct ToyInstance {
    ControlProblem base;
    ObjectiveSet objectives;
    control::GridSpec grid;
    ControlState z0;
    std::size_t level = 0;
};

ToyInstance make_toy_instance(std::size_t horizon = 20);

/// Sets C_m = factor times the cost of objective m under the policy that is
/// optimal for the other objective (two objectives only).
void construct_feasible_thresholds(ObjectiveSet& obj, const ControlProblem& base,
                                   std::shared_ptr<const StateSpace> space, const ControlState& z0,
                                   std::size_t level, double factor = 1.5);

// ---------------------------------------------------------------------------
// Two-timescale control

/// Community a is fast, community b evolves at rate eps on the same clock.
/// The clock is cut into slow intervals of J = ceil(1/eps) fast steps of
/// length a; there are N_T = ceil(horizon / (J a)) intervals and the slow
/// community takes one Euler step of length eps J a per interval.
struct TwoTimescaleSpec {
    double eps = 0.1;
    double a = 1.0;
    double horizon = 40.0;
    /// Infection of a by b's fraction, and of b by a's fraction.
    double lambda_ab = 0.0;
    double lambda_ba = 0.0;
    ControlState init_a{9999.0, 1.0, 1.0};
    ControlState init_b{9999.0, 1.0, 1.0};
    std::size_t level_a = 0;
    std::size_t level_b = 0;
    control::GridSpec fast_grid;
    control::GridSpec slow_grid;
    /// Z grid: z_points values on [0, z_range_factor * I_b(0)/N_b(0)].
    std::size_t z_points = 16;
    double z_range_factor = 1.5;
    /// Forward passes of (fast rollout, slow recursion).
    std::size_t outer_iterations = 1;
    /// Repeat the fast recursion on a refined Z grid and throw GridTooCoarse
    /// when the root value moves by more than 5%.
    bool z_refinement_check = false;

    std::size_t steps_per_interval() const;
    std::size_t n_intervals() const;
    double slow_step() const;
};

struct TwoTimescaleResult {
    control::PolicyTrace fast;
    control::PolicyTrace slow;
    std::vector<double> z_grid;
    /// Z used on each interval (I_b / N_b at the interval end, from the slow path).
    std::vector<double> z_used;
    /// I_a / N_a at every interval boundary.
    std::vector<double> fast_fraction;
    std::size_t steps_per_interval = 0;
    std::size_t n_intervals = 0;
    double slow_step = 0.0;
    /// Fast value at the root, interpolated in Z at the first interval's Z.
    double fast_value = 0.0;
    double slow_value = 0.0;
    /// Sup over interval boundaries of max(|dS_b|, |dI_b|) between the slow
    /// trace and the fully coupled fast-step simulation under the same controls.
    double coupled_deviation = 0.0;
};

/// fast_cp / slow_cp supply levels, removal rates, switching and cost
/// functions; their step, horizon and import_rate are set here. Running costs
/// receive the global epoch (fast steps for a, intervals for b). Terminal cost
/// h of fast_cp is applied at epoch N_T J.
TwoTimescaleResult two_timescale_control(const TwoTimescaleSpec& spec, const ControlProblem& fast_cp,
                                         const ControlProblem& slow_cp);

}  // namespace sirnc::multiobj

#endif  // SIRNC_MULTIOBJ_HPP_
