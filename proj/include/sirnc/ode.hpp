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

#ifndef SIRNC_ODE_HPP_
#define SIRNC_ODE_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sirnc/core.hpp"

namespace sirnc::ode {

using State = std::vector<double>;

/// Right-hand side f(t, x) of an autonomous or time-dependent ODE.
struct OdeSystem {
    std::size_t dim = 0;
    std::function<State(double, const State&)> rhs;
    std::vector<std::string> labels;
};

/// Dense output of an integration: one row per step, including t = 0.
struct Solution {
    std::vector<double> times;
    std::vector<State> states;
    std::vector<std::string> labels;

    std::size_t size() const { return times.size(); }
    /// Column k as a series.
    std::vector<double> column(std::size_t k) const;
};

/// Tolerance below which slightly negative components are clamped to zero.
inline constexpr double kNegativeClamp = 1e-12;

/// One classical RK4 step (no clamping).
State rk4_step(const OdeSystem& sys, double t, const State& x, double h);

/// Fixed-step RK4 from t = 0 to t_end. The last step is shortened to land on t_end.
/// Throws NonFiniteState or NegativeStateBeyondTolerance.
Solution integrate(const OdeSystem& sys, const State& init, double t_end, double step);

/// S I / (S + I) with the flow defined as 0 when the population vanishes.
double mixing(double s, double i, double n);

// Right-hand sides. States are (S, I, R) unless stated otherwise.
State rhs_classic_sir(const ModelParams& p, const State& x);
State rhs_sirnc(const ModelParams& p, const State& x);
State rhs_imported(const ModelParams& p, double nu, const State& x);

OdeSystem classic_sir_system(const ModelParams& p);
OdeSystem sirnc_system(const ModelParams& p);
OdeSystem imported_system(const ModelParams& p, double nu);
/// SIR-NC with time-varying infection and removal rates.
OdeSystem sirnc_schedule_system(const Schedule& lambda, const Schedule& gamma, double beta);

/// Two communities a and b. lambda_ab is the rate at which susceptibles of a are
/// infected by infectives of b; lambda_ba the reverse.
struct CommunityParams {
    ModelParams a;
    ModelParams b;
    double lambda_ab = 0.0;
    double lambda_ba = 0.0;
    InitialState init_a;
    InitialState init_b;
};

/// State order (S_a, I_a, R_a, S_b, I_b, R_b).
State rhs_communities(const CommunityParams& cp, const State& x);
OdeSystem communities_system(const CommunityParams& cp);

struct CommunityRun {
    Trajectory a;
    Trajectory b;
    std::vector<double> total_i;
};

CommunityRun run_communities(const CommunityParams& cp, double t_end, double step);

/// Birth and death rates for the vital-dynamics variant.
struct VitalParams {
    double kappa = 0.0;
    double upsilon1 = 0.0;
    double upsilon2 = 0.0;
    double nu1 = 0.0;
    double nu2 = 0.0;
};

/// Normalizer N = S + I + R (recovered take part in mixing here).
State rhs_vital(const ModelParams& p, const VitalParams& vp, const State& x);
OdeSystem vital_system(const ModelParams& p, const VitalParams& vp);
Trajectory run_vital(const ModelParams& p, const VitalParams& vp, const InitialState& init, double t_end,
                     double step);

/// kappa <= 0, upsilon1 - nu1 < gamma, upsilon2 <= nu2.
bool condition_dagger(const ModelParams& p, const VitalParams& vp);

struct ExtinctionReport {
    bool n_non_increasing = true;
    /// Largest positive increment of N between consecutive steps.
    double worst_increase = 0.0;
    /// True when N' <= -(gamma - beta) I holds at every step (up to rounding).
    bool bound_holds = true;
    double terminal_n = 0.0;
    double initial_n = 0.0;
    Trajectory trajectory;
};

/// Throws ConditionDaggerViolated when the extinction condition fails.
ExtinctionReport check_extinction(const ModelParams& p, const VitalParams& vp, const InitialState& init,
                                  double horizon, double step = 0.01);

struct EquilibriumReport {
    double zeta = 0.0;
    /// Lambda admitting a non-zero equilibrium (NaN when none).
    double critical_lambda = 0.0;
    bool lambda_matches = false;
    /// True when s = zeta i / kappa can be positive (kappa != 0 and zeta/kappa > 0).
    bool positive_equilibrium_possible = false;
};

EquilibriumReport check_equilibrium_nongeneric(const ModelParams& p, const VitalParams& vp);

/// Discrete scheme with Bernoulli meetings and step eps.
struct StochasticSchemeParams {
    double eps = 0.01;
    double horizon = 10.0;
    double lambda = 0.25;
    double gamma = 1.0 / 15.0;
};

struct AveragingStats {
    double eps = 0.0;
    double mse = 0.0;
    double mean_sup = 0.0;
    std::size_t trials = 0;
};

/// One path of the scheme; returns S_n, I_n for n = 0..floor(T/eps).
std::pair<std::vector<double>, std::vector<double>> simulate_scheme(const StochasticSchemeParams& sp,
                                                                    const InitialState& init, std::uint64_t seed);

/// Mean over trials of sup_t |S^eps(t) - S(t)|^2 against the exact ODE solution.
AveragingStats stochastic_averaging_check(const StochasticSchemeParams& sp, const InitialState& init,
                                          std::size_t trials, std::uint64_t seed);

/// Local maxima of a series after a centred 5-point moving average: points
/// strictly greater than both neighbours.
std::vector<std::size_t> local_maxima_smoothed(const std::vector<double>& series);

/// Index and value of the maximum of a series, refined by a parabola through
/// the neighbouring samples.
PeakReport series_peak(const std::vector<double>& times, const std::vector<double>& series);

Trajectory to_trajectory(const Solution& sol);

}  // namespace sirnc::ode

#endif  // SIRNC_ODE_HPP_
