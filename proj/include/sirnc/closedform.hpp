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

#ifndef SIRNC_CLOSEDFORM_HPP_
#define SIRNC_CLOSEDFORM_HPP_

#include <functional>
#include <utility>
#include <vector>

#include "sirnc/core.hpp"

/**
 * @file
 * @brief Exact solutions of the non-conserving SIR system and its variants.
 *
 * With N(t) = S(t) + I(t) as the mixing normalizer, the susceptible fraction
 * x(t) = S/N obeys a logistic equation, which makes S and I explicit:
 *
 *   S(t) = S0 ((e^{(l-g)t} + C) / (1 + C))^{-l/(l-g)}
 *   I(t) = I0 ((1 + C e^{-(l-g)t}) / (1 + C))^{-l/(l-g)} e^{-g t}
 *
 * with C = S0 / I0. All evaluations are carried out in log space so that long
 * horizons do not overflow.
 */

namespace sirnc::closedform {

/// Composite quadrature rule. `step` is the maximum panel width.
struct QuadratureSpec {
    enum class Rule { Trapezoid, Simpson };
    Rule rule = Rule::Simpson;
    double step = 0.01;
};

/// Integral of f over [a, b] with the given rule.
double integrate(const std::function<double(double)>& f, double a, double b, const QuadratureSpec& q);

/// Relative tolerance on |lambda - gamma| below which the lambda = gamma limit is used.
inline constexpr double kDegenerateTolerance = 1e-9;

bool is_degenerate(const ModelParams& p);

/// Solution of the constant-rate system for a fixed initial state.
class ClosedFormSolution {
public:
    ClosedFormSolution(ModelParams params, InitialState init);

    const ModelParams& params() const { return params_; }
    const InitialState& init() const { return init_; }
    /// C = S(0) / I(0).
    double c() const { return c_; }

    /// Throws DegenerateRates when lambda ~ gamma; use limit_eval there.
    double susceptible(double t) const;
    double infected(double t) const;
    /// R(0) + beta * integral of I over [0, t].
    double recovered(double t, const QuadratureSpec& q = {}) const;

    /// x(t) = S/N and y(t) = I/N from the logistic solution.
    double x(double t) const;
    double y(double t) const;

    /// Integral form of I(t): I0 exp(int_0^t (lambda x(s) - gamma) ds).
    double infected_integral_form(double t, const QuadratureSpec& q) const;

    PeakReport peak() const;

    /// (S, I) at time t, switching to the limit formulas when degenerate.
    std::pair<double, double> state(double t) const;

    Trajectory sample(const std::vector<double>& grid, const QuadratureSpec& q = {}) const;

private:
    ModelParams params_;
    InitialState init_;
    double c_;
};

/// lambda = gamma limit: x(t) stays at x(0), so I and S are pure exponentials.
std::pair<double, double> limit_eval(const ModelParams& p, const InitialState& s, double t);

/// Approximate normalised peak (1 - rho) rho^{rho / (1 - rho)}, rho = gamma / lambda.
double sirnc_imax_over_n_approx(double rho);

/// Solution under time-varying lambda(t), gamma(t).
///
/// Piecewise-constant schedules are solved exactly by chaining the constant-rate
/// solution across breakpoints. Other schedules evaluate the nested integrals of
/// the logistic representation by composite Simpson on a fine grid; the result is
/// checked against a half-step run and QuadratureStepTooCoarse is thrown when the
/// two disagree by more than 1e-6 (relative).
class TimeVaryingSolution {
public:
    TimeVaryingSolution(Schedule lambda, Schedule gamma, InitialState init, double beta, double horizon,
                        QuadratureSpec q = {});

    /// (S, I) at arbitrary t in [0, horizon].
    std::pair<double, double> state(double t) const;
    /// dI/dt sign function: lambda(t) x(t) - gamma(t).
    double growth_rate(double t) const;

    Trajectory sample(const std::vector<double>& grid) const;

    /// All local maxima of I on [0, horizon]; sign changes of dI/dt refined by bisection.
    std::vector<PeakReport> peaks(double scan_step = 0.01) const;

    double horizon() const { return horizon_; }

private:
    struct Node {
        double t;
        double log_s;
        double log_i;
        double lambda_gap;  // int_0^t (lambda - gamma)
    };

    void build_chained();
    void build_quadrature(double step, std::vector<Node>& out) const;
    std::size_t node_before(double t) const;
    /// beta times the integral of I over [a, b], split at node times.
    double removed_between(double a, double b) const;

    Schedule lambda_;
    Schedule gamma_;
    InitialState init_;
    double beta_;
    double horizon_;
    QuadratureSpec q_;
    bool chained_;
    std::vector<Node> nodes_;
};

Trajectory sirnc_timevarying(const Schedule& lambda, const Schedule& gamma, const InitialState& init,
                             const std::vector<double>& grid, double beta = 0.0, const QuadratureSpec& q = {});

std::vector<PeakReport> sirnc_timevarying_peak(const Schedule& lambda, const Schedule& gamma,
                                               const InitialState& init, double horizon = 400.0);

/// Closed form with an external infection inflow nu * S(t).
class ImportedSolution {
public:
    ImportedSolution(ModelParams params, double nu, InitialState init);

    double nu() const { return nu_; }
    /// C1 = S0 (l - g) / (I0 (l - g + nu) + S0 nu).
    double c1() const { return c1_; }

    double susceptible(double t) const;
    /// Homogeneous term plus nu-weighted quadrature of the kernel against S.
    /// Default rule: Simpson with step min(0.01, t/1000), checked against half step.
    double infected(double t) const;
    double infected(double t, const QuadratureSpec& q) const;

    /// I on a grid by cumulative quadrature of the factorised kernel.
    std::vector<double> infected_on_grid(const std::vector<double>& grid) const;

    /// Peak located by grid scan with the given step, refined by parabolic interpolation.
    PeakReport peak(double horizon = 400.0, double step = 0.01) const;

private:
    double log_h(double t) const;

    ModelParams params_;
    double nu_;
    InitialState init_;
    double c1_;
};

/// Exact classic-SIR peak and its N (1 - rho + rho log rho) approximation.
struct ClassicImax {
    double exact = 0.0;
    double approx = 0.0;
};

ClassicImax sir_classic_imax(const ModelParams& p, const InitialState& s);

/// in its usual published form, with rho = lambda / gamma.
/// as printed, with rho = lambda / gamma.
struct DaleyApproximation {
    double alpha = 0.0;
    double phi = 0.0;
    double r = 0.0;
};

DaleyApproximation sir_daley_R(const ModelParams& p, const InitialState& s, double t);

}  // namespace sirnc::closedform

#endif  // SIRNC_CLOSEDFORM_HPP_
