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

#ifndef SIRNC_CORE_HPP_
#define SIRNC_CORE_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sirnc {

enum class ErrorCode {
    NonPositiveRate,
    NegativePopulation,
    ZeroInfected,
    BetaExceedsGamma,
    NegativeTime,
    DegenerateRates,
    QuadratureStepTooCoarse,
    NonFiniteState,
    NegativeStateBeyondTolerance,
    ZeroPopulationDivisor,
    ConditionDaggerViolated,
    HorizonTooLongForPerturbation,
    StepTooLarge,
    TreeTooLarge,
    GridTooCoarse,
    NotConverged,
    InvalidArgument,
    IoError,
    SpecError,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable error code. All modules throw this.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what);
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Infection rate lambda, removal rate gamma and recovery rate beta.
/// gamma - beta is the rate of death / quarantine and must be non-negative.
struct ModelParams {
    double lambda = 0.25;
    double gamma = 1.0 / 15.0;
    double beta = 1.0 / 15.0;
};

/// Initial compartment sizes. Populations are real-valued (continuum model).
struct InitialState {
    double s0 = 9999.0;
    double i0 = 1.0;
    double r0 = 0.0;

    double n0() const { return s0 + i0; }
    /// C = S(0)/I(0).
    double ratio() const { return s0 / i0; }
};

/// Returns every invariant violated by (p, s); empty on success.
std::vector<ErrorCode> validate_params(const ModelParams& p, const InitialState& s);

/// Throws the first violation reported by validate_params.
void require_valid(const ModelParams& p, const InitialState& s);

/// Time-varying rate function. Right-continuous at every breakpoint.
class Schedule {
public:
    enum class Kind { Constant, PiecewiseConstant, LockdownWindow, LinearRamp };

    static Schedule constant(double value);
    /// values[0] on [0, breakpoints[0]), values[k] on [breakpoints[k-1], breakpoints[k]).
    static Schedule piecewise(std::vector<double> breakpoints, std::vector<double> values);
    /// factor * base on [start, start + duration), base elsewhere.
    static Schedule lockdown_window(double base, double factor, double start, double duration);
    /// base * (1 + slope * t).
    static Schedule linear_ramp(double base, double slope);

    double operator()(double t) const;

    Kind kind() const { return kind_; }
    bool is_piecewise_constant() const { return kind_ != Kind::LinearRamp; }
    /// Points where the schedule jumps, in increasing order.
    std::vector<double> breakpoints() const;

private:
    Schedule() = default;

    Kind kind_ = Kind::Constant;
    std::vector<double> breaks_;
    std::vector<double> values_;
    double base_ = 0.0;
    double factor_ = 1.0;
    double start_ = 0.0;
    double duration_ = 0.0;
    double slope_ = 0.0;
};

double eval_schedule(const Schedule& s, double t);

/// Time grid plus S, I, R series of equal length.
struct Trajectory {
    std::vector<double> times;
    std::vector<double> s;
    std::vector<double> i;
    std::vector<double> r;

    std::size_t size() const { return times.size(); }
    void reserve(std::size_t n);
    void push_back(double t, double s_value, double i_value, double r_value);

    double n(std::size_t k) const { return s[k] + i[k]; }
    double x(std::size_t k) const;
    double y(std::size_t k) const;

    /// Checks equal lengths, strictly increasing times and non-negative series.
    bool well_formed() const;
};

struct PeakReport {
    double t_max = 0.0;
    double i_max = 0.0;
};

/// lambda / gamma > 1 + I(0)/S(0).
bool breakout_condition(const ModelParams& p, const InitialState& s);

/// lambda I(0)/N(0) + nu > gamma I(0)/S(0).
bool breakout_condition_imported(const ModelParams& p, double nu, const InitialState& s);

/// Evenly spaced grid with `count` points on [start, stop].
std::vector<double> linspace(double start, double stop, std::size_t count);

/// Uniform grid 0, step, 2 step, ... up to and including t_end (last point snapped to t_end).
std::vector<double> uniform_grid(double t_end, double step);

}  // namespace sirnc

#endif  // SIRNC_CORE_HPP_
