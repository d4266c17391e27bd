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

#include "sirnc/core.hpp"

#include <algorithm>
#include <cmath>

namespace sirnc {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::NonPositiveRate: return "NonPositiveRate";
    case ErrorCode::NegativePopulation: return "NegativePopulation";
    case ErrorCode::ZeroInfected: return "ZeroInfected";
    case ErrorCode::BetaExceedsGamma: return "BetaExceedsGamma";
    case ErrorCode::NegativeTime: return "NegativeTime";
    case ErrorCode::DegenerateRates: return "DegenerateRates";
    case ErrorCode::QuadratureStepTooCoarse: return "QuadratureStepTooCoarse";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::NegativeStateBeyondTolerance: return "NegativeStateBeyondTolerance";
    case ErrorCode::ZeroPopulationDivisor: return "ZeroPopulationDivisor";
    case ErrorCode::ConditionDaggerViolated: return "ConditionDaggerViolated";
    case ErrorCode::HorizonTooLongForPerturbation: return "HorizonTooLongForPerturbation";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::TreeTooLarge: return "TreeTooLarge";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SpecError: return "SpecError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
{
}

std::vector<ErrorCode> validate_params(const ModelParams& p, const InitialState& s)
{
    std::vector<ErrorCode> issues;
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(p.lambda) || !positive(p.gamma) || !std::isfinite(p.beta) || p.beta < 0.0) {
        issues.push_back(ErrorCode::NonPositiveRate);
    }
    auto non_negative = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!non_negative(s.s0) || !non_negative(s.i0) || !non_negative(s.r0)) {
        issues.push_back(ErrorCode::NegativePopulation);
    }
    if (!(s.i0 > 0.0)) {
        issues.push_back(ErrorCode::ZeroInfected);
    }
    if (p.beta > p.gamma) {
        issues.push_back(ErrorCode::BetaExceedsGamma);
    }
    return issues;
}

void require_valid(const ModelParams& p, const InitialState& s)
{
    const auto issues = validate_params(p, s);
    if (!issues.empty()) {
        throw Error(issues.front(), "invalid model parameters or initial state");
    }
}

Schedule Schedule::constant(double value)
{
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw Error(ErrorCode::NonPositiveRate, "constant schedule value must be positive");
    }
    Schedule s;
    s.kind_ = Kind::Constant;
    s.base_ = value;
    return s;
}

Schedule Schedule::piecewise(std::vector<double> breakpoints, std::vector<double> values)
{
    if (values.size() != breakpoints.size() + 1) {
        throw Error(ErrorCode::InvalidArgument, "piecewise schedule needs one more value than breakpoints");
    }
    for (std::size_t k = 0; k < breakpoints.size(); ++k) {
        if (breakpoints[k] < 0.0 || (k > 0 && !(breakpoints[k] > breakpoints[k - 1]))) {
            throw Error(ErrorCode::InvalidArgument, "piecewise breakpoints must be strictly increasing and >= 0");
        }
    }
    for (double v : values) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw Error(ErrorCode::NonPositiveRate, "piecewise schedule values must be positive");
        }
    }
    Schedule s;
    s.kind_ = Kind::PiecewiseConstant;
    s.breaks_ = std::move(breakpoints);
    s.values_ = std::move(values);
    return s;
}

Schedule Schedule::lockdown_window(double base, double factor, double start, double duration)
{
    if (!(base > 0.0)) {
        throw Error(ErrorCode::NonPositiveRate, "lockdown base rate must be positive");
    }
    if (!(factor > 0.0 && factor <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "lockdown factor must lie in (0, 1]");
    }
    if (start < 0.0 || duration < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "lockdown window must start at t >= 0 with non-negative length");
    }
    Schedule s;
    s.kind_ = Kind::LockdownWindow;
    s.base_ = base;
    s.factor_ = factor;
    s.start_ = start;
    s.duration_ = duration;
    return s;
}

Schedule Schedule::linear_ramp(double base, double slope)
{
    if (!(base > 0.0) || slope < 0.0) {
        throw Error(ErrorCode::NonPositiveRate, "linear ramp needs base > 0 and slope >= 0");
    }
    Schedule s;
    s.kind_ = Kind::LinearRamp;
    s.base_ = base;
    s.slope_ = slope;
    return s;
}

double Schedule::operator()(double t) const
{
    if (t < 0.0) {
        throw Error(ErrorCode::NegativeTime, "schedule evaluated at negative time");
    }
    switch (kind_) {
    case Kind::Constant:
        return base_;
    case Kind::PiecewiseConstant: {
        auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
        return values_[static_cast<std::size_t>(it - breaks_.begin())];
    }
    case Kind::LockdownWindow:
        return (t >= start_ && t < start_ + duration_) ? factor_ * base_ : base_;
    case Kind::LinearRamp:
        return base_ * (1.0 + slope_ * t);
    }
    return base_;
}

std::vector<double> Schedule::breakpoints() const
{
    switch (kind_) {
    case Kind::PiecewiseConstant:
        return breaks_;
    case Kind::LockdownWindow:
        if (duration_ > 0.0 && factor_ != 1.0) {
            return {start_, start_ + duration_};
        }
        return {};
    default:
        return {};
    }
}

double eval_schedule(const Schedule& s, double t) { return s(t); }

void Trajectory::reserve(std::size_t n)
{
    times.reserve(n);
    s.reserve(n);
    i.reserve(n);
    r.reserve(n);
}

void Trajectory::push_back(double t, double s_value, double i_value, double r_value)
{
    times.push_back(t);
    s.push_back(s_value);
    i.push_back(i_value);
    r.push_back(r_value);
}

double Trajectory::x(std::size_t k) const
{
    const double total = n(k);
    return total > 0.0 ? s[k] / total : 0.0;
}

double Trajectory::y(std::size_t k) const
{
    const double total = n(k);
    return total > 0.0 ? i[k] / total : 0.0;
}

bool Trajectory::well_formed() const
{
    const std::size_t n_pts = times.size();
    if (s.size() != n_pts || i.size() != n_pts || r.size() != n_pts) {
        return false;
    }
    for (std::size_t k = 0; k < n_pts; ++k) {
        if (k > 0 && !(times[k] > times[k - 1])) {
            return false;
        }
        if (s[k] < 0.0 || i[k] < 0.0 || r[k] < 0.0) {
            return false;
        }
    }
    return true;
}

bool breakout_condition(const ModelParams& p, const InitialState& s)
{
    return p.lambda / p.gamma > 1.0 + s.i0 / s.s0;
}

bool breakout_condition_imported(const ModelParams& p, double nu, const InitialState& s)
{
    if (nu < 0.0) {
        throw Error(ErrorCode::NonPositiveRate, "imported infection rate must be >= 0");
    }
    return p.lambda * s.i0 / s.n0() + nu > p.gamma * s.i0 / s.s0;
}

std::vector<double> linspace(double start, double stop, std::size_t count)
{
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = start;
        return out;
    }
    for (std::size_t k = 0; k < count; ++k) {
        out[k] = start + (stop - start) * static_cast<double>(k) / static_cast<double>(count - 1);
    }
    return out;
}

std::vector<double> uniform_grid(double t_end, double step)
{
    if (!(step > 0.0) || t_end < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "grid needs step > 0 and t_end >= 0");
    }
    const auto n = static_cast<std::size_t>(std::ceil(t_end / step - 1e-9));
    std::vector<double> out;
    out.reserve(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        out.push_back(std::min(t_end, static_cast<double>(k) * step));
    }
    if (out.size() > 1 && out[out.size() - 1] <= out[out.size() - 2]) {
        out.pop_back();
        out.back() = t_end;
    }
    return out;
}

}  // namespace sirnc
