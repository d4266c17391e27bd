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

#include "sirnc/closedform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sirnc::closedform {

namespace {

// log(e^a + e^b) without overflow.
double log_add_exp(double a, double b)
{
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    if (hi == -std::numeric_limits<double>::infinity()) {
        return hi;
    }
    return hi + std::log1p(std::exp(lo - hi));
}

double sigmoid(double z)
{
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void check_time(double t)
{
    if (t < 0.0) {
        throw Error(ErrorCode::NegativeTime, "evaluation at negative time");
    }
}

double rel_diff(double a, double b)
{
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, const QuadratureSpec& q)
{
    if (!(q.step > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "quadrature step must be positive");
    }
    if (b <= a) {
        return 0.0;
    }
    auto panels = static_cast<std::size_t>(std::ceil((b - a) / q.step - 1e-9));
    panels = std::max<std::size_t>(panels, 1);
    if (q.rule == QuadratureSpec::Rule::Trapezoid) {
        const double h = (b - a) / static_cast<double>(panels);
        double sum = 0.5 * (f(a) + f(b));
        for (std::size_t k = 1; k < panels; ++k) {
            sum += f(a + h * static_cast<double>(k));
        }
        return sum * h;
    }
    if (panels % 2 != 0) {
        ++panels;
    }
    const double h = (b - a) / static_cast<double>(panels);
    double sum = f(a) + f(b);
    for (std::size_t k = 1; k < panels; ++k) {
        sum += (k % 2 == 1 ? 4.0 : 2.0) * f(a + h * static_cast<double>(k));
    }
    return sum * h / 3.0;
}

bool is_degenerate(const ModelParams& p)
{
    return std::abs(p.lambda - p.gamma) <= kDegenerateTolerance * std::max(p.lambda, p.gamma);
}

std::pair<double, double> limit_eval(const ModelParams& p, const InitialState& s, double t)
{
    check_time(t);
    const double x0 = s.s0 / s.n0();
    const double i = s.i0 * std::exp((p.lambda * x0 - p.gamma) * t);
    const double sv = s.s0 * std::exp(-p.lambda * (1.0 - x0) * t);
    return {sv, i};
}

double sirnc_imax_over_n_approx(double rho)
{
    if (rho <= 0.0 || rho >= 1.0) {
        return rho >= 1.0 ? 0.0 : 1.0;
    }
    return (1.0 - rho) * std::pow(rho, rho / (1.0 - rho));
}

ClosedFormSolution::ClosedFormSolution(ModelParams params, InitialState init)
    : params_(params), init_(init), c_(0.0)
{
    require_valid(params_, init_);
    c_ = init_.s0 / init_.i0;
}

double ClosedFormSolution::susceptible(double t) const
{
    check_time(t);
    if (is_degenerate(params_)) {
        throw Error(ErrorCode::DegenerateRates, "lambda ~ gamma, use limit_eval");
    }
    if (init_.s0 == 0.0) {
        return 0.0;
    }
    const double k = params_.lambda - params_.gamma;
    const double log_c = std::log(c_);
    const double num = log_add_exp(k * t, log_c);
    const double den = std::log1p(c_);
    return init_.s0 * std::exp(-(params_.lambda / k) * (num - den));
}

double ClosedFormSolution::infected(double t) const
{
    check_time(t);
    if (is_degenerate(params_)) {
        throw Error(ErrorCode::DegenerateRates, "lambda ~ gamma, use limit_eval");
    }
    if (init_.s0 == 0.0) {
        return init_.i0 * std::exp(-params_.gamma * t);
    }
    const double k = params_.lambda - params_.gamma;
    const double num = log_add_exp(0.0, std::log(c_) - k * t);
    const double den = std::log1p(c_);
    return init_.i0 * std::exp(-(params_.lambda / k) * (num - den) - params_.gamma * t);
}

std::pair<double, double> ClosedFormSolution::state(double t) const
{
    if (is_degenerate(params_)) {
        return limit_eval(params_, init_, t);
    }
    return {susceptible(t), infected(t)};
}

double ClosedFormSolution::recovered(double t, const QuadratureSpec& q) const
{
    check_time(t);
    if (params_.beta == 0.0 || t == 0.0) {
        return init_.r0;
    }
    const auto f = [this](double s) { return state(s).second; };
    return init_.r0 + params_.beta * integrate(f, 0.0, t, q);
}

double ClosedFormSolution::x(double t) const
{
    check_time(t);
    if (init_.s0 == 0.0) {
        return 0.0;
    }
    const double k = params_.lambda - params_.gamma;
    return sigmoid(std::log(c_) - k * t);
}

double ClosedFormSolution::y(double t) const
{
    check_time(t);
    if (init_.s0 == 0.0) {
        return 1.0;
    }
    const double k = params_.lambda - params_.gamma;
    return sigmoid(k * t - std::log(c_));
}

double ClosedFormSolution::infected_integral_form(double t, const QuadratureSpec& q) const
{
    check_time(t);
    const auto f = [this](double s) { return params_.lambda * x(s) - params_.gamma; };
    return init_.i0 * std::exp(integrate(f, 0.0, t, q));
}

PeakReport ClosedFormSolution::peak() const
{
    if (is_degenerate(params_)) {
        throw Error(ErrorCode::DegenerateRates, "peak formula undefined for lambda ~ gamma");
    }
    const double lam = params_.lambda;
    const double gam = params_.gamma;
    const double k = lam - gam;
    const double arg = c_ * k / gam;
    if (!(arg > 1.0)) {
        return {0.0, init_.i0};
    }
    PeakReport out;
    out.t_max = std::log(arg) / k;
    const double log_i = std::log(init_.i0) - (lam / k) * (std::log(lam) - std::log1p(c_) - std::log(k)) -
                         (gam / k) * std::log(arg);
    out.i_max = std::exp(log_i);
    return out;
}

Trajectory ClosedFormSolution::sample(const std::vector<double>& grid, const QuadratureSpec& q) const
{
    Trajectory tr;
    tr.reserve(grid.size());
    double r = init_.r0;
    double prev_t = 0.0;
    for (double t : grid) {
        check_time(t);
        if (params_.beta > 0.0 && t > prev_t) {
            const auto f = [this](double s) { return state(s).second; };
            r += params_.beta * integrate(f, prev_t, t, q);
        }
        prev_t = std::max(prev_t, t);
        const auto [s, i] = state(t);
        tr.push_back(t, s, i, r);
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Time-varying rates

TimeVaryingSolution::TimeVaryingSolution(Schedule lambda, Schedule gamma, InitialState init, double beta,
                                         double horizon, QuadratureSpec q)
    : lambda_(std::move(lambda)),
      gamma_(std::move(gamma)),
      init_(init),
      beta_(beta),
      horizon_(horizon),
      q_(q),
      chained_(lambda_.is_piecewise_constant() && gamma_.is_piecewise_constant())
{
    if (!(init_.i0 > 0.0)) {
        throw Error(ErrorCode::ZeroInfected, "I(0) must be positive");
    }
    if (init_.s0 < 0.0 || init_.r0 < 0.0) {
        throw Error(ErrorCode::NegativePopulation, "negative initial population");
    }
    if (horizon_ < 0.0) {
        throw Error(ErrorCode::NegativeTime, "negative horizon");
    }
    if (beta_ < 0.0) {
        throw Error(ErrorCode::NonPositiveRate, "beta must be >= 0");
    }
    if (chained_) {
        build_chained();
        return;
    }
    build_quadrature(q_.step, nodes_);
    std::vector<Node> fine;
    build_quadrature(q_.step / 2.0, fine);
    // Nodes of the coarse build are a subset of the fine build.
    std::size_t j = 0;
    for (const Node& nd : nodes_) {
        while (j < fine.size() && fine[j].t < nd.t - 1e-12) {
            ++j;
        }
        if (j < fine.size() && std::abs(fine[j].t - nd.t) <= 1e-12) {
            const double di = std::abs(std::expm1(nd.log_i - fine[j].log_i));
            const double ds = init_.s0 > 0.0 ? std::abs(std::expm1(nd.log_s - fine[j].log_s)) : 0.0;
            if (di > 1e-6 || ds > 1e-6) {
                throw Error(ErrorCode::QuadratureStepTooCoarse,
                            "half-step check failed at t=" + std::to_string(nd.t));
            }
        }
    }
}

void TimeVaryingSolution::build_chained()
{
    std::vector<double> cuts;
    for (double b : lambda_.breakpoints()) {
        cuts.push_back(b);
    }
    for (double b : gamma_.breakpoints()) {
        cuts.push_back(b);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const double log_s0 = init_.s0 > 0.0 ? std::log(init_.s0) : -std::numeric_limits<double>::infinity();
    nodes_.push_back({0.0, log_s0, std::log(init_.i0), 0.0});
    for (double c : cuts) {
        if (c <= 0.0 || c >= horizon_) {
            continue;
        }
        const Node& prev = nodes_.back();
        const double lam = lambda_(prev.t);
        const double gam = gamma_(prev.t);
        InitialState seg{std::exp(prev.log_s), std::exp(prev.log_i), 0.0};
        ModelParams p{lam, gam, 0.0};
        const double dt = c - prev.t;
        std::pair<double, double> si;
        if (is_degenerate(p)) {
            si = limit_eval(p, seg, dt);
        } else {
            si = ClosedFormSolution(p, seg).state(dt);
        }
        const double gap = prev.lambda_gap + (lam - gam) * dt;
        const double ls = si.first > 0.0 ? std::log(si.first) : -std::numeric_limits<double>::infinity();
        nodes_.push_back({c, ls, std::log(si.second), gap});
    }
}

void TimeVaryingSolution::build_quadrature(double step, std::vector<Node>& out) const
{
    // Node times: uniform grid merged with any schedule discontinuities.
    std::vector<double> times = uniform_grid(horizon_, step);
    for (double b : lambda_.breakpoints()) {
        if (b > 0.0 && b < horizon_) {
            times.push_back(b);
        }
    }
    for (double b : gamma_.breakpoints()) {
        if (b > 0.0 && b < horizon_) {
            times.push_back(b);
        }
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());

    const double log_c = init_.s0 > 0.0 ? std::log(init_.s0 / init_.i0) : -std::numeric_limits<double>::infinity();
    const auto g = [this](double s) { return lambda_(s) - gamma_(s); };
    const auto x_of = [&](double gap) { return init_.s0 > 0.0 ? sigmoid(log_c - gap) : 0.0; };
    const auto f_i = [&](double s, double gap) { return lambda_(s) * x_of(gap) - gamma_(s); };
    const auto f_s = [&](double s, double gap) { return -lambda_(s) * (1.0 - x_of(gap)); };

    out.clear();
    out.reserve(times.size());
    const double log_s0 = init_.s0 > 0.0 ? std::log(init_.s0) : -std::numeric_limits<double>::infinity();
    out.push_back({0.0, log_s0, std::log(init_.i0), 0.0});
    for (std::size_t j = 1; j < times.size(); ++j) {
        const Node& a = out.back();
        const double t0 = a.t;
        const double dt = times[j] - t0;
        // Right-continuous schedules: sample the panel's left end just inside.
        const double t0p = t0;
        const double tm = t0 + 0.5 * dt;
        const double te = times[j];
        const double te_in = std::nextafter(te, t0);
        const double gap_m = a.lambda_gap + dt / 12.0 * (g(t0p) + 4.0 * g(t0 + 0.25 * dt) + g(tm));
        const double gap_e = gap_m + dt / 12.0 * (g(tm) + 4.0 * g(t0 + 0.75 * dt) + g(te_in));

        const double fi0 = f_i(t0p, a.lambda_gap);
        const double fim = f_i(tm, gap_m);
        const double fie = f_i(te_in, gap_e);
        const double log_i = a.log_i + dt / 6.0 * (fi0 + 4.0 * fim + fie);
        const double log_s = a.log_s + dt / 6.0 * (f_s(t0p, a.lambda_gap) + 4.0 * f_s(tm, gap_m) + f_s(te_in, gap_e));

        out.push_back({te, log_s, log_i, gap_e});
    }
}

std::size_t TimeVaryingSolution::node_before(double t) const
{
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t, [](double v, const Node& n) { return v < n.t; });
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - nodes_.begin()) - 1));
}

std::pair<double, double> TimeVaryingSolution::state(double t) const
{
    check_time(t);
    const Node& nd = nodes_[node_before(t)];
    const double dt = t - nd.t;
    if (dt == 0.0) {
        return {std::exp(nd.log_s), std::exp(nd.log_i)};
    }
    if (chained_) {
        ModelParams p{lambda_(nd.t), gamma_(nd.t), 0.0};
        InitialState seg{std::exp(nd.log_s), std::exp(nd.log_i), 0.0};
        if (is_degenerate(p)) {
            return limit_eval(p, seg, dt);
        }
        return ClosedFormSolution(p, seg).state(dt);
    }
    // One Simpson panel from the preceding node.
    const double log_c = init_.s0 > 0.0 ? std::log(init_.s0 / init_.i0) : -std::numeric_limits<double>::infinity();
    const auto g = [this](double s) { return lambda_(s) - gamma_(s); };
    const auto x_of = [&](double gap) { return init_.s0 > 0.0 ? sigmoid(log_c - gap) : 0.0; };
    const double tm = nd.t + 0.5 * dt;
    const double gap_m = nd.lambda_gap + dt / 12.0 * (g(nd.t) + 4.0 * g(nd.t + 0.25 * dt) + g(tm));
    const double gap_e = gap_m + dt / 12.0 * (g(tm) + 4.0 * g(nd.t + 0.75 * dt) + g(t));
    const double fi = lambda_(nd.t) * x_of(nd.lambda_gap) - gamma_(nd.t);
    const double fim = lambda_(tm) * x_of(gap_m) - gamma_(tm);
    const double fie = lambda_(t) * x_of(gap_e) - gamma_(t);
    const double fs = -lambda_(nd.t) * (1.0 - x_of(nd.lambda_gap));
    const double fsm = -lambda_(tm) * (1.0 - x_of(gap_m));
    const double fse = -lambda_(t) * (1.0 - x_of(gap_e));
    return {std::exp(nd.log_s + dt / 6.0 * (fs + 4.0 * fsm + fse)),
            std::exp(nd.log_i + dt / 6.0 * (fi + 4.0 * fim + fie))};
}

double TimeVaryingSolution::growth_rate(double t) const
{
    const auto [s, i] = state(t);
    const double n = s + i;
    const double x = n > 0.0 ? s / n : 0.0;
    return lambda_(t) * x - gamma_(t);
}

double TimeVaryingSolution::removed_between(double a, double b) const
{
    if (beta_ == 0.0 || b <= a) {
        return 0.0;
    }
    const auto f = [this](double u) { return state(u).second; };
    double acc = 0.0;
    double lo = a;
    std::size_t j = node_before(a) + 1;
    while (lo < b) {
        const double hi = j < nodes_.size() ? std::min(b, nodes_[j].t) : b;
        if (hi > lo) {
            acc += integrate(f, lo, hi, {QuadratureSpec::Rule::Simpson, std::min(q_.step, 0.5 * (hi - lo))});
        }
        lo = hi;
        ++j;
    }
    return beta_ * acc;
}

Trajectory TimeVaryingSolution::sample(const std::vector<double>& grid) const
{
    Trajectory tr;
    tr.reserve(grid.size());
    double prev_t = 0.0;
    double r = init_.r0;
    for (double t : grid) {
        if (t > horizon_ * (1.0 + 1e-12)) {
            throw Error(ErrorCode::InvalidArgument, "grid extends beyond the solution horizon");
        }
        if (t < prev_t) {
            throw Error(ErrorCode::InvalidArgument, "grid must be non-decreasing");
        }
        r += removed_between(prev_t, t);
        prev_t = t;
        const auto [s, i] = state(t);
        tr.push_back(t, s, i, r);
    }
    return tr;
}

std::vector<PeakReport> TimeVaryingSolution::peaks(double scan_step) const
{
    std::vector<PeakReport> out;
    const std::vector<double> grid = uniform_grid(horizon_, scan_step);
    double prev_t = grid.front();
    double prev_g = growth_rate(prev_t);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double t = grid[k];
        const double gv = growth_rate(t);
        if (prev_g > 0.0 && gv <= 0.0) {
            double lo = prev_t;
            double hi = t;
            for (int it = 0; it < 80 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
                const double mid = 0.5 * (lo + hi);
                if (growth_rate(mid) > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            // I is continuous, so the larger of the bracket ends is the local max.
            const double i_lo = state(lo).second;
            const double i_hi = state(hi).second;
            out.push_back(i_lo >= i_hi ? PeakReport{lo, i_lo} : PeakReport{hi, i_hi});
        }
        prev_t = t;
        prev_g = gv;
    }
    return out;
}

Trajectory sirnc_timevarying(const Schedule& lambda, const Schedule& gamma, const InitialState& init,
                             const std::vector<double>& grid, double beta, const QuadratureSpec& q)
{
    const double horizon = grid.empty() ? 0.0 : *std::max_element(grid.begin(), grid.end());
    TimeVaryingSolution sol(lambda, gamma, init, beta, horizon, q);
    return sol.sample(grid);
}

std::vector<PeakReport> sirnc_timevarying_peak(const Schedule& lambda, const Schedule& gamma,
                                               const InitialState& init, double horizon)
{
    TimeVaryingSolution sol(lambda, gamma, init, 0.0, horizon);
    return sol.peaks();
}

// ---------------------------------------------------------------------------
// Imported infections

ImportedSolution::ImportedSolution(ModelParams params, double nu, InitialState init)
    : params_(params), nu_(nu), init_(init), c1_(0.0)
{
    require_valid(params_, init_);
    if (!(nu_ >= 0.0) || !std::isfinite(nu_)) {
        throw Error(ErrorCode::NonPositiveRate, "imported infection rate must be >= 0");
    }
    const double k = params_.lambda - params_.gamma;
    const double m = k + nu_;
    if (is_degenerate(params_) || std::abs(m) <= kDegenerateTolerance * std::max(params_.lambda, params_.gamma)) {
        throw Error(ErrorCode::DegenerateRates, "imported closed form needs lambda != gamma and lambda - gamma + nu != 0");
    }
    c1_ = init_.s0 * k / (init_.i0 * m + init_.s0 * nu_);
}

double ImportedSolution::log_h(double t) const
{
    // Homogeneous growth factor ((1 + C1 e^{-mt}) / (1 + C1))^{-l/k} e^{-g t}.
    const double k = params_.lambda - params_.gamma;
    const double m = k + nu_;
    const double base = (1.0 + c1_ * std::exp(-m * t)) / (1.0 + c1_);
    if (!(base > 0.0)) {
        throw Error(ErrorCode::DegenerateRates, "imported closed form leaves its domain");
    }
    return -(params_.lambda / k) * std::log(base) - params_.gamma * t;
}

double ImportedSolution::susceptible(double t) const
{
    check_time(t);
    if (init_.s0 == 0.0) {
        return 0.0;
    }
    return init_.s0 * std::exp(log_h(t) + params_.gamma * t - (params_.lambda + nu_) * t);
}

double ImportedSolution::infected(double t) const
{
    check_time(t);
    const double step = t > 0.0 ? std::min(0.01, t / 1000.0) : 0.01;
    return infected(t, {QuadratureSpec::Rule::Simpson, step});
}

double ImportedSolution::infected(double t, const QuadratureSpec& q) const
{
    check_time(t);
    const double lh_t = log_h(t);
    const double homog = init_.i0 * std::exp(lh_t);
    if (nu_ == 0.0 || t == 0.0) {
        return homog;
    }
    const auto kernel = [&](double s) { return std::exp(lh_t - log_h(s)) * susceptible(s); };
    const double full = integrate(kernel, 0.0, t, q);
    const double half = integrate(kernel, 0.0, t, {q.rule, q.step / 2.0});
    const double tol = q.rule == QuadratureSpec::Rule::Simpson ? 1e-8 : 1e-5;
    if (rel_diff(full, half) > tol) {
        throw Error(ErrorCode::QuadratureStepTooCoarse, "imported I(t) quadrature failed the half-step check");
    }
    return homog + nu_ * half;
}

std::vector<double> ImportedSolution::infected_on_grid(const std::vector<double>& grid) const
{
    // I(t) = H(t) (I0 + nu int_0^t S(s)/H(s) ds); the inner integral is accumulated
    // panel by panel with Simpson on each grid interval.
    std::vector<double> out;
    out.reserve(grid.size());
    double acc = 0.0;
    double prev = 0.0;
    const auto w = [this](double s) { return susceptible(s) * std::exp(-log_h(s)); };
    for (double t : grid) {
        check_time(t);
        if (t < prev) {
            throw Error(ErrorCode::InvalidArgument, "grid must be non-decreasing");
        }
        if (t > prev) {
            acc += integrate(w, prev, t, {QuadratureSpec::Rule::Simpson, std::min(0.01, (t - prev) / 2.0)});
        }
        prev = t;
        out.push_back(std::exp(log_h(t)) * (init_.i0 + nu_ * acc));
    }
    return out;
}

PeakReport ImportedSolution::peak(double horizon, double step) const
{
    const std::vector<double> grid = uniform_grid(horizon, step);
    const std::vector<double> iv = infected_on_grid(grid);
    const auto it = std::max_element(iv.begin(), iv.end());
    const auto k = static_cast<std::size_t>(it - iv.begin());
    PeakReport out{grid[k], iv[k]};
    if (k > 0 && k + 1 < grid.size()) {
        // Vertex of the parabola through the three samples around the maximum.
        const double h = grid[k + 1] - grid[k];
        const double denom = iv[k - 1] - 2.0 * iv[k] + iv[k + 1];
        if (denom < 0.0) {
            const double off = 0.5 * h * (iv[k - 1] - iv[k + 1]) / denom;
            out.t_max = grid[k] + off;
            out.i_max = iv[k] - 0.25 * (iv[k - 1] - iv[k + 1]) * off / h;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Classic SIR reference formulas

ClassicImax sir_classic_imax(const ModelParams& p, const InitialState& s)
{
    const double n = s.s0 + s.i0 + s.r0;
    const double rho = p.gamma / p.lambda;
    ClassicImax out;
    out.exact = s.i0 + s.s0 + n * rho * (std::log(n * rho / s.s0) - 1.0);
    out.approx = n * (1.0 - rho + rho * std::log(rho));
    return out;
}

DaleyApproximation sir_daley_R(const ModelParams& p, const InitialState& s, double t)
{
    const double n = s.s0 + s.i0 + s.r0;
    const double rho = p.lambda / p.gamma;
    const double s0 = s.s0;
    const double a = s0 / rho - 1.0;
    DaleyApproximation out;
    out.alpha = std::sqrt(2.0 * s0 / (rho * rho) * (n - s0) + a * a);
    out.phi = std::atanh(a / out.alpha);
    out.r = rho * rho / s0 * a + out.alpha * rho * rho / s0 * std::tanh(0.5 * p.gamma * out.alpha * t - out.phi);
    return out;
}

}  // namespace sirnc::closedform
