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

#include "sirnc/perturbation.hpp"

#include <algorithm>
#include <cmath>

#include "sirnc/closedform.hpp"

namespace sirnc::perturbation {

Eigen::Matrix2d linearized_A(double s, double i, double lambda, double gamma)
{
    const double n = s + i;
    if (!(n > 0.0)) {
        throw Error(ErrorCode::ZeroPopulationDivisor, "linearisation needs S + I > 0");
    }
    const double n2 = n * n;
    Eigen::Matrix2d a;
    a << -lambda * i * i / n2, -lambda * s * s / n2, lambda * i * i / n2, lambda * s * s / n2 - gamma;
    return a;
}

FundamentalSolution::FundamentalSolution(Anchor anchor, double lambda, double gamma, double t_end, double step)
    : anchor_(anchor), lambda_(lambda), gamma_(gamma)
{
    if (t_end < anchor_.t0) {
        throw Error(ErrorCode::InvalidArgument, "fundamental solution needs t_end >= t0");
    }
    const std::vector<double> rel = uniform_grid(t_end - anchor_.t0, step);
    times_.reserve(rel.size());
    phi_.reserve(rel.size());
    const auto a_at = [this](double t) {
        const auto [s, i] = nominal(t);
        return linearized_A(s, i, lambda_, gamma_);
    };
    Eigen::Matrix2d phi = Eigen::Matrix2d::Identity();
    times_.push_back(anchor_.t0);
    phi_.push_back(phi);
    for (std::size_t k = 1; k < rel.size(); ++k) {
        const double t = anchor_.t0 + rel[k - 1];
        const double h = rel[k] - rel[k - 1];
        const Eigen::Matrix2d a0 = a_at(t);
        const Eigen::Matrix2d am = a_at(t + 0.5 * h);
        const Eigen::Matrix2d a1 = a_at(t + h);
        const Eigen::Matrix2d k1 = a0 * phi;
        const Eigen::Matrix2d k2 = am * (phi + 0.5 * h * k1);
        const Eigen::Matrix2d k3 = am * (phi + 0.5 * h * k2);
        const Eigen::Matrix2d k4 = a1 * (phi + h * k3);
        phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        times_.push_back(anchor_.t0 + rel[k]);
        phi_.push_back(phi);
    }
}

std::pair<double, double> FundamentalSolution::nominal(double t) const
{
    const ModelParams p{lambda_, gamma_, 0.0};
    const InitialState s{anchor_.s0, anchor_.i0, 0.0};
    return closedform::ClosedFormSolution(p, s).state(t - anchor_.t0);
}

Eigen::Matrix2d FundamentalSolution::operator()(double t) const
{
    if (t <= times_.front()) {
        return phi_.front();
    }
    if (t >= times_.back()) {
        return phi_.back();
    }
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const auto k = static_cast<std::size_t>(it - times_.begin());
    const double w = (t - times_[k - 1]) / (times_[k] - times_[k - 1]);
    return (1.0 - w) * phi_[k - 1] + w * phi_[k];
}

FundamentalSolution fundamental_solution(Anchor anchor, double lambda, double gamma, double t_end, double step)
{
    return FundamentalSolution(anchor, lambda, gamma, t_end, step);
}

namespace {

struct WindowResult {
    std::vector<double> times;
    std::vector<Eigen::Vector2d> nominal;
    std::vector<Eigen::Vector2d> forcing;
    std::vector<Eigen::Vector2d> corrected;
};

// Corrects `self` over [t0, t0 + length] using the uncoupled trajectory of
// `other` as the source of cross infections at rate `coupling`.
WindowResult correct_window(const ModelParams& self, Anchor self_anchor, const ModelParams& other,
                            Anchor other_anchor, double coupling, double length, double step)
{
    const FundamentalSolution phi(self_anchor, self.lambda, self.gamma, self_anchor.t0 + length, step);
    const closedform::ClosedFormSolution other_sol({other.lambda, other.gamma, 0.0},
                                                   {other_anchor.s0, other_anchor.i0, 0.0});
    WindowResult out;
    const std::size_t n = phi.times().size();
    out.times = phi.times();
    out.nominal.reserve(n);
    out.forcing.reserve(n);
    out.corrected.reserve(n);
    Eigen::Vector2d acc = Eigen::Vector2d::Zero();
    Eigen::Vector2d prev_integrand = Eigen::Vector2d::Zero();
    for (std::size_t k = 0; k < n; ++k) {
        const double t = out.times[k];
        const auto [s, i] = phi.nominal(t);
        const auto [sb, ib] = other_sol.state(t - other_anchor.t0);
        const double nb = sb + ib;
        const double rate = nb > 0.0 ? coupling * s * ib / nb : 0.0;
        const Eigen::Vector2d eps(-rate, rate);
        // Phi(t, s) = Phi(t, t0) Phi(s, t0)^{-1}.
        const Eigen::Vector2d integrand = phi.at(k).inverse() * eps;
        if (k > 0) {
            acc += 0.5 * (out.times[k] - out.times[k - 1]) * (integrand + prev_integrand);
        }
        prev_integrand = integrand;
        out.nominal.emplace_back(s, i);
        out.forcing.push_back(eps);
        out.corrected.push_back(Eigen::Vector2d(s, i) + phi.at(k) * acc);
    }
    return out;
}

Trajectory to_traj(const std::vector<double>& times, const std::vector<Eigen::Vector2d>& xs, double beta,
                   double r0)
{
    Trajectory tr;
    tr.reserve(times.size());
    double r = r0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (k > 0) {
            r += beta * 0.5 * (times[k] - times[k - 1]) * (xs[k][1] + xs[k - 1][1]);
        }
        tr.push_back(times[k], std::max(0.0, xs[k][0]), std::max(0.0, xs[k][1]), r);
    }
    return tr;
}

}  // namespace

double sup_error(const Trajectory& a, const Trajectory& b)
{
    if (a.size() != b.size()) {
        throw Error(ErrorCode::InvalidArgument, "trajectories must share a grid");
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        worst = std::max({worst, std::abs(a.s[k] - b.s[k]), std::abs(a.i[k] - b.i[k])});
    }
    return worst;
}

std::pair<PerturbationRun, PerturbationRun> alekseev_correct(const ode::CommunityParams& cp, double horizon,
                                                             double step)
{
    require_valid(cp.a, cp.init_a);
    require_valid(cp.b, cp.init_b);
    const Anchor anc_a{0.0, cp.init_a.s0, cp.init_a.i0};
    const Anchor anc_b{0.0, cp.init_b.s0, cp.init_b.i0};
    const WindowResult wa = correct_window(cp.a, anc_a, cp.b, anc_b, cp.lambda_ab, horizon, step);
    const WindowResult wb = correct_window(cp.b, anc_b, cp.a, anc_a, cp.lambda_ba, horizon, step);
    const ode::CommunityRun truth = ode::run_communities(cp, horizon, step);

    auto build = [&](const WindowResult& w, const ModelParams& p, const InitialState& init, const Trajectory& tr,
                     double coupling) {
        PerturbationRun run;
        run.nominal = to_traj(w.times, w.nominal, p.beta, init.r0);
        run.corrected = to_traj(w.times, w.corrected, p.beta, init.r0);
        run.forcing = w.forcing;
        run.truth = tr;
        run.error_estimate.reserve(w.times.size());
        for (std::size_t k = 0; k < w.times.size(); ++k) {
            run.error_estimate.push_back(
                std::max(std::abs(w.corrected[k][0] - tr.s[k]), std::abs(w.corrected[k][1] - tr.i[k])));
        }
        if (coupling * horizon >= 1.0) {
            run.horizon_warning = true;
            run.warning = std::string(to_string(ErrorCode::HorizonTooLongForPerturbation)) +
                          ": coupling * horizon >= 1, first-order correction may be inaccurate";
        }
        return run;
    };
    return {build(wa, cp.a, cp.init_a, truth.a, cp.lambda_ab), build(wb, cp.b, cp.init_b, truth.b, cp.lambda_ba)};
}

std::pair<Trajectory, Trajectory> repeated_window_correct(const ode::CommunityParams& cp, double horizon,
                                                          double window, double step)
{
    require_valid(cp.a, cp.init_a);
    require_valid(cp.b, cp.init_b);
    if (!(window > 0.0) || window > horizon * (1.0 + 1e-12)) {
        throw Error(ErrorCode::InvalidArgument, "window must lie in (0, horizon]");
    }
    std::vector<double> times;
    std::vector<Eigen::Vector2d> xa;
    std::vector<Eigen::Vector2d> xb;
    Anchor anc_a{0.0, cp.init_a.s0, cp.init_a.i0};
    Anchor anc_b{0.0, cp.init_b.s0, cp.init_b.i0};
    const auto n_windows = static_cast<std::size_t>(std::ceil(horizon / window - 1e-9));
    for (std::size_t w = 0; w < n_windows; ++w) {
        const double t0 = static_cast<double>(w) * window;
        const double length = std::min(window, horizon - t0);
        const WindowResult ra = correct_window(cp.a, anc_a, cp.b, anc_b, cp.lambda_ab, length, step);
        const WindowResult rb = correct_window(cp.b, anc_b, cp.a, anc_a, cp.lambda_ba, length, step);
        for (std::size_t k = (w == 0 ? 0 : 1); k < ra.times.size(); ++k) {
            times.push_back(ra.times[k]);
            xa.push_back(ra.corrected[k]);
            xb.push_back(rb.corrected[k]);
        }
        const double t_end = ra.times.back();
        anc_a = {t_end, std::max(ra.corrected.back()[0], 0.0), std::max(ra.corrected.back()[1], 1e-300)};
        anc_b = {t_end, std::max(rb.corrected.back()[0], 0.0), std::max(rb.corrected.back()[1], 1e-300)};
    }
    return {to_traj(times, xa, cp.a.beta, cp.init_a.r0), to_traj(times, xb, cp.b.beta, cp.init_b.r0)};
}

}  // namespace sirnc::perturbation
