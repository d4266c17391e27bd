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

#ifndef SIRNC_PERTURBATION_HPP_
#define SIRNC_PERTURBATION_HPP_

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sirnc/core.hpp"
#include "sirnc/ode.hpp"

// First-order correction of weakly coupled communities around their uncoupled
// solutions, using the fundamental matrix of the linearised (S, I) dynamics.

namespace sirnc::perturbation {

/// Jacobian of the SIR-NC (S, I) vector field at (S, I).
Eigen::Matrix2d linearized_A(double s, double i, double lambda, double gamma);

struct Anchor {
    double t0 = 0.0;
    double s0 = 0.0;
    double i0 = 0.0;
};

/// Phi(t, t0) along the uncoupled closed-form trajectory through the anchor,
/// tabulated on a uniform grid.
class FundamentalSolution {
public:
    FundamentalSolution(Anchor anchor, double lambda, double gamma, double t_end, double step);

    const Anchor& anchor() const { return anchor_; }
    const std::vector<double>& times() const { return times_; }
    const std::vector<Eigen::Matrix2d>& values() const { return phi_; }
    /// Phi at grid index k.
    const Eigen::Matrix2d& at(std::size_t k) const { return phi_.at(k); }
    /// Phi at an arbitrary time in [t0, t_end], linear between grid points.
    Eigen::Matrix2d operator()(double t) const;

    /// Nominal (S, I) at time t.
    std::pair<double, double> nominal(double t) const;

private:
    Anchor anchor_;
    double lambda_;
    double gamma_;
    std::vector<double> times_;
    std::vector<Eigen::Matrix2d> phi_;
};

FundamentalSolution fundamental_solution(Anchor anchor, double lambda, double gamma, double t_end, double step);

struct PerturbationRun {
    Trajectory nominal;
    /// Forcing components (dS, dI) per grid point.
    std::vector<Eigen::Vector2d> forcing;
    Trajectory corrected;
    Trajectory truth;
    /// max(|dS|, |dI|) between corrected and truth per grid point.
    std::vector<double> error_estimate;
    /// Set when lambda_ab * horizon >= 1, i.e. outside the regime where the
    /// first-order term is expected to be accurate.
    bool horizon_warning = false;
    std::string warning;
};

/// Corrected trajectories of community a (first) and b (second) over [0, horizon].
std::pair<PerturbationRun, PerturbationRun> alekseev_correct(const ode::CommunityParams& cp, double horizon,
                                                             double step);

/// Applies the correction on consecutive windows, re-anchoring both communities
/// at the corrected state at the start of each window.
std::pair<Trajectory, Trajectory> repeated_window_correct(const ode::CommunityParams& cp, double horizon,
                                                          double window, double step);

/// Sup over time of max(|dS|, |dI|) between two trajectories on the same grid.
double sup_error(const Trajectory& a, const Trajectory& b);

}  // namespace sirnc::perturbation

#endif  // SIRNC_PERTURBATION_HPP_
