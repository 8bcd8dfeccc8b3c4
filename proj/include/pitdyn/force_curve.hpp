#pragma once

#include <Eigen/Core>
#include <vector>

namespace pitdyn {

/// Uniformly sampled planar impact-force history in the ground frame.
/// Samples cover [t_start, t_end]; the force is zero outside that window.
struct ForceCurve {
    double dt = 1e-3;
    double t_start = 0.0;
    double t_end = 0.0;
    std::vector<Eigen::Vector2d> samples; // (F_x, F_y) [N]

    int size() const { return static_cast<int>(samples.size()); }
    bool empty() const { return samples.empty(); }

    /// Linear interpolation, zero outside the active window.
    Eigen::Vector2d at(double t) const;
};

/// Trapezoidal integral of (F_x, F_y) over the active window [N s].
Eigen::Vector2d impulse_from_force(const ForceCurve& curve);

/// Trapezoidal integral of |F| over the active window [N s].
double total_impulse_magnitude(const ForceCurve& curve);

/// Resample onto a uniform grid with the given step, covering [0, horizon].
ForceCurve resample(const ForceCurve& curve, double dt, double horizon);

} // namespace pitdyn
