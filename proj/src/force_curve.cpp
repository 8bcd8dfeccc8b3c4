#include "pitdyn/force_curve.hpp"

#include <cmath>

#include "pitdyn/errors.hpp"

namespace pitdyn {

Eigen::Vector2d ForceCurve::at(double t) const {
    if (samples.empty() || t < t_start || t > t_end) return Eigen::Vector2d::Zero();
    const double s = (t - t_start) / dt;
    const int i = static_cast<int>(std::floor(s));
    if (i < 0) return samples.front();
    if (i >= size() - 1) return samples.back();
    const double f = s - i;
    return (1.0 - f) * samples[i] + f * samples[i + 1];
}

Eigen::Vector2d impulse_from_force(const ForceCurve& curve) {
    if (curve.empty()) throw EmptyCurve("impulse_from_force: empty force curve");
    Eigen::Vector2d p = Eigen::Vector2d::Zero();
    for (int i = 0; i + 1 < curve.size(); ++i)
        p += 0.5 * curve.dt * (curve.samples[i] + curve.samples[i + 1]);
    return p;
}

double total_impulse_magnitude(const ForceCurve& curve) {
    if (curve.empty()) throw EmptyCurve("total_impulse_magnitude: empty force curve");
    double p = 0.0;
    for (int i = 0; i + 1 < curve.size(); ++i)
        p += 0.5 * curve.dt * (curve.samples[i].norm() + curve.samples[i + 1].norm());
    return p;
}

ForceCurve resample(const ForceCurve& curve, double dt, double horizon) {
    ForceCurve out;
    out.dt = dt;
    out.t_start = 0.0;
    out.t_end = horizon;
    const int n = static_cast<int>(std::round(horizon / dt)) + 1;
    out.samples.reserve(n);
    for (int i = 0; i < n; ++i) out.samples.push_back(curve.at(i * dt));
    return out;
}

} // namespace pitdyn
