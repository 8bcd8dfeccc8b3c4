#include "pitdyn/unscented.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "pitdyn/errors.hpp"

namespace pitdyn::ut {

namespace {

/// Neumaier compensated accumulator.
struct Kahan {
    double sum = 0.0, c = 0.0;
    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            c += (sum - t) + x;
        else
            c += (x - t) + sum;
        sum = t;
    }
    double get() const { return sum + c; }
};

} // namespace

SigmaPointSet sigma_points(const Eigen::Vector4d& mean, const Eigen::Matrix4d& cov,
                           const UtParams& params) {
    constexpr int n = 4;
    const double lambda = params.lambda(n);
    // n + lambda reduces to alpha^2*(n + kappa); evaluating that form directly
    // avoids the catastrophic cancellation of n + (alpha^2*(n+kappa) - n),
    // which costs ~6 digits at the default alpha
    const double n_lambda = params.alpha * params.alpha * (n + params.kappa);
    const Eigen::Matrix4d scaled = n_lambda * cov;

    Eigen::Matrix4d L = Eigen::Matrix4d::Zero();
    if (scaled.norm() > 0.0) {
        Eigen::Matrix4d attempt = scaled;
        bool ok = false;
        for (int k = 0; k < 3 && !ok; ++k) {
            Eigen::LLT<Eigen::Matrix4d> llt(attempt);
            if (llt.info() == Eigen::Success) {
                L = llt.matrixL();
                ok = true;
            } else {
                attempt += 1e-12 * scaled.trace() * Eigen::Matrix4d::Identity();
            }
        }
        if (!ok) throw NotPSD("sigma_points: covariance not positive semidefinite");
    }

    SigmaPointSet s;
    s.points.col(0) = mean;
    for (int i = 0; i < n; ++i) {
        s.points.col(1 + i) = mean + L.col(i);
        s.points.col(1 + n + i) = mean - L.col(i);
    }
    s.w_mean(0) = lambda / n_lambda;
    s.w_cov(0) = s.w_mean(0) + (1.0 - params.alpha * params.alpha + params.beta);
    for (int i = 1; i <= 2 * n; ++i) {
        s.w_mean(i) = 1.0 / (2.0 * n_lambda);
        s.w_cov(i) = 1.0 / (2.0 * n_lambda);
    }
    return s;
}

Eigen::Vector2d transform_point(const Eigen::Vector4d& point, double X, double Y, double psi,
                                double dt) {
    const double c = std::cos(psi), s = std::sin(psi);
    return {X + (point(0) * c - point(1) * s) * dt, Y + (point(0) * s + point(1) * c) * dt};
}

PropagatedComponent propagate_component(const Eigen::Vector4d& mean, const Eigen::Matrix4d& cov,
                                        double X, double Y, double psi, double dt,
                                        const UtParams& params) {
    const SigmaPointSet s = sigma_points(mean, cov, params);
    Eigen::Matrix<double, 2, 9> y;
    for (int i = 0; i < 9; ++i) y.col(i) = transform_point(s.points.col(i), X, Y, psi, dt);

    PropagatedComponent out;
    for (int r = 0; r < 2; ++r) {
        Kahan acc;
        for (int i = 0; i < 9; ++i) acc.add(s.w_mean(i) * y(r, i));
        out.mean(r) = acc.get();
    }
    for (int r = 0; r < 2; ++r) {
        for (int c = r; c < 2; ++c) {
            Kahan acc;
            for (int i = 0; i < 9; ++i)
                acc.add(s.w_cov(i) * (y(r, i) - out.mean(r)) * (y(c, i) - out.mean(c)));
            out.cov(r, c) = acc.get();
            out.cov(c, r) = out.cov(r, c);
        }
    }
    return out;
}

double TrajectoryGmm::density(double x, double y) const {
    const Eigen::Vector2d p(x, y);
    double d = 0.0;
    for (int j = 0; j < components(); ++j) {
        Eigen::Matrix2d cov = covs[j];
        const double det = cov.determinant();
        if (det <= 0.0) continue;
        const Eigen::Vector2d r = p - means[j];
        const double q = r.dot(cov.inverse() * r);
        d += weights[j] * std::exp(-0.5 * q) / (2.0 * M_PI * std::sqrt(det));
    }
    return d;
}

Eigen::Vector2d TrajectoryGmm::mean() const {
    Eigen::Vector2d m = Eigen::Vector2d::Zero();
    for (int j = 0; j < components(); ++j) m += weights[j] * means[j];
    return m;
}

TrajectoryGmm trajectory_gmm(const StateGmm& state_gmm, double X, double Y, double psi, double dt,
                             const UtParams& params) {
    TrajectoryGmm out;
    for (int j = 0; j < state_gmm.components(); ++j) {
        const PropagatedComponent pc = propagate_component(
            state_gmm.means[j], Eigen::Matrix4d(state_gmm.variances[j].asDiagonal()), X, Y, psi,
            dt, params);
        out.weights.push_back(state_gmm.weights[j]);
        out.means.push_back(pc.mean);
        out.covs.push_back(pc.cov);
    }
    return out;
}

DensityGrid density_grid(const TrajectoryGmm& gmm, int resolution) {
    const Eigen::Vector2d mu = gmm.mean();
    double sx = 0.0, sy = 0.0;
    for (int j = 0; j < gmm.components(); ++j) {
        const Eigen::Vector2d d = gmm.means[j] - mu;
        sx = std::max(sx, std::sqrt(std::max(gmm.covs[j](0, 0), 0.0)) + std::abs(d(0)));
        sy = std::max(sy, std::sqrt(std::max(gmm.covs[j](1, 1), 0.0)) + std::abs(d(1)));
    }
    sx = std::max(sx, 1e-3);
    sy = std::max(sy, 1e-3);
    DensityGrid g;
    g.xs = Eigen::VectorXd::LinSpaced(resolution, mu(0) - 4.0 * sx, mu(0) + 4.0 * sx);
    g.ys = Eigen::VectorXd::LinSpaced(resolution, mu(1) - 4.0 * sy, mu(1) + 4.0 * sy);
    g.density.resize(resolution, resolution);
    for (int i = 0; i < resolution; ++i)
        for (int j = 0; j < resolution; ++j) g.density(i, j) = gmm.density(g.xs(i), g.ys(j));
    return g;
}

} // namespace pitdyn::ut
