#pragma once

#include <Eigen/Core>
#include <vector>

#include "pitdyn/state_gmm.hpp"

namespace pitdyn::ut {

/// Unscented-transform scaling constants. With the default alpha the
/// zeroth mean weight is about -1e6, so covariance assembly must use
/// compensated summation to retain affine exactness.
struct UtParams {
    double alpha = 0.001;
    double kappa = 0.0;
    double beta = 2.0;

    double lambda(int n) const { return alpha * alpha * (n + kappa) - n; }
};

struct SigmaPointSet {
    Eigen::Matrix<double, 4, 9> points; // column i = sigma point i
    Eigen::Matrix<double, 9, 1> w_mean;
    Eigen::Matrix<double, 9, 1> w_cov;
};

/// 2n+1 sigma points via Cholesky square root; near-singular covariances get
/// jitter 1e-12*trace*I, up to 3 attempts, then NotPSD is thrown.
SigmaPointSet sigma_points(const Eigen::Vector4d& mean, const Eigen::Matrix4d& cov,
                           const UtParams& params = {});

/// Kinematic push of one sigma point into the global frame (Eq. of motion
/// is affine in (v_x, v_y) for a fixed pose).
Eigen::Vector2d transform_point(const Eigen::Vector4d& point, double X, double Y, double psi,
                                double dt);

struct PropagatedComponent {
    Eigen::Vector2d mean;
    Eigen::Matrix2d cov;
};

PropagatedComponent propagate_component(const Eigen::Vector4d& mean, const Eigen::Matrix4d& cov,
                                        double X, double Y, double psi, double dt,
                                        const UtParams& params = {});

/// Mixture over global (X, Y) for one timestep.
struct TrajectoryGmm {
    std::vector<double> weights;
    std::vector<Eigen::Vector2d> means;
    std::vector<Eigen::Matrix2d> covs;

    int components() const { return static_cast<int>(weights.size()); }
    double density(double x, double y) const;
    Eigen::Vector2d mean() const;
};

TrajectoryGmm trajectory_gmm(const StateGmm& state_gmm, double X, double Y, double psi, double dt,
                             const UtParams& params = {});

struct DensityGrid {
    Eigen::VectorXd xs, ys;
    Eigen::MatrixXd density; // density(i, j) at (xs(i), ys(j))
};

/// 200x200 grid auto-bounded at mixture mean +- 4 sigma.
DensityGrid density_grid(const TrajectoryGmm& gmm, int resolution = 200);

} // namespace pitdyn::ut
