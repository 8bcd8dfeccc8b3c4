#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <cmath>
#include <random>

#include "pitdyn/errors.hpp"
#include "pitdyn/unscented.hpp"

using namespace pitdyn;
using namespace pitdyn::ut;

namespace {

// Closed-form pushforward of N(mean, cov) through the affine map
// [X', Y'] = pose + dt * R(psi) * [v_x, v_y].
void affine_oracle(const Eigen::Vector4d& mean, const Eigen::Matrix4d& cov, double X, double Y,
                   double psi, double dt, Eigen::Vector2d& mu, Eigen::Matrix2d& sigma) {
    Eigen::Matrix<double, 2, 4> A = Eigen::Matrix<double, 2, 4>::Zero();
    A(0, 0) = std::cos(psi) * dt;
    A(0, 1) = -std::sin(psi) * dt;
    A(1, 0) = std::sin(psi) * dt;
    A(1, 1) = std::cos(psi) * dt;
    mu = Eigen::Vector2d(X, Y) + A * mean;
    sigma = A * cov * A.transpose();
}

Eigen::Matrix4d random_spd(std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    Eigen::Matrix4d B;
    for (int i = 0; i < 16; ++i) B.data()[i] = n(rng);
    return B * B.transpose() + 1e-6 * scale * scale * Eigen::Matrix4d::Identity();
}

} // namespace

TEST_CASE("sigma points: zero covariance collapses to the mean") {
    const Eigen::Vector4d mean(10.0, 1.0, 0.2, 0.05);
    const auto s = sigma_points(mean, Eigen::Matrix4d::Zero());
    for (int i = 0; i < 9; ++i) CHECK((s.points.col(i) - mean).norm() == doctest::Approx(0.0));
}

TEST_CASE("sigma points: identity covariance offsets are alpha*sqrt(n)") {
    const Eigen::Vector4d mean = Eigen::Vector4d::Zero();
    const auto s = sigma_points(mean, Eigen::Matrix4d::Identity());
    for (int i = 1; i <= 4; ++i) {
        CHECK(s.points.col(i).norm() == doctest::Approx(0.002).epsilon(1e-9));
        CHECK(s.points.col(i + 4).norm() == doctest::Approx(0.002).epsilon(1e-9));
    }
    CHECK(s.points.col(0) == mean);
}

TEST_CASE("sigma points: weight identities") {
    const auto s = sigma_points(Eigen::Vector4d::Zero(), Eigen::Matrix4d::Identity());
    // compensated summation of the huge +-1e6-scale weights
    double msum = s.w_mean(0);
    for (int i = 1; i < 9; ++i) msum += s.w_mean(i);
    CHECK(msum == doctest::Approx(1.0).epsilon(1e-9));
    const UtParams p;
    CHECK(s.w_cov(0) == doctest::Approx(s.w_mean(0) + 1.0 - p.alpha * p.alpha + p.beta));
    CHECK(s.w_mean(0) == doctest::Approx(p.lambda(4) / (4.0 + p.lambda(4))));
}

TEST_CASE("transform point: axis-aligned anchors and rotation oracle") {
    CHECK(transform_point({10, 0, 0, 0}, 1.0, 2.0, 0.0, 0.01) ==
          Eigen::Vector2d(1.1, 2.0));
    const auto p = transform_point({10, 0, 0, 0}, 1.0, 2.0, M_PI / 2.0, 0.01);
    CHECK(p(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p(1) == doctest::Approx(2.1).epsilon(1e-12));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector4d v(10.0 * u(rng), 3.0 * u(rng), u(rng), u(rng));
        const double X = 5.0 * u(rng), Y = 5.0 * u(rng), psi = 3.0 * u(rng);
        Eigen::Rotation2D<double> R(psi);
        const Eigen::Vector2d want =
            Eigen::Vector2d(X, Y) + 0.01 * (R * Eigen::Vector2d(v(0), v(1)));
        CHECK((transform_point(v, X, Y, psi, 0.01) - want).norm() < 1e-12);
    }
}

TEST_CASE("propagate component: zero covariance is deterministic kinematics") {
    const Eigen::Vector4d mean(12.0, -1.0, 0.1, 0.0);
    const auto pc = propagate_component(mean, Eigen::Matrix4d::Zero(), 3.0, 4.0, 0.7, 0.01);
    CHECK((pc.mean - transform_point(mean, 3.0, 4.0, 0.7, 0.01)).norm() < 1e-9);
    CHECK(pc.cov.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("propagate component: affine exactness against closed form") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const Eigen::Vector4d mean(15.0 * u(rng), 4.0 * u(rng), u(rng), u(rng));
        const Eigen::Matrix4d cov = random_spd(rng, 0.5 + std::abs(u(rng)));
        const double X = 10.0 * u(rng), Y = 10.0 * u(rng), psi = 3.0 * u(rng), dt = 0.01;
        const auto pc = propagate_component(mean, cov, X, Y, psi, dt);
        Eigen::Vector2d mu;
        Eigen::Matrix2d sigma;
        affine_oracle(mean, cov, X, Y, psi, dt, mu, sigma);
        const double mscale = std::max(1.0, mu.cwiseAbs().maxCoeff());
        const double sscale = std::max(1e-12, sigma.cwiseAbs().maxCoeff());
        CHECK((pc.mean - mu).cwiseAbs().maxCoeff() / mscale < 1e-9);
        CHECK((pc.cov - sigma).cwiseAbs().maxCoeff() / sscale < 1e-9);
    }
}

TEST_CASE("propagate component: covariance homogeneity") {
    std::mt19937_64 rng(13);
    const Eigen::Vector4d mean(10.0, 2.0, 0.3, 0.1);
    const Eigen::Matrix4d cov = random_spd(rng, 1.0);
    const auto a = propagate_component(mean, cov, 0.0, 0.0, 0.4, 0.01);
    const auto b = propagate_component(mean, Eigen::Matrix4d(4.0 * cov), 0.0, 0.0, 0.4, 0.01);
    const double scale = std::max(1e-12, a.cov.cwiseAbs().maxCoeff());
    CHECK((b.cov - 4.0 * a.cov).cwiseAbs().maxCoeff() / (4.0 * scale) < 1e-9);
    CHECK((b.mean - a.mean).norm() < 1e-9);
}

TEST_CASE("propagated covariance stays PSD") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector4d mean(10.0 * u(rng), 3.0 * u(rng), u(rng), u(rng));
        const auto pc =
            propagate_component(mean, random_spd(rng, 1.0), 0.0, 0.0, 3.0 * u(rng), 0.01);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(pc.cov);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    }
}

TEST_CASE("sigma points: non-PSD covariance throws after jitter attempts") {
    Eigen::Matrix4d bad = -Eigen::Matrix4d::Identity();
    CHECK_THROWS_AS(sigma_points(Eigen::Vector4d::Zero(), bad), NotPSD);
}

TEST_CASE("trajectory gmm: single component equals direct propagation") {
    StateGmm g;
    g.weights = {1.0};
    g.means = {Eigen::Vector4d(10.0, 1.0, 0.1, 0.0)};
    g.variances = {Eigen::Vector4d(0.5, 0.3, 0.01, 0.01)};
    const auto traj = trajectory_gmm(g, 1.0, 2.0, 0.3, 0.01);
    const auto pc = propagate_component(
        g.means[0], Eigen::Matrix4d(g.variances[0].asDiagonal()), 1.0, 2.0, 0.3, 0.01);
    REQUIRE(traj.components() == 1);
    CHECK((traj.means[0] - pc.mean).norm() < 1e-12);
    CHECK((traj.covs[0] - pc.cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("trajectory gmm: density integrates to one") {
    StateGmm g;
    g.weights = {0.6, 0.4};
    g.means = {Eigen::Vector4d(10.0, 1.0, 0.0, 0.0), Eigen::Vector4d(8.0, -2.0, 0.0, 0.0)};
    g.variances = {Eigen::Vector4d(1.0, 0.5, 0.01, 0.01), Eigen::Vector4d(0.8, 1.2, 0.01, 0.01)};
    const auto traj = trajectory_gmm(g, 0.0, 0.0, 0.2, 0.1);

    // wide quadrature box around the mixture
    const Eigen::Vector2d mu = traj.mean();
    double span = 0.0;
    for (int j = 0; j < traj.components(); ++j)
        span = std::max({span, (traj.means[j] - mu).norm() +
                                   8.0 * std::sqrt(traj.covs[j].diagonal().maxCoeff())});
    const int n = 400;
    const double h = 2.0 * span / n;
    double mass = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            mass += traj.density(mu(0) - span + (i + 0.5) * h, mu(1) - span + (j + 0.5) * h) * h * h;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("trajectory gmm: component order does not change the density") {
    StateGmm g;
    g.weights = {0.7, 0.3};
    g.means = {Eigen::Vector4d(10.0, 0.0, 0.0, 0.0), Eigen::Vector4d(5.0, 2.0, 0.0, 0.0)};
    g.variances = {Eigen::Vector4d(1.0, 1.0, 0.01, 0.01), Eigen::Vector4d(0.5, 0.5, 0.01, 0.01)};
    StateGmm swapped;
    swapped.weights = {0.3, 0.7};
    swapped.means = {g.means[1], g.means[0]};
    swapped.variances = {g.variances[1], g.variances[0]};
    const auto a = trajectory_gmm(g, 0.0, 0.0, 0.0, 0.05);
    const auto b = trajectory_gmm(swapped, 0.0, 0.0, 0.0, 0.05);
    for (double x : {-0.5, 0.0, 0.3, 0.6})
        for (double y : {-0.2, 0.0, 0.1})
            CHECK(a.density(x, y) == doctest::Approx(b.density(x, y)).epsilon(1e-12));
}

TEST_CASE("density grid covers mean plus-minus four sigma") {
    StateGmm g;
    g.weights = {1.0};
    g.means = {Eigen::Vector4d(10.0, 1.0, 0.0, 0.0)};
    g.variances = {Eigen::Vector4d(1.0, 1.0, 0.0, 0.0)};
    const auto traj = trajectory_gmm(g, 0.0, 0.0, 0.0, 0.1);
    const auto grid = density_grid(traj, 200);
    CHECK(grid.xs.size() == 200);
    CHECK(grid.density.rows() == 200);
    const Eigen::Vector2d mu = traj.mean();
    const double sx = std::sqrt(traj.covs[0](0, 0));
    CHECK(grid.xs.minCoeff() == doctest::Approx(mu(0) - 4.0 * sx).epsilon(1e-9));
    CHECK(grid.xs.maxCoeff() == doctest::Approx(mu(0) + 4.0 * sx).epsilon(1e-9));
    // density peak near the mean
    int imax = 0, jmax = 0;
    grid.density.maxCoeff(&imax, &jmax);
    CHECK(std::abs(grid.xs(imax) - mu(0)) < 0.1);
    CHECK(std::abs(grid.ys(jmax) - mu(1)) < 0.1);
}
