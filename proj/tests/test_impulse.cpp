#include <doctest.h>

#include <cmath>
#include <random>

#include "pitdyn/errors.hpp"
#include "pitdyn/impulse.hpp"

using namespace pitdyn;

namespace {

// Head-on central collision along X: bullet behind the target, moving in +X.
// Contact surface is perpendicular to X, so the tangent angle Gamma = -pi/2
// and the normal (Gamma + pi/2) is +X.
CollisionScenario head_on(double m_t, double m_b, double v_bx, double e) {
    CollisionScenario s;
    s.m_t = m_t;
    s.m_b = m_b;
    s.v_bx = v_bx;
    s.Gamma = -M_PI / 2.0;
    s.e = e;
    s.mu = 0.0;
    return s;
}

CollisionScenario random_scenario(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    CollisionScenario s;
    s.m_t = 1500.0 + 1000.0 * std::abs(u(rng));
    s.m_b = 1500.0 + 1000.0 * std::abs(u(rng));
    s.I_zzt = 2500.0 + 1500.0 * std::abs(u(rng));
    s.I_zzb = 2500.0 + 1500.0 * std::abs(u(rng));
    s.v_tx = 3.0 * u(rng);
    s.v_ty = 3.0 * u(rng);
    s.psi_dot_t = 0.3 * u(rng);
    s.psi_dot_b = 0.3 * u(rng);
    s.d_t = 1.0 + std::abs(u(rng));
    s.d_b = 1.0 + std::abs(u(rng));
    s.theta_t = M_PI * u(rng);
    s.theta_b = M_PI * u(rng);
    s.xi_t = 0.3 * u(rng);
    s.xi_b = 0.3 * u(rng);
    s.Gamma = M_PI * u(rng);
    s.e = 0.5 * (1.0 + u(rng)) * 0.5 + 0.25;
    s.mu = 0.4 * u(rng);
    // drive the bullet toward the target along the normal so contact closes
    const Eigen::Vector2d n = s.normal();
    s.v_bx = s.v_tx + 8.0 * n(0) + u(rng);
    s.v_by = s.v_ty + 8.0 * n(1) + u(rng);
    return s;
}

} // namespace

TEST_CASE("head-on plastic equal-mass collision: common final velocity") {
    const auto sol = solve_impulse(head_on(1000.0, 1000.0, 10.0, 0.0));
    CHECK(sol.V_tx == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(sol.V_bx == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(sol.P_x == doctest::Approx(5000.0).epsilon(1e-12));
    CHECK(sol.P_y == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("head-on elastic equal-mass collision: velocity exchange") {
    const auto sol = solve_impulse(head_on(1000.0, 1000.0, 10.0, 1.0));
    CHECK(sol.V_tx == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(std::abs(sol.V_bx) < 1e-9);
}

TEST_CASE("effective mass arithmetic") {
    const auto sol = solve_impulse(head_on(2000.0, 1500.0, 10.0, 0.5));
    CHECK(sol.m_eff == doctest::Approx(2000.0 * 1500.0 / 3500.0).epsilon(1e-12));
    CHECK(sol.m_eff == doctest::Approx(857.142857).epsilon(1e-8));
}

TEST_CASE("dissipated energy formula") {
    CHECK(dissipated_energy(1000.0, 10.0, 0.5) == doctest::Approx(37500.0).epsilon(1e-12));
    CHECK(dissipated_energy(1000.0, 10.0, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(dissipated_energy(1000.0, 10.0, 0.0) ==
          doctest::Approx(0.5 * 1000.0 * 100.0).epsilon(1e-12));
}

TEST_CASE("central collision: two-body KE loss matches dissipated energy") {
    for (double e : {0.0, 0.3, 0.7, 1.0}) {
        CollisionScenario s = head_on(1800.0, 1300.0, 12.0, e);
        const auto sol = solve_impulse(s);
        auto ke = [&](double vt, double vb) {
            return 0.5 * s.m_t * vt * vt + 0.5 * s.m_b * vb * vb;
        };
        const double loss = ke(s.v_tx, s.v_bx) - ke(sol.V_tx, sol.V_bx);
        CHECK(loss == doctest::Approx(sol.E_dissipated).epsilon(1e-6));
    }
}

TEST_CASE("momentum conservation on random scenarios") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 500; ++i) {
        const CollisionScenario s = random_scenario(rng);
        ImpulseSolution sol;
        try {
            sol = solve_impulse(s);
        } catch (const ModelError&) {
            continue;
        }
        const double px = s.m_t * (sol.V_tx - s.v_tx) + s.m_b * (sol.V_bx - s.v_bx);
        const double py = s.m_t * (sol.V_ty - s.v_ty) + s.m_b * (sol.V_by - s.v_by);
        const double scale = std::max(1.0, std::hypot(sol.P_x, sol.P_y));
        CHECK(std::abs(px) / scale < 1e-9);
        CHECK(std::abs(py) / scale < 1e-9);
    }
}

TEST_CASE("restitution recovered from post-impact contact velocities") {
    std::mt19937_64 rng(17);
    int checked = 0;
    for (int i = 0; i < 500 && checked < 200; ++i) {
        const CollisionScenario s = random_scenario(rng);
        try {
            const auto sol = solve_impulse(s);
            CHECK(restitution_from_solution(s, sol) == doctest::Approx(s.e).epsilon(1e-9));
            ++checked;
        } catch (const ModelError&) {
        }
    }
    CHECK(checked >= 100);
}

TEST_CASE("friction-ratio constraint satisfied exactly") {
    std::mt19937_64 rng(29);
    int checked = 0;
    for (int i = 0; i < 500 && checked < 200; ++i) {
        const CollisionScenario s = random_scenario(rng);
        try {
            const auto sol = solve_impulse(s);
            const double pmag = std::max(1.0, std::hypot(sol.P_x, sol.P_y));
            CHECK(std::abs(friction_ratio_residual(s, sol.P_x, sol.P_y)) / pmag < 1e-9);
            ++checked;
        } catch (const ModelError&) {
        }
    }
    CHECK(checked >= 100);
}

TEST_CASE("scale invariance: k-scaled masses and inertias scale impulses by k") {
    std::mt19937_64 rng(41);
    for (int i = 0; i < 50; ++i) {
        CollisionScenario s = random_scenario(rng);
        ImpulseSolution a;
        try {
            a = solve_impulse(s);
        } catch (const ModelError&) {
            continue;
        }
        const double k = 2.5;
        CollisionScenario s2 = s;
        s2.m_t *= k;
        s2.m_b *= k;
        s2.I_zzt *= k;
        s2.I_zzb *= k;
        const auto b = solve_impulse(s2);
        auto close = [](double got, double want) {
            return std::abs(got - want) <= 1e-9 * std::max(1.0, std::abs(want));
        };
        CHECK(close(b.P_x, k * a.P_x));
        CHECK(close(b.P_y, k * a.P_y));
        CHECK(close(b.V_tx, a.V_tx));
        CHECK(close(b.V_by, a.V_by));
        CHECK(close(b.Psi_dot_t, a.Psi_dot_t));
    }
}

TEST_CASE("separating vehicles throw NotClosing") {
    CollisionScenario s = head_on(1000.0, 1000.0, -5.0, 0.5);
    CHECK_THROWS_AS(solve_impulse(s), NotClosing);
}

TEST_CASE("scenario validation rejects bad inputs") {
    CollisionScenario s;
    s.m_t = -1.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = CollisionScenario{};
    s.e = 1.5;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = CollisionScenario{};
    s.mu = 2.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("feature vector ordering") {
    CollisionScenario s;
    s.m_t = 1.0;
    s.m_b = 2.0;
    s.v_ty = 3.0;
    s.v_by = 4.0;
    s.v_tx = 5.0;
    s.v_bx = 6.0;
    s.theta_b = 7.0;
    const auto f = s.feature_vector();
    for (int i = 0; i < 7; ++i) CHECK(f(i) == doctest::Approx(i + 1.0));
}

TEST_CASE("impulse from force curve") {
    ForceCurve c;
    c.dt = 1e-3;
    c.t_start = 0.0;
    c.t_end = 0.1;
    for (int i = 0; i <= 100; ++i) c.samples.push_back({0.0, 1000.0});
    CHECK(impulse_from_force(c)(1) == doctest::Approx(100.0).epsilon(1e-12));

    ForceCurve h;
    h.dt = 1e-4;
    h.t_start = 0.0;
    h.t_end = 0.1;
    const double A = 30000.0, T = 0.1;
    for (int i = 0; i <= 1000; ++i) h.samples.push_back({A * std::sin(M_PI * i * 1e-4 / T), 0.0});
    CHECK(impulse_from_force(h)(0) == doctest::Approx(2.0 * A * T / M_PI).epsilon(1e-5));

    ForceCurve z;
    z.dt = 1e-3;
    z.t_end = 0.01;
    for (int i = 0; i <= 10; ++i) z.samples.push_back({0.0, 0.0});
    CHECK(impulse_from_force(z).norm() == doctest::Approx(0.0));

    ForceCurve empty;
    CHECK_THROWS_AS(impulse_from_force(empty), EmptyCurve);
}
