#include "pitdyn/impulse.hpp"

#include <Eigen/LU>
#include <cmath>

#include "pitdyn/errors.hpp"

namespace pitdyn {

namespace {

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a(0) * b(1) - a(1) * b(0);
}

struct ContactKinematics {
    Eigen::Vector2d r_t, r_b, n, t;

    explicit ContactKinematics(const CollisionScenario& s) {
        r_t = s.d_t * Eigen::Vector2d(std::cos(s.theta_t + s.xi_t), std::sin(s.theta_t + s.xi_t));
        r_b = s.d_b * Eigen::Vector2d(std::cos(s.theta_b + s.xi_b), std::sin(s.theta_b + s.xi_b));
        n = s.normal();
        t = s.tangent();
    }

    /// Relative normal velocity at the contact point (bullet minus target)
    /// as a function of the impulse P applied to the target.
    double rel_normal_velocity(const CollisionScenario& s, const Eigen::Vector2d& P) const {
        const double psid_t = s.psi_dot_t + cross2(r_t, P) / s.I_zzt;
        const double psid_b = s.psi_dot_b - cross2(r_b, P) / s.I_zzb;
        const Eigen::Vector2d v_t(s.v_tx + P(0) / s.m_t, s.v_ty + P(1) / s.m_t);
        const Eigen::Vector2d v_b(s.v_bx - P(0) / s.m_b, s.v_by - P(1) / s.m_b);
        const Eigen::Vector2d u_t(v_t(0) - psid_t * r_t(1), v_t(1) + psid_t * r_t(0));
        const Eigen::Vector2d u_b(v_b(0) - psid_b * r_b(1), v_b(1) + psid_b * r_b(0));
        return (u_b - u_t).dot(n);
    }
};

} // namespace

void CollisionScenario::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("CollisionScenario: ") + what);
    };
    require(m_t > 0.0 && m_b > 0.0, "masses must be positive");
    require(I_zzt > 0.0 && I_zzb > 0.0, "inertias must be positive");
    require(e >= 0.0 && e <= 1.0, "restitution out of [0, 1]");
    require(std::abs(mu) <= 1.5, "|mu| > 1.5");
    require(d_t >= 0.0 && d_b >= 0.0, "contact distances must be non-negative");
}

Eigen::Matrix<double, 7, 1> CollisionScenario::feature_vector() const {
    Eigen::Matrix<double, 7, 1> f;
    f << m_t, m_b, v_ty, v_by, v_tx, v_bx, theta_b;
    return f;
}

Eigen::Vector2d CollisionScenario::normal() const {
    return {-std::sin(Gamma), std::cos(Gamma)};
}

Eigen::Vector2d CollisionScenario::tangent() const {
    return {std::cos(Gamma), std::sin(Gamma)};
}

ImpulseSolution solve_impulse(const CollisionScenario& s) {
    s.validate();
    const ContactKinematics ck(s);

    const double g0 = ck.rel_normal_velocity(s, Eigen::Vector2d::Zero());
    if (g0 <= 0.0) throw NotClosing("solve_impulse: vehicles not closing at contact");

    // g(P) is affine in P; extract the linear part by unit impulses.
    const double ax = ck.rel_normal_velocity(s, Eigen::Vector2d(1.0, 0.0)) - g0;
    const double ay = ck.rel_normal_velocity(s, Eigen::Vector2d(0.0, 1.0)) - g0;

    // Row 1: restitution, g(P) = -e*g0.  Row 2: mu*P_n - P_t = 0.
    Eigen::Matrix2d A;
    A << ax, ay, s.mu * ck.n(0) - ck.t(0), s.mu * ck.n(1) - ck.t(1);
    Eigen::Vector2d b(-(1.0 + s.e) * g0, 0.0);

    const double scale = A.row(0).norm() * A.row(1).norm();
    if (std::abs(A.determinant()) < 1e-12 * std::max(scale, 1e-30))
        throw SingularSystem("solve_impulse: degenerate contact geometry");
    const Eigen::Vector2d P = A.partialPivLu().solve(b);

    ImpulseSolution sol;
    sol.P_x = P(0);
    sol.P_y = P(1);
    sol.V_tx = s.v_tx + P(0) / s.m_t;
    sol.V_ty = s.v_ty + P(1) / s.m_t;
    sol.Psi_dot_t = s.psi_dot_t + cross2(ck.r_t, P) / s.I_zzt;
    sol.V_bx = s.v_bx - P(0) / s.m_b;
    sol.V_by = s.v_by - P(1) / s.m_b;
    sol.Psi_dot_b = s.psi_dot_b - cross2(ck.r_b, P) / s.I_zzb;
    sol.m_eff = s.m_t * s.m_b / (s.m_t + s.m_b);
    const double v_rel = std::hypot(s.v_bx - s.v_tx, s.v_by - s.v_ty);
    sol.E_dissipated = dissipated_energy(sol.m_eff, v_rel, s.e);
    return sol;
}

double dissipated_energy(double m_eff, double v_rel, double e) {
    return 0.5 * m_eff * v_rel * v_rel * (1.0 - e * e);
}

double friction_ratio_residual(const CollisionScenario& s, double P_x, double P_y) {
    const Eigen::Vector2d P(P_x, P_y);
    return s.mu * P.dot(s.normal()) - P.dot(s.tangent());
}

double restitution_from_solution(const CollisionScenario& s, const ImpulseSolution& sol) {
    const ContactKinematics ck(s);
    const double pre = ck.rel_normal_velocity(s, Eigen::Vector2d::Zero());
    const double post = ck.rel_normal_velocity(s, Eigen::Vector2d(sol.P_x, sol.P_y));
    return -post / pre;
}

} // namespace pitdyn
