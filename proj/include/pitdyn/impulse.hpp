#pragma once

#include <Eigen/Core>

#include "pitdyn/force_curve.hpp"

namespace pitdyn {

/// Two-vehicle planar collision scenario in the ground frame XOY.
///
/// Conventions (the angle decomposition is a choice of this library):
///  - theta + xi is the ground-frame angle of the CoG-to-contact radius,
///    so the contact point of vehicle v is CoG_v + d_v*(cos(theta_v+xi_v),
///    sin(theta_v+xi_v)).
///  - Gamma is the contact-surface tangent angle; the contact normal is
///    Gamma + pi/2 and points from the bullet into the target.
///  - mu = P_t / P_n with P_n along the normal and P_t along the tangent.
struct CollisionScenario {
    double m_t = 2000.0, m_b = 2000.0;     // masses [kg]
    double I_zzt = 3200.0, I_zzb = 3200.0; // yaw inertias [kg m^2]
    // pre-impact CoG velocities and yaw rates
    double v_tx = 0.0, v_ty = 0.0, psi_dot_t = 0.0;
    double v_bx = 0.0, v_by = 0.0, psi_dot_b = 0.0;
    // contact geometry
    double d_t = 0.0, d_b = 0.0;           // CoG-to-contact distances [m]
    double theta_t = 0.0, theta_b = 0.0;   // contact-direction angles [rad]
    double xi_t = 0.0, xi_b = 0.0;
    double Gamma = 0.0;                    // contact-surface tangent angle [rad]
    double e = 0.5;                        // restitution
    double mu = 0.0;                       // tangential impulse ratio

    void validate() const;

    /// Feature vector [m_t, m_b, v_ty, v_by, v_tx, v_bx, theta_b] for the
    /// force network input.
    Eigen::Matrix<double, 7, 1> feature_vector() const;

    /// Unit contact normal (Gamma + pi/2).
    Eigen::Vector2d normal() const;
    /// Unit contact tangent.
    Eigen::Vector2d tangent() const;
};

struct ImpulseSolution {
    double P_x = 0.0, P_y = 0.0; // impulse on the target [N s]
    double V_tx = 0.0, V_ty = 0.0, Psi_dot_t = 0.0;
    double V_bx = 0.0, V_by = 0.0, Psi_dot_b = 0.0;
    double m_eff = 0.0;        // m_t*m_b/(m_t+m_b) [kg]
    double E_dissipated = 0.0; // [J]
};

/// Closed-form momentum-conservation impulse solve. Throws NotClosing when
/// the contact-point relative normal approach velocity is non-positive and
/// SingularSystem on degenerate geometry.
ImpulseSolution solve_impulse(const CollisionScenario& scenario);

/// E = 1/2 m_eff V_rel^2 (1 - e^2).
double dissipated_energy(double m_eff, double v_rel, double e);

/// Residual of the tangential-ratio constraint mu*P_n - P_t, used by tests
/// and the conservation suite.
double friction_ratio_residual(const CollisionScenario& scenario, double P_x, double P_y);

/// Restitution coefficient recomputed from post-impact contact-point
/// velocities.
double restitution_from_solution(const CollisionScenario& scenario, const ImpulseSolution& sol);

} // namespace pitdyn
