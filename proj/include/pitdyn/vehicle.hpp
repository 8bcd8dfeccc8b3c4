#pragma once

#include <Eigen/Core>
#include <array>
#include <functional>
#include <vector>

#include "pitdyn/force_curve.hpp"

namespace pitdyn {

/// Inertial, geometric, suspension and tire constants of the 4DOF model.
struct VehicleParams {
    double m = 2000.0;      // total mass [kg]
    double m_s = 1800.0;    // sprung mass [kg]
    double I_zz = 3200.0;   // yaw inertia [kg m^2]
    double I_xx_s = 700.0;  // sprung roll inertia [kg m^2]
    double I_xz = 80.0;     // yaw-roll product of inertia [kg m^2]
    double K_s = 90000.0;   // roll stiffness [N m/rad]
    double B_s = 6000.0;    // roll damping [N m s/rad]
    double h_rc = 0.45;     // roll-center height [m]
    double h_cog = 0.55;    // CoG height [m]
    double l_f = 1.25;      // CoG to front axle [m]
    double l_r = 1.45;      // CoG to rear axle [m]
    double t_w = 1.56;      // track width (w) [m]
    double K_f = 50000.0;   // front roll-stiffness share [N m/rad]
    double K_r = 40000.0;   // rear roll-stiffness share [N m/rad]
    std::array<double, 4> C = {8.0, 8.0, 8.0, 8.0}; // tire shape factors (fl, fr, rl, rr)
    double mu_s = 0.9;      // tire-road friction coefficient
    double f_r0 = 0.015;    // rolling resistance, constant term
    double f_r1 = 0.0;      // rolling resistance, linear in speed [s/m]
    double f_r2 = 0.0;      // rolling resistance, quadratic in speed [s^2/m^2]
    double g = 9.81;

    void validate() const; // throws ConfigError on invariant violation
};

/// 8-dim state of the 4DOF model plus cached accelerations for load transfer.
struct VehicleState {
    double v_x = 0.0;     // body longitudinal velocity [m/s]
    double v_y = 0.0;     // body lateral velocity [m/s]
    double psi = 0.0;     // heading [rad]
    double psi_dot = 0.0; // yaw rate [rad/s]
    double phi = 0.0;     // roll angle [rad]
    double phi_dot = 0.0; // roll rate [rad/s]
    double X = 0.0;       // global position [m]
    double Y = 0.0;
    double a_x = 0.0;     // cached specific accelerations [m/s^2]
    double a_y = 0.0;

    Eigen::Matrix<double, 8, 1> vec() const {
        Eigen::Matrix<double, 8, 1> v;
        v << v_x, v_y, psi, psi_dot, phi, phi_dot, X, Y;
        return v;
    }
};

struct ControlInput {
    double delta = 0.0; // front steering angle [rad], |delta| <= 0.6
};

/// External collision force/moments expressed in the body frame.
struct PlanarForce {
    double F_x = 0.0;
    double F_y = 0.0;
    double M_z = 0.0;
    double M_x = 0.0;
};

/// Force application point in body coordinates, z measured from ground.
struct ForceApplication {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

using WheelArray = std::array<double, 4>; // order: fl, fr, rl, rr

/// Slip angles per wheel. Denominators use the low-speed guard
/// v_x -> max(v_x, 0.5 m/s).
WheelArray slip_angles(const VehicleState& state, const VehicleParams& params, double delta);

/// Vertical loads per wheel; throws WheelLiftOff when any load <= 0.
WheelArray vertical_loads(const VehicleState& state, const VehicleParams& params);

struct TireForces {
    WheelArray F_x{};
    WheelArray F_y{};
    bool friction_clamped = false; // longitudinal demand hit the friction circle
    bool wheel_liftoff = false;    // a load was floored instead of throwing
};

/// Magic-formula lateral forces with rolling-resistance longitudinal forces.
/// When clamp_infeasible is set, loads are floored and F_x clamped to
/// 0.99*mu_s*F_z instead of throwing (used inside trajectory integration).
TireForces tire_forces(const VehicleState& state, const VehicleParams& params, double delta,
                       bool clamp_infeasible = false);

/// Right-hand side of the 4DOF equations, ordered as the state vector
/// [v_x, v_y, psi, psi_dot, phi, phi_dot, X, Y].
Eigen::Matrix<double, 8, 1> state_derivative(const VehicleState& state,
                                             const VehicleParams& params, double delta,
                                             const PlanarForce& collision,
                                             bool clamp_infeasible = false,
                                             TireForces* tire_out = nullptr);

/// Rotate a ground-frame collision force into the body frame and attach
/// moment arms from the application point.
PlanarForce body_force_from_ground(const Eigen::Vector2d& force_ground, double psi,
                                   const ForceApplication& app, const VehicleParams& params);

struct SimOptions {
    double substep_dt = 1e-3;   // internal RK4 step
    double output_hz = 100.0;
    bool euler_baseline = false; // legacy explicit Euler at substep_dt
    bool tires_enabled = true;
    double v_guard = 150.0;      // divergence guards
    double yaw_rate_guard = 50.0;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<VehicleState> states;
    Eigen::Vector2d applied_impulse = Eigen::Vector2d::Zero(); // ground frame [N s]
    double kinetic_energy_initial = 0.0;
    double kinetic_energy_final = 0.0;
    bool friction_clamped = false;
    bool wheel_liftoff = false;
};

using SteeringProfile = std::function<double(double)>;

/// Integrate the 4DOF model under an optional ground-frame collision force
/// applied at `app`. Output is resampled to options.output_hz.
Trajectory integrate(const VehicleState& initial, const VehicleParams& params,
                     const SteeringProfile& steering, const ForceCurve* collision,
                     const ForceApplication& app, double horizon,
                     const SimOptions& options = {});

} // namespace pitdyn
