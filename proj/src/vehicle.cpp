#include "pitdyn/vehicle.hpp"

#include <Eigen/LU>
#include <cmath>

#include "pitdyn/errors.hpp"

namespace pitdyn {

namespace {

constexpr double kLowSpeedFloor = 0.5;  // [m/s], Eq. 5 denominator guard
constexpr double kDenFloor = 0.05;      // absolute denominator floor

double guarded(double den) {
    if (std::abs(den) < kDenFloor) return den >= 0.0 ? kDenFloor : -kDenFloor;
    return den;
}

VehicleState from_vec(const Eigen::Matrix<double, 8, 1>& v, double a_x, double a_y) {
    VehicleState s;
    s.v_x = v(0);
    s.v_y = v(1);
    s.psi = v(2);
    s.psi_dot = v(3);
    s.phi = v(4);
    s.phi_dot = v(5);
    s.X = v(6);
    s.Y = v(7);
    s.a_x = a_x;
    s.a_y = a_y;
    return s;
}

} // namespace

void VehicleParams::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("VehicleParams: ") + what);
    };
    require(m > 0.0 && m_s > 0.0, "masses must be positive");
    require(m_s <= m, "sprung mass exceeds total mass");
    require(I_zz > 0.0 && I_xx_s > 0.0, "inertias must be positive");
    require(l_f > 0.0 && l_r > 0.0 && l_f + l_r > 0.0, "axle distances must be positive");
    require(t_w > 0.0, "track width must be positive");
    require(mu_s > 0.0 && mu_s <= 2.0, "mu_s out of range (0, 2]");
    require(K_f > 0.0 && K_r > 0.0 && K_s > 0.0, "stiffnesses must be positive");
    require(h_cog > 0.0 && h_rc > 0.0, "heights must be positive");
}

WheelArray slip_angles(const VehicleState& state, const VehicleParams& params, double delta) {
    const double vx = std::max(state.v_x, kLowSpeedFloor);
    const double w2 = 0.5 * params.t_w;
    const double num_f = state.v_y + params.l_f * state.psi_dot;
    const double num_r = state.v_y - params.l_r * state.psi_dot;
    WheelArray a;
    a[0] = delta - std::atan(num_f / guarded(vx - w2 * state.psi_dot));
    a[1] = delta - std::atan(num_f / guarded(vx + w2 * state.psi_dot));
    a[2] = -std::atan(num_r / guarded(vx - w2 * state.psi_dot));
    a[3] = -std::atan(num_r / guarded(vx + w2 * state.psi_dot));
    return a;
}

WheelArray vertical_loads(const VehicleState& state, const VehicleParams& params) {
    const VehicleParams& p = params;
    const double L = p.l_f + p.l_r;
    const double long_f = 0.5 * p.m * (p.g * p.l_r / L - p.h_cog * state.a_x / L);
    const double long_r = 0.5 * p.m * (p.g * p.l_f / L + p.h_cog * state.a_x / L);
    const double lat = p.m * p.h_cog * state.a_y / p.t_w +
                       p.m_s * p.g * p.h_rc * std::sin(state.phi) / p.t_w;
    const double share_f = p.K_f / (p.K_f + p.K_r);
    const double share_r = p.K_r / (p.K_f + p.K_r);
    WheelArray fz;
    fz[0] = long_f - share_f * lat;
    fz[1] = long_f + share_f * lat;
    fz[2] = long_r - share_r * lat;
    fz[3] = long_r + share_r * lat;
    for (double v : fz)
        if (v <= 0.0) throw WheelLiftOff("vertical_loads: non-positive wheel load");
    return fz;
}

TireForces tire_forces(const VehicleState& state, const VehicleParams& params, double delta,
                       bool clamp_infeasible) {
    TireForces out;
    WheelArray fz;
    try {
        fz = vertical_loads(state, params);
    } catch (const WheelLiftOff&) {
        if (!clamp_infeasible) throw;
        // floor loads at 1% of the static corner load; model validity flag set
        out.wheel_liftoff = true;
        const VehicleParams& p = params;
        const double L = p.l_f + p.l_r;
        const double floor_f = 0.01 * 0.5 * p.m * p.g * p.l_r / L;
        const double floor_r = 0.01 * 0.5 * p.m * p.g * p.l_f / L;
        const double long_f = 0.5 * p.m * (p.g * p.l_r / L - p.h_cog * state.a_x / L);
        const double long_r = 0.5 * p.m * (p.g * p.l_f / L + p.h_cog * state.a_x / L);
        const double lat = p.m * p.h_cog * state.a_y / p.t_w +
                           p.m_s * p.g * p.h_rc * std::sin(state.phi) / p.t_w;
        const double share_f = p.K_f / (p.K_f + p.K_r);
        const double share_r = p.K_r / (p.K_f + p.K_r);
        fz[0] = std::max(long_f - share_f * lat, floor_f);
        fz[1] = std::max(long_f + share_f * lat, floor_f);
        fz[2] = std::max(long_r - share_r * lat, floor_r);
        fz[3] = std::max(long_r + share_r * lat, floor_r);
    }

    const auto alpha = slip_angles(state, params, delta);
    const double v = std::abs(state.v_x);
    const double fr = params.f_r0 + params.f_r1 * v + params.f_r2 * v * v;
    const double dir = state.v_x >= 0.0 ? -1.0 : 1.0; // rolling resistance opposes motion
    for (int i = 0; i < 4; ++i) {
        double fx = dir * fr * fz[i];
        const double cap = params.mu_s * fz[i];
        if (std::abs(fx) > cap) {
            if (!clamp_infeasible)
                throw ModelError("tire_forces: friction circle violation");
            fx = std::copysign(0.99 * cap, fx);
            out.friction_clamped = true;
        }
        const double rad2 = cap * cap - fx * fx;
        out.F_x[i] = fx;
        // restoring lateral force: with alpha = delta - atan(...) the positive
        // sign opposes the lateral slip velocity (the sign combination that
        // keeps straight rolling asymptotically stable)
        out.F_y[i] = std::sin(std::atan(params.C[i] * alpha[i])) * std::sqrt(std::max(rad2, 0.0));
    }
    return out;
}

Eigen::Matrix<double, 8, 1> state_derivative(const VehicleState& state,
                                             const VehicleParams& params, double delta,
                                             const PlanarForce& collision,
                                             bool clamp_infeasible, TireForces* tire_out) {
    const VehicleParams& p = params;
    const double det = p.I_zz * p.I_xx_s;
    if (std::abs(det) < 1e-9 * std::max(1.0, p.I_zz * p.I_zz))
        throw SingularInertia("state_derivative: singular 2x2 inertia block");

    TireForces tf;
    const double speed = std::hypot(state.v_x, state.v_y);
    const double f_col_mag = std::hypot(collision.F_x, collision.F_y);
    const bool frozen = speed < kLowSpeedFloor && f_col_mag < 1.0;
    if (!frozen) tf = tire_forces(state, params, delta, clamp_infeasible);
    if (tire_out) *tire_out = tf;

    const double Fx_tire = tf.F_x[0] + tf.F_x[1] + tf.F_x[2] + tf.F_x[3];
    const double Fy_tire = tf.F_y[0] + tf.F_y[1] + tf.F_y[2] + tf.F_y[3];
    const double Mz_tire = p.l_f * (tf.F_y[0] + tf.F_y[1]) - p.l_r * (tf.F_y[2] + tf.F_y[3]) +
                           0.5 * p.t_w * (tf.F_x[1] - tf.F_x[0] + tf.F_x[3] - tf.F_x[2]);

    Eigen::Matrix<double, 8, 1> d;
    if (frozen) {
        // below the low-speed floor the lateral/yaw dynamics are frozen
        const double phidd = (p.m_s * p.g * p.h_rc * std::sin(state.phi) - p.K_s * state.phi -
                              p.B_s * state.phi_dot + collision.M_x) /
                             p.I_xx_s;
        d << collision.F_x / p.m, 0.0, state.psi_dot, 0.0, state.phi_dot, phidd,
            state.v_x * std::cos(state.psi) - state.v_y * std::sin(state.psi),
            state.v_x * std::sin(state.psi) + state.v_y * std::cos(state.psi);
        return d;
    }

    const double vx_dot = state.v_y * state.psi_dot + (Fx_tire + collision.F_x) / p.m;
    const double vy_dot = -state.v_x * state.psi_dot + (Fy_tire + collision.F_y) / p.m;

    // [I_zz 0; I_xz I_xx_s] [psi_dd; phi_dd] = [Mz; roll_rhs]
    Eigen::Matrix2d A;
    A << p.I_zz, 0.0, p.I_xz, p.I_xx_s;
    Eigen::Vector2d b;
    b << Mz_tire + collision.M_z,
        p.m_s * p.g * p.h_rc * std::sin(state.phi) - p.K_s * state.phi - p.B_s * state.phi_dot +
            collision.M_x;
    const Eigen::Vector2d ang = A.partialPivLu().solve(b);

    d << vx_dot, vy_dot, state.psi_dot, ang(0), state.phi_dot, ang(1),
        state.v_x * std::cos(state.psi) - state.v_y * std::sin(state.psi),
        state.v_x * std::sin(state.psi) + state.v_y * std::cos(state.psi);
    return d;
}

PlanarForce body_force_from_ground(const Eigen::Vector2d& force_ground, double psi,
                                   const ForceApplication& app, const VehicleParams& params) {
    const double c = std::cos(psi), s = std::sin(psi);
    PlanarForce f;
    f.F_x = c * force_ground(0) + s * force_ground(1);
    f.F_y = -s * force_ground(0) + c * force_ground(1);
    f.M_z = app.x * f.F_y - app.y * f.F_x;
    f.M_x = f.F_y * (app.z - params.h_rc); // roll moment about the roll axis
    return f;
}

Trajectory integrate(const VehicleState& initial, const VehicleParams& params,
                     const SteeringProfile& steering, const ForceCurve* collision,
                     const ForceApplication& app, double horizon, const SimOptions& options) {
    params.validate();
    VehicleParams eff = params;
    if (!options.tires_enabled) {
        eff.C = {0.0, 0.0, 0.0, 0.0};
        eff.f_r0 = eff.f_r1 = eff.f_r2 = 0.0;
    }
    const double out_dt = 1.0 / options.output_hz;
    const int n_out = static_cast<int>(std::round(horizon / out_dt));
    const int substeps = std::max(1, static_cast<int>(std::round(out_dt / options.substep_dt)));
    const double h = out_dt / substeps;

    Trajectory traj;
    traj.t.reserve(n_out + 1);
    traj.states.reserve(n_out + 1);

    VehicleState s = initial;
    traj.kinetic_energy_initial =
        0.5 * eff.m * (s.v_x * s.v_x + s.v_y * s.v_y) + 0.5 * eff.I_zz * s.psi_dot * s.psi_dot;

    auto collision_body = [&](double t, double psi) -> PlanarForce {
        if (!collision) return PlanarForce{};
        return body_force_from_ground(collision->at(t), psi, app, eff);
    };

    double t = 0.0;
    traj.t.push_back(t);
    traj.states.push_back(s);
    for (int k = 0; k < n_out; ++k) {
        for (int j = 0; j < substeps; ++j) {
            const double delta = steering ? steering(t) : 0.0;
            TireForces tf;
            const auto y0 = s.vec();
            const PlanarForce f0 = collision_body(t, s.psi);
            const auto k1 = state_derivative(s, eff, delta, f0, true, &tf);
            traj.friction_clamped = traj.friction_clamped || tf.friction_clamped;
            traj.wheel_liftoff = traj.wheel_liftoff || tf.wheel_liftoff;
            // refresh the cached specific accelerations from this evaluation
            s.a_x = k1(0) - s.v_y * s.psi_dot;
            s.a_y = k1(1) + s.v_x * s.psi_dot;

            Eigen::Matrix<double, 8, 1> y1;
            if (options.euler_baseline) {
                y1 = y0 + h * state_derivative(s, eff, delta, f0, true);
            } else {
                const auto d1 = state_derivative(s, eff, delta, f0, true);
                const VehicleState s2 = from_vec(y0 + 0.5 * h * d1, s.a_x, s.a_y);
                const auto d2 =
                    state_derivative(s2, eff, delta, collision_body(t + 0.5 * h, s2.psi), true);
                const VehicleState s3 = from_vec(y0 + 0.5 * h * d2, s.a_x, s.a_y);
                const auto d3 =
                    state_derivative(s3, eff, delta, collision_body(t + 0.5 * h, s3.psi), true);
                const VehicleState s4 = from_vec(y0 + h * d3, s.a_x, s.a_y);
                const auto d4 =
                    state_derivative(s4, eff, delta, collision_body(t + h, s4.psi), true);
                y1 = y0 + (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
            }

            if (collision)
                traj.applied_impulse +=
                    0.5 * h * (collision->at(t) + collision->at(t + h));

            s = from_vec(y1, s.a_x, s.a_y);
            if (!options.tires_enabled) {
                // tires disabled mode is handled by zeroed eff upstream
            }
            t += h;
            if (std::hypot(s.v_x, s.v_y) > options.v_guard ||
                std::abs(s.psi_dot) > options.yaw_rate_guard || !std::isfinite(s.v_x) ||
                !std::isfinite(s.v_y) || !std::isfinite(s.psi_dot))
                throw IntegrationDiverged("integrate: state exceeded guard bounds");
        }
        traj.t.push_back(k * out_dt + out_dt);
        traj.states.push_back(s);
    }
    traj.kinetic_energy_final =
        0.5 * eff.m * (s.v_x * s.v_x + s.v_y * s.v_y) + 0.5 * eff.I_zz * s.psi_dot * s.psi_dot;
    return traj;
}

} // namespace pitdyn
