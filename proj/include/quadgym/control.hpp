#pragma once

// Cascade flight controller in the PX4 mould.
//
//   position (P) -> velocity (PID) -> attitude (quaternion P) -> rate (PID) -> mixer
//
// Each control mode enters the cascade at a different level and runs only
// the loops below its entry point:
//
//   PY   (p_sp, yaw)      all four loops
//   LV   (v_sp, yaw)      velocity, attitude, rate, mixer
//   CTA  (T, q_sp)        attitude, rate, mixer
//   CTBR (T, ω_sp)        rate, mixer
//   SRT  (u0..u3)         throttle pass-through
//
// Rotor thrust is linear in the normalized throttle: f_i = u_i · f_rotor_max,
// so the hover throttle is m·g / (4 · f_rotor_max).

#include "quadgym/dynamics.hpp"
#include "quadgym/math.hpp"
#include "quadgym/parallel.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace quadgym {

enum class ControlMode { PY, LV, CTA, CTBR, SRT };

inline constexpr std::string_view to_string(ControlMode m) {
    switch (m) {
        case ControlMode::PY: return "PY";
        case ControlMode::LV: return "LV";
        case ControlMode::CTA: return "CTA";
        case ControlMode::CTBR: return "CTBR";
        case ControlMode::SRT: return "SRT";
    }
    return "?";
}

inline ControlMode control_mode_from_string(std::string_view s) {
    for (ControlMode m : {ControlMode::PY, ControlMode::LV, ControlMode::CTA, ControlMode::CTBR, ControlMode::SRT})
        if (to_string(m) == s) return m;
    throw std::invalid_argument("unknown control mode: " + std::string(s));
}

inline constexpr std::size_t command_dim(ControlMode m) { return m == ControlMode::CTA ? 5 : 4; }

class RejectedCommand : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ControllerGains {
    Vec3 pos_p{3.0, 3.0, 2.0};
    Vec3 vel_p{8.0, 8.0, 5.0};
    Vec3 vel_i{0.4, 0.4, 0.5};
    Vec3 vel_d{0.05, 0.05, 0.0};
    Vec3 vel_int_limit{1.0, 1.0, 1.0};  ///< m/s², bound on the integral contribution
    Vec3 att_p{12.0, 12.0, 4.0};
    Vec3 rate_p{0.05, 0.05, 0.03};
    Vec3 rate_i{0.02, 0.02, 0.02};
    Vec3 rate_d{0.0008, 0.0008, 0.0};
    Vec3 rate_int_limit{0.01, 0.01, 0.01};  ///< N·m

    double max_tilt = 0.61;  ///< rad
    double max_vel = 3.0;    ///< m/s, per axis
    double max_rate = 6.0;   ///< rad/s, per axis
    double thrust_min = 0.05;  ///< normalized collective
    double thrust_max = 0.95;
    double hover_throttle = 0.327;

    void validate() const;
};

inline void ControllerGains::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("ControllerGains: " + what); };
    for (const Vec3* g : {&pos_p, &vel_p, &vel_i, &vel_d, &vel_int_limit, &att_p, &rate_p, &rate_i, &rate_d,
                          &rate_int_limit})
        if (!g->allFinite() || g->minCoeff() < 0.0) fail("gains must be finite and non-negative");
    if (!(max_tilt > 0.0 && max_vel > 0.0 && max_rate > 0.0)) fail("limits must be positive");
    if (!(thrust_min >= 0.0 && thrust_min < thrust_max && thrust_max <= 1.0)) fail("bad thrust limits");
    if (!(hover_throttle > 0.0 && hover_throttle < 1.0)) fail("hover throttle must lie in (0, 1)");
}

/// Exact hover throttle under the linear thrust map.
inline double hover_throttle(const QuadParams& params) {
    return params.mass * params.gravity.norm() / (4.0 * params.f_rotor_max);
}

struct ControllerState {
    Vec3 vel_integral = Vec3::Zero();
    Vec3 vel_prev_error = Vec3::Zero();
    bool vel_has_prev = false;
    Vec3 rate_integral = Vec3::Zero();
    Vec3 rate_prev_error = Vec3::Zero();
    bool rate_has_prev = false;
    Quat last_attitude_sp = Quat::identity();
    bool degenerate_setpoint = false;

    void reset() { *this = ControllerState{}; }
};

struct Command {
    ControlMode mode = ControlMode::SRT;
    std::array<double, 5> data{};

    static Command make(ControlMode mode, std::span<const double> values) {
        if (values.size() != command_dim(mode))
            throw RejectedCommand("command for mode " + std::string(to_string(mode)) + " needs " +
                                  std::to_string(command_dim(mode)) + " values, got " +
                                  std::to_string(values.size()));
        Command c{mode, {}};
        std::copy(values.begin(), values.end(), c.data.begin());
        return c;
    }

    std::span<const double> values() const { return {data.data(), command_dim(mode)}; }
};

struct ActuatorCommand {
    Rotor4 throttle{0.0, 0.0, 0.0, 0.0};
    Rotor4 omega_cmd{0.0, 0.0, 0.0, 0.0};
    bool saturated = false;
};

inline Vec3 position_loop(const Vec3& position_error, const ControllerGains& gains) {
    return clamp_components(gains.pos_p.cwiseProduct(position_error), gains.max_vel);
}

struct AttitudeSetpoint {
    double thrust = 0.0;  ///< collective, N
    Quat attitude = Quat::identity();
    bool degenerate = false;
};

/// Attitude whose body z axis is `z_body` and whose heading is `yaw`.
inline Quat attitude_from_thrust_dir(const Vec3& z_body, double yaw) {
    const Vec3 x_course{std::cos(yaw), std::sin(yaw), 0.0};
    Vec3 y_body = z_body.cross(x_course);
    if (y_body.norm() < 1e-9) y_body = z_body.cross(Vec3{-std::sin(yaw), std::cos(yaw), 0.0}).cross(z_body);
    y_body.normalize();
    const Vec3 x_body = y_body.cross(z_body);
    Mat3 r;
    r.col(0) = x_body;
    r.col(1) = y_body;
    r.col(2) = z_body;
    return quat_from_rot(r);
}

inline Vec3 limit_tilt(const Vec3& z_des, double max_tilt) {
    const Vec3 up{0.0, 0.0, 1.0};
    const double tilt = std::acos(std::clamp(z_des.z(), -1.0, 1.0));
    if (tilt <= max_tilt) return z_des;
    const Vec3 horizontal{z_des.x(), z_des.y(), 0.0};
    const double h = horizontal.norm();
    if (h < 1e-12) return up;
    return std::sin(max_tilt) * horizontal / h + std::cos(max_tilt) * up;
}

/// Velocity PID producing a collective thrust and attitude setpoint.
/// The collective is scaled through the configured hover throttle, so a
/// mis-estimated hover throttle shows up as vertical steady-state error that
/// the integrator has to absorb.
inline AttitudeSetpoint velocity_loop(const Vec3& v_sp, const Vec3& v, double yaw_sp, ControllerState& cs,
                                      const ControllerGains& gains, const QuadParams& params, double dt) {
    const Vec3 err = v_sp - v;
    cs.vel_integral = (cs.vel_integral + dt * gains.vel_i.cwiseProduct(err))
                          .cwiseMax(-gains.vel_int_limit)
                          .cwiseMin(gains.vel_int_limit);
    const Vec3 derr = cs.vel_has_prev ? Vec3((err - cs.vel_prev_error) / dt) : Vec3::Zero();
    cs.vel_prev_error = err;
    cs.vel_has_prev = true;

    const Vec3 acc_sp = gains.vel_p.cwiseProduct(err) + cs.vel_integral + gains.vel_d.cwiseProduct(derr);
    const Vec3 specific = acc_sp - params.gravity;
    const double g = params.gravity.norm();
    const double hover_collective = 4.0 * params.f_rotor_max * gains.hover_throttle;
    const double t_min = gains.thrust_min * 4.0 * params.f_rotor_max;
    const double t_max = gains.thrust_max * 4.0 * params.f_rotor_max;

    AttitudeSetpoint out;
    const double n = specific.norm();
    if (n * params.mass < 1e-6) {
        out.attitude = cs.last_attitude_sp;
        out.thrust = t_min;
        out.degenerate = true;
        cs.degenerate_setpoint = true;
        return out;
    }
    // Vertical priority: keep the vertical demand, trim the horizontal part
    // to the tilt limit.
    Vec3 f = specific;
    f.z() = std::max(f.z(), g * t_min / hover_collective);
    const double h = std::hypot(f.x(), f.y());
    const double h_max = f.z() * std::tan(gains.max_tilt);
    if (h > h_max) {
        f.x() *= h_max / h;
        f.y() *= h_max / h;
    }
    const Vec3 z_des = limit_tilt(f.normalized(), gains.max_tilt);
    out.attitude = attitude_from_thrust_dir(z_des, yaw_sp);
    out.thrust = std::clamp(f.norm() / g * hover_collective, t_min, t_max);
    cs.last_attitude_sp = out.attitude;
    cs.degenerate_setpoint = false;
    return out;
}

/// Shortest-path quaternion attitude error mapped to body-rate setpoints.
inline Vec3 attitude_loop(const Quat& q, const Quat& q_sp, const ControllerGains& gains) {
    const Quat e = quat_mul(q.conjugate(), q_sp);
    const double sign = e.w < 0.0 ? -1.0 : 1.0;
    return clamp_components(2.0 * sign * gains.att_p.cwiseProduct(e.vec()), gains.max_rate);
}

/// Rate PID with clamped integrator.
inline Vec3 rate_loop(const Vec3& omega, const Vec3& omega_sp, ControllerState& cs, const ControllerGains& gains,
                      double dt) {
    const Vec3 err = omega_sp - omega;
    cs.rate_integral = (cs.rate_integral + dt * gains.rate_i.cwiseProduct(err))
                           .cwiseMax(-gains.rate_int_limit)
                           .cwiseMin(gains.rate_int_limit);
    const Vec3 derr = cs.rate_has_prev ? Vec3((err - cs.rate_prev_error) / dt) : Vec3::Zero();
    cs.rate_prev_error = err;
    cs.rate_has_prev = true;
    return gains.rate_p.cwiseProduct(err) + cs.rate_integral + gains.rate_d.cwiseProduct(derr);
}

/// Rows: collective thrust, τx, τy, τz; columns: per-rotor thrust.
inline Eigen::Matrix4d allocation_matrix(const QuadParams& params) {
    Eigen::Matrix4d a;
    const double kappa = params.c_d / params.c_l;
    for (int i = 0; i < 4; ++i) {
        const Vec3& r = params.rotor_pos[static_cast<std::size_t>(i)];
        a(0, i) = 1.0;
        a(1, i) = r.y();
        a(2, i) = -r.x();
        a(3, i) = params.spin_sign[static_cast<std::size_t>(i)] * kappa;
    }
    return a;
}

inline ActuatorCommand throttle_to_actuator(const Rotor4& throttle, const QuadParams& params) {
    ActuatorCommand out;
    for (std::size_t i = 0; i < 4; ++i) {
        const double u = std::isfinite(throttle[i]) ? std::clamp(throttle[i], 0.0, 1.0) : 0.0;
        out.throttle[i] = u;
        out.omega_cmd[i] = std::min(std::sqrt(u * params.f_rotor_max / params.c_l), params.omega_max);
        if (u != throttle[i]) out.saturated = true;
    }
    return out;
}

namespace detail {
// Largest s in [0, 1] keeping base + s·dir inside [0, hi] on every rotor.
inline double feasible_scale(const Eigen::Vector4d& base, const Eigen::Vector4d& dir, double hi) {
    double s = 1.0;
    for (int i = 0; i < 4; ++i) {
        const double v = base(i) + dir(i);
        if (v > hi && dir(i) > 0.0) s = std::min(s, (hi - base(i)) / dir(i));
        if (v < 0.0 && dir(i) < 0.0) s = std::min(s, -base(i) / dir(i));
    }
    return std::max(s, 0.0);
}
}  // namespace detail

/// Thrust-priority allocation. When a rotor would saturate, yaw torque is
/// reduced first, then roll/pitch torque; collective thrust is kept.
inline ActuatorCommand mixer(double thrust, const Vec3& torque, const QuadParams& params,
                             const ControllerGains& gains) {
    const Eigen::Matrix4d inv = allocation_matrix(params).inverse();
    const double f_max = params.f_rotor_max;
    const double collective = std::clamp(thrust, gains.thrust_min * 4.0 * f_max, gains.thrust_max * 4.0 * f_max);
    bool saturated = collective != thrust;

    const Eigen::Vector4d base = inv * Eigen::Vector4d(collective, 0.0, 0.0, 0.0);
    const Eigen::Vector4d roll_pitch = inv * Eigen::Vector4d(0.0, torque.x(), torque.y(), 0.0);
    const Eigen::Vector4d yaw = inv * Eigen::Vector4d(0.0, 0.0, 0.0, torque.z());

    Eigen::Vector4d f = base + roll_pitch + yaw;
    if ((f.array() < 0.0).any() || (f.array() > f_max).any()) {
        saturated = true;
        const double s_rp = detail::feasible_scale(base, roll_pitch, f_max);
        if (s_rp >= 1.0) {
            f = base + roll_pitch + detail::feasible_scale(base + roll_pitch, yaw, f_max) * yaw;
        } else {
            f = base + s_rp * roll_pitch;
        }
    }

    Rotor4 u{};
    for (std::size_t i = 0; i < 4; ++i) u[i] = f(static_cast<int>(i)) / f_max;
    ActuatorCommand out = throttle_to_actuator(u, params);
    out.saturated = out.saturated || saturated;
    return out;
}

/// Runs the cascade below the command's entry level.
inline ActuatorCommand update(const Command& cmd, const QuadState& s, ControllerState& cs,
                              const ControllerGains& gains, const QuadParams& params, double dt) {
    const auto& d = cmd.data;
    switch (cmd.mode) {
        case ControlMode::SRT:
            return throttle_to_actuator({d[0], d[1], d[2], d[3]}, params);
        case ControlMode::CTBR: {
            const Vec3 tau = rate_loop(s.body_rate, Vec3{d[1], d[2], d[3]}, cs, gains, dt);
            return mixer(d[0], tau, params, gains);
        }
        case ControlMode::CTA: {
            const Quat q_raw{d[1], d[2], d[3], d[4]};
            const double n = q_raw.norm();
            if (!(n > 1e-9) || !std::isfinite(n)) throw RejectedCommand("CTA attitude quaternion has zero norm");
            const Vec3 omega_sp = attitude_loop(s.attitude, q_raw.normalized(), gains);
            const Vec3 tau = rate_loop(s.body_rate, omega_sp, cs, gains, dt);
            return mixer(d[0], tau, params, gains);
        }
        case ControlMode::LV:
        case ControlMode::PY: {
            const Vec3 v_sp = cmd.mode == ControlMode::LV
                                  ? Vec3{d[0], d[1], d[2]}
                                  : position_loop(Vec3{d[0], d[1], d[2]} - s.position, gains);
            const AttitudeSetpoint att = velocity_loop(v_sp, s.velocity, d[3], cs, gains, params, dt);
            const Vec3 omega_sp = attitude_loop(s.attitude, att.attitude, gains);
            const Vec3 tau = rate_loop(s.body_rate, omega_sp, cs, gains, dt);
            return mixer(att.thrust, tau, params, gains);
        }
    }
    throw RejectedCommand("unknown control mode");
}

inline ActuatorCommand update(ControlMode mode, std::span<const double> values, const QuadState& s,
                              ControllerState& cs, const ControllerGains& gains, const QuadParams& params,
                              double dt) {
    return update(Command::make(mode, values), s, cs, gains, params, dt);
}

/// Elementwise update over a batch of vehicles. Vehicles share nothing, so
/// the result does not depend on `workers`.
inline void update_batch(std::span<const Command> cmds, std::span<const QuadState> states,
                         std::span<ControllerState> cstates, const ControllerGains& gains,
                         const QuadParams& params, double dt, std::span<ActuatorCommand> out,
                         std::size_t workers = 1) {
    if (states.size() != cmds.size() || cstates.size() != cmds.size() || out.size() != cmds.size())
        throw std::invalid_argument("update_batch: batch sizes differ");
    parallel_for(cmds.size(), workers,
                 [&](std::size_t i) { out[i] = update(cmds[i], states[i], cstates[i], gains, params, dt); });
}

}  // namespace quadgym
