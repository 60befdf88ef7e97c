#pragma once

// Rigid-body quadrotor model.
//
//   dp/dt = v
//   dq/dt = 1/2 q ⊗ (0, ω)
//   dv/dt = (R(q) f + F_ext - D v) / m + g
//   dω/dt = J⁻¹ (τ + τ_ext - ω × J ω)
//   dΩ/dt = T_m (Ω_cmd - Ω)
//
// Each rotor produces thrust (0, 0, c_l Ω²) and reaction torque
// (0, 0, σ c_d Ω²) at its mount point r_P. Integration is classical RK4 at
// a fixed step with quaternion renormalization and rotor-speed clamping after
// every step.

#include "quadgym/math.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace quadgym {

using Rotor4 = std::array<double, 4>;

struct QuadParams {
    double mass = 0.4;                  ///< kg
    Vec3 inertia{2.2e-3, 2.2e-3, 4.0e-3};  ///< kg·m², diagonal
    double c_l = 4.0e-7;                ///< N·s²/rad²
    double c_d = 6.0e-9;                ///< N·m·s²/rad²
    std::array<Vec3, 4> rotor_pos{};    ///< body frame, m
    Rotor4 spin_sign{1.0, 1.0, -1.0, -1.0};
    double motor_gain = 40.0;           ///< T_m, 1/s
    double omega_max = 0.0;             ///< rad/s
    double f_rotor_max = 3.0;           ///< N per rotor at full throttle
    Vec3 gravity{0.0, 0.0, -9.81};
    Vec3 linear_drag{0.0, 0.0, 0.0};    ///< diagonal D, N·s/m

    /// X layout for a given diagonal (motor-to-motor) distance.
    /// Rotor order: front-right, rear-left (CCW), front-left, rear-right (CW).
    static std::array<Vec3, 4> x_layout(double diagonal) {
        const double a = 0.5 * diagonal / std::sqrt(2.0);
        return {Vec3{a, -a, 0.0}, Vec3{-a, a, 0.0}, Vec3{a, a, 0.0}, Vec3{-a, -a, 0.0}};
    }

    static QuadParams defaults();

    void validate() const;
};

inline double hover_speed(const QuadParams& params) {
    return std::sqrt(params.mass * params.gravity.norm() / (4.0 * params.c_l));
}

inline QuadParams QuadParams::defaults() {
    QuadParams p;
    p.rotor_pos = x_layout(0.152);
    p.omega_max = 3.0 * hover_speed(p);
    return p;
}

inline void QuadParams::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("QuadParams: " + what); };
    if (!(mass > 0.0)) fail("mass must be positive");
    if (!(inertia.minCoeff() > 0.0)) fail("inertia components must be positive");
    if (!(c_l > 0.0)) fail("c_l must be positive");
    if (!(c_d >= 0.0)) fail("c_d must be non-negative");
    if (!(motor_gain > 0.0)) fail("motor gain must be positive");
    if (!(omega_max > 0.0)) fail("omega_max must be positive");
    if (!(f_rotor_max > 0.0)) fail("f_rotor_max must be positive");
    int plus = 0, minus = 0;
    for (double s : spin_sign) {
        if (s == 1.0) ++plus;
        else if (s == -1.0) ++minus;
        else fail("spin signs must be +1 or -1");
    }
    if (plus != 2 || minus != 2) fail("need exactly two rotors of each spin direction");
    if (!gravity.allFinite() || !linear_drag.allFinite()) fail("non-finite gravity or drag");
}

struct QuadState {
    Vec3 position = Vec3::Zero();
    Quat attitude = Quat::identity();
    Vec3 velocity = Vec3::Zero();
    Vec3 body_rate = Vec3::Zero();
    Rotor4 rotor_speed{0.0, 0.0, 0.0, 0.0};

    bool finite() const {
        if (!position.allFinite() || !velocity.allFinite() || !body_rate.allFinite()) return false;
        if (!std::isfinite(attitude.w) || !std::isfinite(attitude.x) || !std::isfinite(attitude.y) ||
            !std::isfinite(attitude.z))
            return false;
        for (double o : rotor_speed)
            if (!std::isfinite(o)) return false;
        return true;
    }
};

struct ExternalWrench {
    Vec3 force_world = Vec3::Zero();
    Vec3 torque_body = Vec3::Zero();
};

struct StateDerivative {
    Vec3 dp = Vec3::Zero();
    Quat dq{0.0, 0.0, 0.0, 0.0};
    Vec3 dv = Vec3::Zero();
    Vec3 domega = Vec3::Zero();
    Rotor4 drotor{0.0, 0.0, 0.0, 0.0};
};

struct Wrench {
    Vec3 force = Vec3::Zero();
    Vec3 torque = Vec3::Zero();
};

class SimulationDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Collective body-frame force and torque from the four rotor speeds.
inline Wrench rotor_wrench(const Rotor4& omega, const QuadParams& params) {
    Wrench w;
    for (std::size_t i = 0; i < 4; ++i) {
        const double o2 = omega[i] * omega[i];
        const Vec3 f{0.0, 0.0, params.c_l * o2};
        w.force += f;
        w.torque += Vec3{0.0, 0.0, params.spin_sign[i] * params.c_d * o2} + params.rotor_pos[i].cross(f);
    }
    return w;
}

inline StateDerivative derivative(const QuadState& s, const Rotor4& omega_cmd, const QuadParams& params,
                                  const ExternalWrench& ext) {
    const Wrench w = rotor_wrench(s.rotor_speed, params);
    StateDerivative d;
    d.dp = s.velocity;
    d.dq = 0.5 * quat_mul(s.attitude, Quat{0.0, s.body_rate.x(), s.body_rate.y(), s.body_rate.z()});
    const Vec3 drag = params.linear_drag.cwiseProduct(s.velocity);
    d.dv = (rotate_vec(s.attitude, w.force) + ext.force_world - drag) / params.mass + params.gravity;
    const Vec3 jw = params.inertia.cwiseProduct(s.body_rate);
    d.domega = (w.torque + ext.torque_body - s.body_rate.cross(jw)).cwiseQuotient(params.inertia);
    for (std::size_t i = 0; i < 4; ++i) d.drotor[i] = params.motor_gain * (omega_cmd[i] - s.rotor_speed[i]);
    return d;
}

namespace detail {
inline QuadState advance(const QuadState& s, const StateDerivative& d, double h) {
    QuadState out;
    out.position = s.position + h * d.dp;
    out.attitude = s.attitude + h * d.dq;
    out.velocity = s.velocity + h * d.dv;
    out.body_rate = s.body_rate + h * d.domega;
    for (std::size_t i = 0; i < 4; ++i) out.rotor_speed[i] = s.rotor_speed[i] + h * d.drotor[i];
    return out;
}
}  // namespace detail

/// One RK4 step. Throws SimulationDiverged if the result is not finite.
inline QuadState step(const QuadState& s, const Rotor4& omega_cmd, const QuadParams& params,
                      const ExternalWrench& ext, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
    const StateDerivative k1 = derivative(s, omega_cmd, params, ext);
    const StateDerivative k2 = derivative(detail::advance(s, k1, 0.5 * dt), omega_cmd, params, ext);
    const StateDerivative k3 = derivative(detail::advance(s, k2, 0.5 * dt), omega_cmd, params, ext);
    const StateDerivative k4 = derivative(detail::advance(s, k3, dt), omega_cmd, params, ext);

    const double h6 = dt / 6.0;
    QuadState out;
    out.position = s.position + h6 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
    out.attitude = s.attitude + h6 * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq);
    out.velocity = s.velocity + h6 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
    out.body_rate = s.body_rate + h6 * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega);
    for (std::size_t i = 0; i < 4; ++i) {
        const double o = s.rotor_speed[i] + h6 * (k1.drotor[i] + 2.0 * k2.drotor[i] + 2.0 * k3.drotor[i] + k4.drotor[i]);
        out.rotor_speed[i] = std::clamp(o, 0.0, params.omega_max);
    }
    if (!out.finite() || !(out.attitude.norm() > 0.0)) throw SimulationDiverged("quadrotor state is no longer finite");
    out.attitude = out.attitude.normalized();
    return out;
}

}  // namespace quadgym
