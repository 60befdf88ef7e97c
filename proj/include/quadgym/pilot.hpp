#pragma once

// Scripted pilot built from the same cascade as the environment's controller.
//
// It runs the loops above the configured mode's entry point on its own
// controller state and emits the result as a raw action, so the environment
// executes the remaining loops. With mode PY it simply commands the target.

#include "quadgym/config.hpp"
#include "quadgym/control.hpp"
#include "quadgym/vec_env.hpp"

#include <vector>

namespace quadgym {

class CascadePilot {
public:
    explicit CascadePilot(const EnvConfig& cfg, double feedforward_lead = 0.0)
        : cfg_(cfg), lead_(feedforward_lead) {}

    void reset() { ctrl_.reset(); }

    /// `lead` shifts the velocity feed-forward ahead in time to cover the
    /// lag of the inner loops.
    std::vector<double> act(const QuadState& s, const TaskGuidance& target) {
        const auto& g = cfg_.controller;
        const auto& p = cfg_.vehicle;
        const double dt = cfg_.dt;
        const double yaw = target.yaw;
        Command c{cfg_.mode, {}};
        if (cfg_.mode == ControlMode::PY) {
            c.data = {target.position.x(), target.position.y(), target.position.z(), yaw, 0.0};
            return unsquash_command(c, cfg_);
        }
        const Vec3 p_sp = target.position + lead_ * target.velocity;
        const Vec3 v_sp = clamp_components(target.velocity + g.pos_p.cwiseProduct(p_sp - s.position), g.max_vel);
        if (cfg_.mode == ControlMode::LV) {
            c.data = {v_sp.x(), v_sp.y(), v_sp.z(), yaw, 0.0};
            return unsquash_command(c, cfg_);
        }
        const AttitudeSetpoint att = velocity_loop(v_sp, s.velocity, yaw, ctrl_, g, p, dt);
        if (cfg_.mode == ControlMode::CTA) {
            c.data = {att.thrust, att.attitude.w, att.attitude.x, att.attitude.y, att.attitude.z};
            return unsquash_command(c, cfg_);
        }
        const Vec3 omega_sp = attitude_loop(s.attitude, att.attitude, g);
        if (cfg_.mode == ControlMode::CTBR) {
            c.data = {att.thrust, omega_sp.x(), omega_sp.y(), omega_sp.z(), 0.0};
            return unsquash_command(c, cfg_);
        }
        const Vec3 tau = rate_loop(s.body_rate, omega_sp, ctrl_, g, dt);
        const ActuatorCommand out = mixer(att.thrust, tau, p, g);
        c.data = {out.throttle[0], out.throttle[1], out.throttle[2], out.throttle[3], 0.0};
        return unsquash_command(c, cfg_);
    }

private:
    EnvConfig cfg_;
    double lead_ = 0.0;
    ControllerState ctrl_;
};

/// One pilot per environment, reset alongside its environment.
class PilotBank {
public:
    PilotBank(const EnvConfig& cfg, double lead = 0.0) : pilots_(cfg.n_envs, CascadePilot(cfg, lead)) {}

    std::vector<double> actions(const VecEnv& env) {
        std::vector<double> out;
        out.reserve(env.num_envs() * env.act_dim());
        for (std::size_t i = 0; i < env.num_envs(); ++i) {
            const auto a = pilots_[i].act(env.state(i), env.guidance(i));
            out.insert(out.end(), a.begin(), a.end());
        }
        return out;
    }

    void on_step(const StepResult& r) {
        for (std::size_t i = 0; i < pilots_.size(); ++i)
            if (r.done[i]) pilots_[i].reset();
    }

private:
    std::vector<CascadePilot> pilots_;
};

}  // namespace quadgym
