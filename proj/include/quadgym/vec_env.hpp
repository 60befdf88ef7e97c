#pragma once

// Batched environment manager.
//
// Each environment owns its vehicle, controller state, scene and random
// streams. Streams are keyed by (seed, env id, episode index), so results do
// not depend on worker count or on the order environments are processed.
// Environments that finish an episode are reset inside `step`; the returned
// observation is then the first observation of the new episode and the
// terminal one is kept in `info`.

#include "quadgym/config.hpp"
#include "quadgym/control.hpp"
#include "quadgym/dynamics.hpp"
#include "quadgym/frames.hpp"
#include "quadgym/parallel.hpp"
#include "quadgym/rng.hpp"
#include "quadgym/tasks.hpp"
#include "quadgym/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace quadgym {

/// Where the task currently wants the vehicle; used by scripted pilots and
/// for tracking metrics.
struct TaskGuidance {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    double yaw = 0.0;
};

struct StepInfo {
    EpisodeOutcome outcome = EpisodeOutcome::Running;
    RewardBreakdown reward;
    std::size_t step = 0;         ///< steps completed in the episode that produced this record
    std::uint64_t episode = 0;
    double time = 0.0;            ///< simulated time of the record, s
    QuadState state;              ///< vehicle state the reward was computed on
    TaskGuidance guidance;        ///< task target at the same instant
    Observation terminal_obs;     ///< set only when the episode ended
};

struct StepResult {
    std::size_t obs_dim = 0;
    std::vector<double> obs;      ///< n_envs × obs_dim, row-major
    std::vector<double> reward;
    std::vector<std::uint8_t> done;
    std::vector<StepInfo> info;

    std::span<const double> observation(std::size_t env) const { return {obs.data() + env * obs_dim, obs_dim}; }
};

// --- action squashing ---------------------------------------------------------------

/// Maps a raw action in [-1, 1]^act_dim onto a mode command.
inline Command squash_action(std::span<const double> a, const EnvConfig& cfg) {
    const ControlMode mode = cfg.mode;
    if (a.size() != command_dim(mode)) throw RejectedCommand("action has the wrong dimension for this mode");
    std::array<double, 5> x{};
    for (std::size_t i = 0; i < a.size(); ++i) x[i] = std::clamp(a[i], -1.0, 1.0);
    const double full = 4.0 * cfg.vehicle.f_rotor_max;
    const auto& g = cfg.controller;
    Command c{mode, {}};
    switch (mode) {
        case ControlMode::PY:
            c.data = {x[0] * cfg.py_position_range, x[1] * cfg.py_position_range, x[2] * cfg.py_position_range,
                      x[3] * std::numbers::pi, 0.0};
            break;
        case ControlMode::LV:
            c.data = {x[0] * g.max_vel, x[1] * g.max_vel, x[2] * g.max_vel, x[3] * std::numbers::pi, 0.0};
            break;
        case ControlMode::CTA:
            c.data = {0.5 * (x[0] + 1.0) * full, x[1], x[2], x[3], x[4]};
            break;
        case ControlMode::CTBR:
            c.data = {0.5 * (x[0] + 1.0) * full, x[1] * g.max_rate, x[2] * g.max_rate, x[3] * g.max_rate, 0.0};
            break;
        case ControlMode::SRT:
            c.data = {0.5 * (x[0] + 1.0), 0.5 * (x[1] + 1.0), 0.5 * (x[2] + 1.0), 0.5 * (x[3] + 1.0), 0.0};
            break;
    }
    return c;
}

/// Inverse of squash_action for commands inside the mode limits.
inline std::vector<double> unsquash_command(const Command& c, const EnvConfig& cfg) {
    const double full = 4.0 * cfg.vehicle.f_rotor_max;
    const auto& g = cfg.controller;
    const auto& d = c.data;
    std::vector<double> a;
    switch (c.mode) {
        case ControlMode::PY:
            a = {d[0] / cfg.py_position_range, d[1] / cfg.py_position_range, d[2] / cfg.py_position_range,
                 wrap_pi(d[3]) / std::numbers::pi};
            break;
        case ControlMode::LV:
            a = {d[0] / g.max_vel, d[1] / g.max_vel, d[2] / g.max_vel, wrap_pi(d[3]) / std::numbers::pi};
            break;
        case ControlMode::CTA: {
            const Quat q = Quat{d[1], d[2], d[3], d[4]}.normalized();
            const Quat qp = q.w < 0.0 ? -q : q;
            a = {2.0 * d[0] / full - 1.0, qp.w, qp.x, qp.y, qp.z};
            break;
        }
        case ControlMode::CTBR:
            a = {2.0 * d[0] / full - 1.0, d[1] / g.max_rate, d[2] / g.max_rate, d[3] / g.max_rate};
            break;
        case ControlMode::SRT:
            a = {2.0 * d[0] - 1.0, 2.0 * d[1] - 1.0, 2.0 * d[2] - 1.0, 2.0 * d[3] - 1.0};
            break;
    }
    for (double& v : a) v = std::clamp(v, -1.0, 1.0);
    return a;
}

// --- environment manager ------------------------------------------------------------

class VecEnv {
public:
    explicit VecEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        cfg_.task_params.termination.max_steps = cfg_.max_episode_steps;
        track_rate_ = lemniscate_rate_for_speed(cfg_.task_params.track_speed);
        envs_.resize(cfg_.n_envs);
        seed(cfg_.seed);
    }

    const EnvConfig& config() const { return cfg_; }
    std::size_t num_envs() const { return cfg_.n_envs; }
    std::size_t obs_dim() const { return cfg_.observation_dim(); }
    std::size_t act_dim() const { return cfg_.act_dim(); }
    double track_rate() const { return track_rate_; }

    /// Re-keys every stream and restarts the episode counters. Call reset()
    /// afterwards.
    void seed(std::uint64_t master) {
        cfg_.seed = master;
        for (auto& e : envs_) e.episode = 0;
        started_ = false;
    }

    std::vector<double> reset() {
        std::vector<std::size_t> ids(cfg_.n_envs);
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
        return reset(ids);
    }

    /// Resets the listed environments and returns their observations in the
    /// same order, row-major.
    std::vector<double> reset(std::span<const std::size_t> ids) {
        for (std::size_t id : ids)
            if (id >= cfg_.n_envs) throw std::out_of_range("reset: env id out of range");
        parallel_for(ids.size(), cfg_.workers, [&](std::size_t k) { reset_env(ids[k]); });
        std::vector<double> out;
        out.reserve(ids.size() * obs_dim());
        for (std::size_t id : ids) {
            const Observation o = observe(id);
            out.insert(out.end(), o.begin(), o.end());
        }
        started_ = true;
        return out;
    }

    StepResult step(std::span<const double> actions) {
        const std::size_t n = cfg_.n_envs, ad = act_dim();
        if (actions.size() != n * ad) throw std::invalid_argument("step: action batch has the wrong shape");
        if (!started_) reset();
        StepResult res;
        res.obs_dim = obs_dim();
        res.obs.resize(n * res.obs_dim);
        res.reward.resize(n);
        res.done.resize(n);
        res.info.resize(n);
        parallel_for(n, cfg_.workers, [&](std::size_t i) {
            StepInfo& info = res.info[i];
            step_env(i, actions.subspan(i * ad, ad), info);
            res.reward[i] = info.reward.total;
            res.done[i] = is_terminal(info.outcome) ? 1 : 0;
            if (res.done[i]) {
                info.terminal_obs = observe(i);
                reset_env(i);
            }
            const Observation o = observe(i);
            std::copy(o.begin(), o.end(), res.obs.begin() + static_cast<std::ptrdiff_t>(i * res.obs_dim));
        });
        return res;
    }

    const QuadState& state(std::size_t i) const { return envs_.at(i).state; }
    std::size_t episode_step(std::size_t i) const { return envs_.at(i).step; }
    std::uint64_t episode_index(std::size_t i) const { return envs_.at(i).episode; }
    double sim_time(std::size_t i) const { return envs_.at(i).time; }
    const Scene& scene(std::size_t i) const { return envs_.at(i).scene; }
    const DepthImage& depth(std::size_t i) const { return envs_.at(i).depth; }
    double playback_offset(std::size_t i) const { return envs_.at(i).playback_offset; }
    const Vec3& wind(std::size_t i) const { return envs_.at(i).wind; }

    /// Reference time for tracking (lagged by the per-episode offset).
    double reference_time(std::size_t i) const {
        const Env& e = envs_.at(i);
        return trajectory_playback(e.time, e.playback_offset);
    }

    TaskGuidance guidance(std::size_t i) const {
        const Env& e = envs_.at(i);
        const auto& tp = cfg_.task_params;
        switch (cfg_.task) {
            case TaskKind::Hovering: return {tp.hover_target, Vec3::Zero(), tp.hover_yaw};
            case TaskKind::Tracking: {
                const double t = reference_time(i);
                return {lemniscate(t, track_rate_), lemniscate_velocity(t, track_rate_), 0.0};
            }
            case TaskKind::TargetHitting: return {e.target, Vec3::Zero(), 0.0};
            case TaskKind::Avoidance: return {e.pose_target.position, Vec3::Zero(), e.pose_target.yaw};
            case TaskKind::Planning: {
                const Vec3 d = e.target - e.state.position;
                return {e.target, Vec3::Zero(), std::atan2(d.y(), d.x())};
            }
        }
        return {};
    }

    Observation observe(std::size_t i) const {
        const Env& e = envs_.at(i);
        switch (cfg_.task) {
            case TaskKind::Hovering:
                return obs_hover(e.state, {cfg_.task_params.hover_target, Vec3::Zero(), Vec3::Zero()});
            case TaskKind::TargetHitting: return obs_hover(e.state, {e.target, Vec3::Zero(), Vec3::Zero()});
            case TaskKind::Tracking: {
                const double k = track_rate_;
                return obs_track(e.state, ref_window([k](double t) { return lemniscate(t, k); }, reference_time(i),
                                                     cfg_.task_params.ref_spacing));
            }
            case TaskKind::Avoidance: return obs_ego(e.state, e.pose_target.position, e.last_action, e.feature);
            case TaskKind::Planning: return obs_ego(e.state, e.target, e.last_action, e.feature);
        }
        return {};
    }

private:
    struct Env {
        QuadState state;
        ControllerState ctrl;
        std::size_t step = 0;
        std::uint64_t episode = 0;
        double time = 0.0;
        CounterRng step_rng;
        CounterRng sensor_rng;
        Vec3 wind = Vec3::Zero();
        double playback_offset = 0.0;
        Vec3 target = Vec3::Zero();
        PoseTarget pose_target;
        Scene scene;
        DepthImage depth;
        std::vector<double> feature = std::vector<double>(kDepthFeatureDim, 0.0);
        double x_esdf = 0.0;
        std::vector<double> last_action = std::vector<double>(4, 0.0);
    };

    bool uses_depth() const { return cfg_.task == TaskKind::Avoidance || cfg_.task == TaskKind::Planning; }

    void reset_env(std::size_t i) {
        Env& e = envs_[i];
        const auto& tp = cfg_.task_params;
        const auto& dr = cfg_.dr;
        const std::uint64_t ep = e.episode++;
        CounterRng rng(cfg_.seed, i, ep, StreamPurpose::Reset);
        e.step_rng = CounterRng(cfg_.seed, i, ep, StreamPurpose::Step);
        e.sensor_rng = CounterRng(cfg_.seed, i, ep, StreamPurpose::Sensor);
        e.ctrl.reset();
        e.step = 0;
        e.time = 0.0;
        e.scene = Scene{};
        e.last_action.assign(cfg_.act_dim(), 0.0);

        QuadState s;
        const double omega_h = hover_speed(cfg_.vehicle);
        s.rotor_speed = {omega_h, omega_h, omega_h, omega_h};

        auto perturb = [&](const Vec3& nominal) {
            Vec3 p = nominal;
            if (dr.init_cube_side > 0.0) {
                const double h = 0.5 * dr.init_cube_side;
                p += Vec3{rng.uniform(-h, h), rng.uniform(-h, h), rng.uniform(-h, h)};
            }
            return p;
        };

        switch (cfg_.task) {
            case TaskKind::Hovering:
                s.position = perturb(tp.hover_target);
                break;
            case TaskKind::Tracking:
                e.playback_offset = draw_playback_offset(rng, dr.temporal);
                s.position = lemniscate(trajectory_playback(0.0, e.playback_offset), track_rate_);
                break;
            case TaskKind::TargetHitting:
                s.position = tp.hit_start;
                e.target = spawn_balloon(rng, tp.balloon_min, tp.balloon_max);
                break;
            case TaskKind::Avoidance: {
                s.position = perturb(tp.avoid_start);
                e.pose_target = PoseTarget{tp.avoid_start, 0.0, 0.0, 0.0};
                const Projectile shot = spawn_projectile(rng, s.position, tp.projectile, cfg_.vehicle.gravity);
                const double r = tp.projectile.radius;
                Primitive body;
                if (rng.uniform(0.0, 1.0) < 0.5) body.shape = Sphere{shot.position, r};
                else body.shape = Box{shot.position, Vec3::Constant(r), rng.uniform(-std::numbers::pi, std::numbers::pi)};
                body.velocity = shot.velocity;
                body.ballistic = true;
                e.scene.primitives.push_back(body);
                break;
            }
            case TaskKind::Planning: {
                CounterRng scene_rng(cfg_.seed, i, ep, StreamPurpose::Scene);
                e.scene = scene_forest(scene_rng, tp.forest);
                s.position = tp.forest.start;
                e.target = tp.forest.goal;
                break;
            }
        }
        if (cfg_.task != TaskKind::Tracking) e.playback_offset = 0.0;
        if (cfg_.task != TaskKind::Tracking) {
            if (dr.init_attitude_sigma > 0.0) {
                const Vec3 rv{rng.normal(0.0, dr.init_attitude_sigma), rng.normal(0.0, dr.init_attitude_sigma),
                              rng.normal(0.0, dr.init_attitude_sigma)};
                if (rv.norm() > 0.0) s.attitude = Quat::from_axis_angle(rv, rv.norm());
            }
            if (dr.init_velocity_sigma > 0.0)
                s.velocity = {rng.normal(0.0, dr.init_velocity_sigma), rng.normal(0.0, dr.init_velocity_sigma),
                              rng.normal(0.0, dr.init_velocity_sigma)};
        }
        e.wind = Vec3{rng.normal(0.0, dr.wind_sigma), rng.normal(0.0, dr.wind_sigma), rng.normal(0.0, dr.wind_sigma)};
        e.state = s;
        refresh_depth(e);
    }

    void refresh_depth(Env& e) {
        if (!uses_depth()) return;
        const Pose cam = cfg_.camera.world_pose({e.state.position, e.state.attitude});
        DepthImage img = raycast(e.scene, cam, cfg_.camera);
        e.depth = dr_depth(img, e.sensor_rng, cfg_.dr.depth, cfg_.camera.near, cfg_.camera.max_range);
        e.feature = depth_feature_pool(e.depth.pixels, static_cast<std::size_t>(e.depth.height),
                                       static_cast<std::size_t>(e.depth.width), cfg_.camera.max_range,
                                       cfg_.feature_rows, cfg_.feature_cols);
        e.x_esdf = min_depth(e.depth);
    }

    void step_env(std::size_t i, std::span<const double> action, StepInfo& info) {
        Env& e = envs_[i];
        const QuadState before = e.state;
        const std::vector<double> prev_action = e.last_action;
        std::vector<double> act(action.begin(), action.end());

        bool failed = false;
        for (double v : act)
            if (!std::isfinite(v)) failed = true;

        ActuatorCommand actuator;
        if (!failed) {
            try {
                actuator = update(squash_action(act, cfg_), e.state, e.ctrl, cfg_.controller, cfg_.vehicle, cfg_.dt);
                ExternalWrench wrench;
                wrench.force_world = e.wind;
                if (cfg_.dr.wind_jitter_sigma > 0.0)
                    wrench.force_world += Vec3{e.step_rng.normal(0.0, cfg_.dr.wind_jitter_sigma),
                                               e.step_rng.normal(0.0, cfg_.dr.wind_jitter_sigma),
                                               e.step_rng.normal(0.0, cfg_.dr.wind_jitter_sigma)};
                e.state = quadgym::step(e.state, actuator.omega_cmd, cfg_.vehicle, wrench, cfg_.dt);
            } catch (const RejectedCommand&) {
                failed = true;
            } catch (const SimulationDiverged&) {
                failed = true;
                e.state = before;
            }
        }
        if (failed) act.assign(act.size(), 0.0);

        e.time += cfg_.dt;
        ++e.step;
        e.last_action = act;
        if (!e.scene.primitives.empty()) advance_scene(e.scene, cfg_.dt, cfg_.vehicle.gravity);
        if (uses_depth() && e.step % cfg_.sensor_decimation == 0) refresh_depth(e);

        TerminationInputs term;
        if (uses_depth()) term.x_esdf = e.x_esdf;
        if (cfg_.task == TaskKind::TargetHitting || cfg_.task == TaskKind::Planning) term.target = e.target;
        term.collided = !e.scene.primitives.empty() &&
                        scene_distance(e.scene, e.state.position) < cfg_.collision_radius;
        TerminationConfig tc = cfg_.task_params.termination;
        if (cfg_.task == TaskKind::Planning) tc.crash_depth = cfg_.reward_gains(TaskKind::Planning)[14];
        EpisodeOutcome outcome = failed ? EpisodeOutcome::Crashed : termination(e.state, cfg_.task, term, e.step, tc);

        ActionContext ctx;
        ctx.action = act;
        ctx.prev_action = prev_action;
        for (std::size_t k = 0; k < 4; ++k) ctx.omega_norm[k] = e.state.rotor_speed[k] / cfg_.vehicle.omega_max;
        if (cfg_.mode != ControlMode::PY && cfg_.mode != ControlMode::LV) {
            double sum = 0.0;
            for (double u : actuator.throttle) sum += u;
            ctx.throttle = 0.25 * sum;
        }
        const double hover = cfg_.controller.hover_throttle;
        const RewardGains& g = cfg_.reward_gains(cfg_.task);
        const auto& tp = cfg_.task_params;
        switch (cfg_.task) {
            case TaskKind::Hovering:
                info.reward = reward_hover(e.state, tp.hover_target, tp.hover_yaw, ctx, g, hover);
                break;
            case TaskKind::Tracking: {
                const Vec3 expected = lemniscate(reference_time(i), track_rate_);
                info.reward = reward_track(e.state, expected, 0.0, ctx, g, hover);
                break;
            }
            case TaskKind::TargetHitting:
                info.reward = reward_hit(e.state, before.position, e.target, 0.0, ctx, g, outcome == EpisodeOutcome::Hit);
                break;
            case TaskKind::Avoidance:
                info.reward = reward_avoid(e.state, e.pose_target, ctx, g, hover, outcome != EpisodeOutcome::Crashed);
                break;
            case TaskKind::Planning:
                info.reward = reward_plan(e.state, before.position, e.target, e.x_esdf, ctx, g, hover,
                                          outcome == EpisodeOutcome::GoalReached);
                break;
        }
        info.outcome = outcome;
        info.step = e.step;
        info.episode = e.episode - 1;
        info.time = e.time;
        info.state = e.state;
        info.guidance = guidance(i);
    }

    EnvConfig cfg_;
    double track_rate_ = 1.0;
    std::vector<Env> envs_;
    bool started_ = false;
};

}  // namespace quadgym
