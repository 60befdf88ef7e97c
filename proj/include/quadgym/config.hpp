#pragma once

// Environment configuration and its JSON form.
//
// The file is a single object with sections `sim`, `vehicle`, `controller`,
// `task` (one sub-object per task), `dr` and `camera`. Every key is optional;
// missing keys keep their defaults. docs/config.md lists all keys and units.

#include "quadgym/control.hpp"
#include "quadgym/dynamics.hpp"
#include "quadgym/tasks.hpp"
#include "quadgym/world.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <string>

namespace quadgym {

struct DomainRandomization {
    double init_cube_side = 2.0;       ///< m; 0 keeps the nominal start
    double init_attitude_sigma = 0.0;  ///< rad, per axis
    double init_velocity_sigma = 0.0;  ///< m/s, per axis
    double wind_sigma = 0.0;           ///< N, per-episode constant force
    double wind_jitter_sigma = 0.0;    ///< N, per-step addition
    DepthNoiseParams depth;
    TemporalMargin temporal;

    static DomainRandomization disabled() {
        DomainRandomization d;
        d.init_cube_side = 0.0;
        return d;
    }
};

struct TaskParams {
    Vec3 hover_target{0.0, 0.0, 1.0};
    double hover_yaw = 0.0;

    double track_speed = 1.6;   ///< mean path speed, m/s
    double ref_spacing = 0.1;   ///< s between reference window points

    Vec3 hit_start{0.0, 0.0, 1.0};
    Vec3 balloon_min{-3.0, -3.0, 0.5};
    Vec3 balloon_max{3.0, 3.0, 2.5};

    Vec3 avoid_start{0.0, 0.0, 1.5};
    ProjectileSpec projectile;

    ForestSpec forest;

    TerminationConfig termination;
};

struct EnvConfig {
    std::size_t n_envs = 1;
    double dt = 0.01;
    std::size_t sensor_decimation = 4;
    TaskKind task = TaskKind::Hovering;
    ControlMode mode = ControlMode::PY;
    std::size_t max_episode_steps = 1000;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    double py_position_range = 10.0;  ///< PY action scale, m
    double collision_radius = 0.1;    ///< vehicle body radius, m
    std::size_t feature_rows = 5;
    std::size_t feature_cols = 6;

    QuadParams vehicle = QuadParams::defaults();
    ControllerGains controller = default_gains(QuadParams::defaults());
    std::array<RewardGains, 5> rewards{RewardGains::defaults(TaskKind::Hovering),
                                       RewardGains::defaults(TaskKind::Tracking),
                                       RewardGains::defaults(TaskKind::TargetHitting),
                                       RewardGains::defaults(TaskKind::Avoidance),
                                       RewardGains::defaults(TaskKind::Planning)};
    TaskParams task_params;
    DomainRandomization dr;
    CameraModel camera;

    static ControllerGains default_gains(const QuadParams& p) {
        ControllerGains g;
        g.hover_throttle = hover_throttle(p);
        return g;
    }

    RewardGains& reward_gains(TaskKind t) { return rewards[static_cast<std::size_t>(t)]; }
    const RewardGains& reward_gains(TaskKind t) const { return rewards[static_cast<std::size_t>(t)]; }

    std::size_t act_dim() const { return command_dim(mode); }
    std::size_t observation_dim() const { return obs_dim(task); }

    void validate() const {
        if (n_envs < 1) throw std::invalid_argument("EnvConfig: n_envs must be >= 1");
        if (!(dt > 0.0)) throw std::invalid_argument("EnvConfig: dt must be positive");
        if (sensor_decimation < 1) throw std::invalid_argument("EnvConfig: sensor_decimation must be >= 1");
        if (max_episode_steps < 1) throw std::invalid_argument("EnvConfig: max_episode_steps must be >= 1");
        if (feature_rows * feature_cols != kDepthFeatureDim)
            throw std::invalid_argument("EnvConfig: feature grid must have 30 cells");
        vehicle.validate();
        controller.validate();
        camera.validate();
    }
};

// --- JSON ------------------------------------------------------------------------

namespace detail {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}
inline void read(const nlohmann::json& j, const char* key, Vec3& out) {
    if (j.contains(key)) out = vec_from_json(j.at(key));
}

}  // namespace detail

inline nlohmann::json to_json(const QuadParams& p) {
    nlohmann::json rotors = nlohmann::json::array();
    for (const auto& r : p.rotor_pos) rotors.push_back(vec_to_json(r));
    return {{"mass", p.mass},
            {"inertia", vec_to_json(p.inertia)},
            {"c_l", p.c_l},
            {"c_d", p.c_d},
            {"rotor_pos", rotors},
            {"spin_sign", p.spin_sign},
            {"motor_gain", p.motor_gain},
            {"omega_max", p.omega_max},
            {"f_rotor_max", p.f_rotor_max},
            {"gravity", vec_to_json(p.gravity)},
            {"linear_drag", vec_to_json(p.linear_drag)}};
}

inline void from_json(const nlohmann::json& j, QuadParams& p) {
    detail::read(j, "mass", p.mass);
    detail::read(j, "inertia", p.inertia);
    detail::read(j, "c_l", p.c_l);
    detail::read(j, "c_d", p.c_d);
    if (j.contains("rotor_pos")) {
        const auto& r = j.at("rotor_pos");
        if (!r.is_array() || r.size() != 4) throw std::invalid_argument("vehicle.rotor_pos needs 4 entries");
        for (std::size_t i = 0; i < 4; ++i) p.rotor_pos[i] = vec_from_json(r[i]);
    }
    detail::read(j, "spin_sign", p.spin_sign);
    detail::read(j, "motor_gain", p.motor_gain);
    detail::read(j, "omega_max", p.omega_max);
    detail::read(j, "f_rotor_max", p.f_rotor_max);
    detail::read(j, "gravity", p.gravity);
    detail::read(j, "linear_drag", p.linear_drag);
}

inline nlohmann::json to_json(const ControllerGains& g) {
    return {{"pos_p", vec_to_json(g.pos_p)},
            {"vel_p", vec_to_json(g.vel_p)},
            {"vel_i", vec_to_json(g.vel_i)},
            {"vel_d", vec_to_json(g.vel_d)},
            {"vel_int_limit", vec_to_json(g.vel_int_limit)},
            {"att_p", vec_to_json(g.att_p)},
            {"rate_p", vec_to_json(g.rate_p)},
            {"rate_i", vec_to_json(g.rate_i)},
            {"rate_d", vec_to_json(g.rate_d)},
            {"rate_int_limit", vec_to_json(g.rate_int_limit)},
            {"max_tilt", g.max_tilt},
            {"max_vel", g.max_vel},
            {"max_rate", g.max_rate},
            {"thrust_min", g.thrust_min},
            {"thrust_max", g.thrust_max},
            {"hover_throttle", g.hover_throttle}};
}

inline void from_json(const nlohmann::json& j, ControllerGains& g) {
    detail::read(j, "pos_p", g.pos_p);
    detail::read(j, "vel_p", g.vel_p);
    detail::read(j, "vel_i", g.vel_i);
    detail::read(j, "vel_d", g.vel_d);
    detail::read(j, "vel_int_limit", g.vel_int_limit);
    detail::read(j, "att_p", g.att_p);
    detail::read(j, "rate_p", g.rate_p);
    detail::read(j, "rate_i", g.rate_i);
    detail::read(j, "rate_d", g.rate_d);
    detail::read(j, "rate_int_limit", g.rate_int_limit);
    detail::read(j, "max_tilt", g.max_tilt);
    detail::read(j, "max_vel", g.max_vel);
    detail::read(j, "max_rate", g.max_rate);
    detail::read(j, "thrust_min", g.thrust_min);
    detail::read(j, "thrust_max", g.thrust_max);
    detail::read(j, "hover_throttle", g.hover_throttle);
}

inline nlohmann::json to_json(const RewardGains& g) {
    nlohmann::json j;
    for (std::size_t i = 1; i < g.k.size(); ++i) j["K" + std::to_string(i)] = g.k[i];
    j["K_heading"] = g.heading;
    return j;
}

inline void from_json(const nlohmann::json& j, RewardGains& g) {
    for (std::size_t i = 1; i < g.k.size(); ++i) detail::read(j, ("K" + std::to_string(i)).c_str(), g.k[i]);
    detail::read(j, "K_heading", g.heading);
}

inline nlohmann::json to_json(const EnvConfig& c) {
    const auto& tp = c.task_params;
    nlohmann::json task;
    for (TaskKind t : kAllTasks) task[std::string(to_string(t))] = {{"rewards", to_json(c.reward_gains(t))}};
    task["hovering"]["target"] = vec_to_json(tp.hover_target);
    task["hovering"]["yaw"] = tp.hover_yaw;
    task["tracking"]["speed"] = tp.track_speed;
    task["tracking"]["ref_spacing"] = tp.ref_spacing;
    task["target_hitting"]["start"] = vec_to_json(tp.hit_start);
    task["target_hitting"]["balloon_min"] = vec_to_json(tp.balloon_min);
    task["target_hitting"]["balloon_max"] = vec_to_json(tp.balloon_max);
    task["avoidance"]["start"] = vec_to_json(tp.avoid_start);
    const auto& pr = tp.projectile;
    task["avoidance"]["projectile"] = {{"distance", pr.distance},         {"speed_min", pr.speed_min},
                                       {"speed_max", pr.speed_max},       {"azimuth", pr.azimuth},
                                       {"azimuth_spread", pr.azimuth_spread}, {"elevation_min", pr.elevation_min},
                                       {"elevation_max", pr.elevation_max}, {"angle_noise", pr.angle_noise},
                                       {"radius", pr.radius}};
    const auto& f = tp.forest;
    task["planning"]["forest"] = {{"n_trunks", f.n_trunks},         {"bounds_min", vec_to_json(f.bounds_min)},
                                  {"bounds_max", vec_to_json(f.bounds_max)}, {"radius_min", f.radius_min},
                                  {"radius_max", f.radius_max},     {"min_clearance", f.min_clearance},
                                  {"trunk_height", f.trunk_height}, {"start", vec_to_json(f.start)},
                                  {"goal", vec_to_json(f.goal)},    {"max_attempts", f.max_attempts}};
    const auto& tc = tp.termination;
    task["termination"] = {{"arena_min", vec_to_json(tc.arena_min)}, {"arena_max", vec_to_json(tc.arena_max)},
                           {"tilt_max", tc.tilt_max},               {"hit_radius", tc.hit_radius},
                           {"goal_radius", tc.goal_radius},         {"crash_depth", tc.crash_depth}};

    const auto& d = c.dr;
    nlohmann::json dr = {{"init_cube_side", d.init_cube_side},
                         {"init_attitude_sigma", d.init_attitude_sigma},
                         {"init_velocity_sigma", d.init_velocity_sigma},
                         {"wind_sigma", d.wind_sigma},
                         {"wind_jitter_sigma", d.wind_jitter_sigma},
                         {"depth",
                          {{"mult_sigma", d.depth.mult_sigma},
                           {"add_sigma", d.depth.add_sigma},
                           {"blur_prob", d.depth.blur_prob},
                           {"scale_range", d.depth.scale_range},
                           {"offset_range", d.depth.offset_range}}},
                         {"temporal",
                          {{"enabled", d.temporal.enabled}, {"mean", d.temporal.mean}, {"stddev", d.temporal.stddev}}}};

    const auto& cam = c.camera;
    nlohmann::json camera = {{"width", cam.width},
                             {"height", cam.height},
                             {"hfov", cam.hfov},
                             {"vfov", cam.vfov},
                             {"max_range", cam.max_range},
                             {"near", cam.near},
                             {"mount_position", vec_to_json(cam.mount.position)},
                             {"mount_attitude",
                              {cam.mount.attitude.w, cam.mount.attitude.x, cam.mount.attitude.y, cam.mount.attitude.z}},
                             {"feature_rows", c.feature_rows},
                             {"feature_cols", c.feature_cols}};

    return {{"sim",
             {{"n_envs", c.n_envs},
              {"dt", c.dt},
              {"sensor_decimation", c.sensor_decimation},
              {"task", std::string(to_string(c.task))},
              {"mode", std::string(to_string(c.mode))},
              {"max_episode_steps", c.max_episode_steps},
              {"seed", c.seed},
              {"workers", c.workers},
              {"py_position_range", c.py_position_range},
              {"collision_radius", c.collision_radius}}},
            {"vehicle", to_json(c.vehicle)},
            {"controller", to_json(c.controller)},
            {"task", task},
            {"dr", dr},
            {"camera", camera}};
}

/// Applies a (possibly partial) JSON document on top of `c`.
inline void apply_json(const nlohmann::json& j, EnvConfig& c) {
    if (j.contains("sim")) {
        const auto& s = j["sim"];
        detail::read(s, "n_envs", c.n_envs);
        detail::read(s, "dt", c.dt);
        detail::read(s, "sensor_decimation", c.sensor_decimation);
        if (s.contains("task")) c.task = task_from_string(s["task"].get<std::string>());
        if (s.contains("mode")) c.mode = control_mode_from_string(s["mode"].get<std::string>());
        detail::read(s, "max_episode_steps", c.max_episode_steps);
        detail::read(s, "seed", c.seed);
        detail::read(s, "workers", c.workers);
        detail::read(s, "py_position_range", c.py_position_range);
        detail::read(s, "collision_radius", c.collision_radius);
    }
    if (j.contains("vehicle")) from_json(j["vehicle"], c.vehicle);
    if (j.contains("controller")) from_json(j["controller"], c.controller);
    if (j.contains("task")) {
        const auto& t = j["task"];
        auto& tp = c.task_params;
        for (TaskKind k : kAllTasks) {
            const std::string name(to_string(k));
            if (t.contains(name) && t[name].contains("rewards")) from_json(t[name]["rewards"], c.reward_gains(k));
        }
        if (t.contains("hovering")) {
            detail::read(t["hovering"], "target", tp.hover_target);
            detail::read(t["hovering"], "yaw", tp.hover_yaw);
        }
        if (t.contains("tracking")) {
            detail::read(t["tracking"], "speed", tp.track_speed);
            detail::read(t["tracking"], "ref_spacing", tp.ref_spacing);
        }
        if (t.contains("target_hitting")) {
            const auto& h = t["target_hitting"];
            detail::read(h, "start", tp.hit_start);
            detail::read(h, "balloon_min", tp.balloon_min);
            detail::read(h, "balloon_max", tp.balloon_max);
        }
        if (t.contains("avoidance")) {
            const auto& a = t["avoidance"];
            detail::read(a, "start", tp.avoid_start);
            if (a.contains("projectile")) {
                const auto& p = a["projectile"];
                auto& pr = tp.projectile;
                detail::read(p, "distance", pr.distance);
                detail::read(p, "speed_min", pr.speed_min);
                detail::read(p, "speed_max", pr.speed_max);
                detail::read(p, "azimuth", pr.azimuth);
                detail::read(p, "azimuth_spread", pr.azimuth_spread);
                detail::read(p, "elevation_min", pr.elevation_min);
                detail::read(p, "elevation_max", pr.elevation_max);
                detail::read(p, "angle_noise", pr.angle_noise);
                detail::read(p, "radius", pr.radius);
            }
        }
        if (t.contains("planning") && t["planning"].contains("forest")) {
            const auto& f = t["planning"]["forest"];
            auto& fs = tp.forest;
            detail::read(f, "n_trunks", fs.n_trunks);
            detail::read(f, "bounds_min", fs.bounds_min);
            detail::read(f, "bounds_max", fs.bounds_max);
            detail::read(f, "radius_min", fs.radius_min);
            detail::read(f, "radius_max", fs.radius_max);
            detail::read(f, "min_clearance", fs.min_clearance);
            detail::read(f, "trunk_height", fs.trunk_height);
            detail::read(f, "start", fs.start);
            detail::read(f, "goal", fs.goal);
            detail::read(f, "max_attempts", fs.max_attempts);
        }
        if (t.contains("termination")) {
            const auto& e = t["termination"];
            auto& tc = tp.termination;
            detail::read(e, "arena_min", tc.arena_min);
            detail::read(e, "arena_max", tc.arena_max);
            detail::read(e, "tilt_max", tc.tilt_max);
            detail::read(e, "hit_radius", tc.hit_radius);
            detail::read(e, "goal_radius", tc.goal_radius);
            detail::read(e, "crash_depth", tc.crash_depth);
        }
    }
    if (j.contains("dr")) {
        const auto& d = j["dr"];
        detail::read(d, "init_cube_side", c.dr.init_cube_side);
        detail::read(d, "init_attitude_sigma", c.dr.init_attitude_sigma);
        detail::read(d, "init_velocity_sigma", c.dr.init_velocity_sigma);
        detail::read(d, "wind_sigma", c.dr.wind_sigma);
        detail::read(d, "wind_jitter_sigma", c.dr.wind_jitter_sigma);
        if (d.contains("depth")) {
            const auto& dd = d["depth"];
            detail::read(dd, "mult_sigma", c.dr.depth.mult_sigma);
            detail::read(dd, "add_sigma", c.dr.depth.add_sigma);
            detail::read(dd, "blur_prob", c.dr.depth.blur_prob);
            detail::read(dd, "scale_range", c.dr.depth.scale_range);
            detail::read(dd, "offset_range", c.dr.depth.offset_range);
        }
        if (d.contains("temporal")) {
            detail::read(d["temporal"], "enabled", c.dr.temporal.enabled);
            detail::read(d["temporal"], "mean", c.dr.temporal.mean);
            detail::read(d["temporal"], "stddev", c.dr.temporal.stddev);
        }
    }
    if (j.contains("camera")) {
        const auto& cam = j["camera"];
        detail::read(cam, "width", c.camera.width);
        detail::read(cam, "height", c.camera.height);
        detail::read(cam, "hfov", c.camera.hfov);
        detail::read(cam, "vfov", c.camera.vfov);
        detail::read(cam, "max_range", c.camera.max_range);
        detail::read(cam, "near", c.camera.near);
        detail::read(cam, "mount_position", c.camera.mount.position);
        if (cam.contains("mount_attitude")) {
            const auto q = cam["mount_attitude"].get<std::array<double, 4>>();
            c.camera.mount.attitude = Quat{q[0], q[1], q[2], q[3]}.normalized();
        }
        detail::read(cam, "feature_rows", c.feature_rows);
        detail::read(cam, "feature_cols", c.feature_cols);
    }
}

inline constexpr const char* kSeedEnvVar = "QUADGYM_SEED";

/// Loads a config file over the defaults, then applies the seed override
/// from the environment if it is set.
inline EnvConfig load_config(const std::string& path) {
    EnvConfig c;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config file " + path);
        apply_json(nlohmann::json::parse(in), c);
    }
    if (const char* s = std::getenv(kSeedEnvVar)) c.seed = std::stoull(s);
    c.validate();
    return c;
}

/// FNV-1a over the canonical JSON dump.
inline std::uint64_t config_hash(const EnvConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_json(c).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace quadgym
