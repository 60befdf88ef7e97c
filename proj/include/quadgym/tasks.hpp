#pragma once

// Task definitions: reward functions, reference trajectory, spawners and
// termination rules for the five tasks.
//
// Gains are stored 1-based (k[1]..k[15]) to match the K1..K15 config keys;
// docs/config.md lists which term each gain scales.

#include "quadgym/control.hpp"
#include "quadgym/dynamics.hpp"
#include "quadgym/frames.hpp"
#include "quadgym/math.hpp"
#include "quadgym/rng.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace quadgym {

enum class TaskKind { Hovering, Tracking, TargetHitting, Avoidance, Planning };

inline constexpr std::array<TaskKind, 5> kAllTasks{TaskKind::Hovering, TaskKind::Tracking, TaskKind::TargetHitting,
                                                   TaskKind::Avoidance, TaskKind::Planning};

inline constexpr std::string_view to_string(TaskKind t) {
    switch (t) {
        case TaskKind::Hovering: return "hovering";
        case TaskKind::Tracking: return "tracking";
        case TaskKind::TargetHitting: return "target_hitting";
        case TaskKind::Avoidance: return "avoidance";
        case TaskKind::Planning: return "planning";
    }
    return "?";
}

inline TaskKind task_from_string(std::string_view s) {
    for (TaskKind t : kAllTasks)
        if (to_string(t) == s) return t;
    throw std::invalid_argument("unknown task: " + std::string(s));
}

inline constexpr std::size_t obs_dim(TaskKind t) {
    switch (t) {
        case TaskKind::Hovering:
        case TaskKind::TargetHitting: return kHoverObsDim;
        case TaskKind::Tracking: return kTrackObsDim;
        case TaskKind::Avoidance:
        case TaskKind::Planning: return kEgoObsDim;
    }
    return 0;
}

enum class EpisodeOutcome { Running, Crashed, Hit, TimedOut, GoalReached };

inline constexpr std::string_view to_string(EpisodeOutcome o) {
    switch (o) {
        case EpisodeOutcome::Running: return "running";
        case EpisodeOutcome::Crashed: return "crashed";
        case EpisodeOutcome::Hit: return "hit";
        case EpisodeOutcome::TimedOut: return "timed_out";
        case EpisodeOutcome::GoalReached: return "goal_reached";
    }
    return "?";
}

inline EpisodeOutcome outcome_from_string(std::string_view s) {
    for (auto o : {EpisodeOutcome::Running, EpisodeOutcome::Crashed, EpisodeOutcome::Hit, EpisodeOutcome::TimedOut,
                   EpisodeOutcome::GoalReached})
        if (to_string(o) == s) return o;
    throw std::invalid_argument("unknown outcome: " + std::string(s));
}

inline constexpr bool is_terminal(EpisodeOutcome o) { return o != EpisodeOutcome::Running; }

/// Per-task reward gains. Default values are tuning choices for this
/// simulator, not published constants.
struct RewardGains {
    std::array<double, 16> k{};  ///< k[1]..k[15]; k[0] unused
    double heading = 0.0;        ///< planning heading-term gain

    double operator[](std::size_t i) const { return k.at(i); }
    double& operator[](std::size_t i) { return k.at(i); }

    static RewardGains defaults(TaskKind task);
};

inline RewardGains RewardGains::defaults(TaskKind task) {
    RewardGains g;
    auto set = [&g](std::initializer_list<double> vals) {
        std::size_t i = 1;
        for (double v : vals) g.k[i++] = v;
    };
    switch (task) {
        case TaskKind::Hovering: set({0.2, 0.05, 1.0, 1.0, 0.2, 0.1, 0.2, 0.2, 0.1}); break;
        case TaskKind::Tracking: set({0.2, 0.05, 1.0, 2.0, 0.2, 0.1, 0.2, 0.2}); break;
        case TaskKind::TargetHitting: set({0.2, 0.05, 1.0, 0.1, 0.1, 20.0}); break;
        case TaskKind::Avoidance: set({0.2, 0.05, 0.2, 1.0, 0.1, 0.2, 0.1, -10.0}); break;
        case TaskKind::Planning:
            set({-0.02, 0.05, 0.2, 1.0, 0.5, 1.0, 1.5, 0.5, 3.0, 0.5, 1.0, 0.1, 0.1, 0.3, 20.0});
            g.heading = 0.1;
            break;
    }
    return g;
}

/// Named reward contributions. `raw` holds each term as written; `value`
/// holds what it adds to the total after any multiplicative grouping.
struct RewardBreakdown {
    struct Term {
        std::string name;
        double raw = 0.0;
        double value = 0.0;
    };
    std::vector<Term> terms;
    double total = 0.0;

    double sum() const {
        double s = 0.0;
        for (const auto& t : terms) s += t.value;
        return s;
    }
    const Term& term(std::string_view name) const {
        for (const auto& t : terms)
            if (t.name == name) return t;
        throw std::out_of_range("no reward term " + std::string(name));
    }
};

/// What the agent did this step.
struct ActionContext {
    std::span<const double> action;
    std::span<const double> prev_action;
    Rotor4 omega_norm{};             ///< rotor speeds divided by omega_max
    std::optional<double> throttle;  ///< normalized collective; empty in PY / LV
};

// --- reference trajectory -----------------------------------------------------

inline Vec3 lemniscate(double t, double k) {
    const double s = std::sin(k * t), c = std::cos(k * t);
    const double den = 1.0 + c * c;
    return {3.0 * s / den, 3.0 * s * c / den, 1.0};
}

inline Vec3 lemniscate_velocity(double t, double k) {
    const double th = k * t;
    const double s = std::sin(th), c = std::cos(th);
    const double den = 1.0 + c * c;
    // d/dθ of x = 3s/den and y = 3sc/den, then chain rule.
    const double dx = 3.0 * (c * den + 2.0 * s * s * c) / (den * den);
    const double dy = 3.0 * ((c * c - s * s) * den + 2.0 * s * s * c * c) / (den * den);
    return {k * dx, k * dy, 0.0};
}

/// Length of one full lap, composite Simpson on the parameter θ = kt.
inline double lemniscate_lap_length(int intervals = 20000) {
    const double h = 2.0 * std::numbers::pi / intervals;
    auto speed = [](double th) { return lemniscate_velocity(th, 1.0).norm(); };
    double sum = speed(0.0) + speed(2.0 * std::numbers::pi);
    for (int i = 1; i < intervals; ++i) sum += (i % 2 ? 4.0 : 2.0) * speed(i * h);
    return sum * h / 3.0;
}

/// Rate k giving the requested mean path speed over a lap.
inline double lemniscate_rate_for_speed(double mean_speed) {
    if (!(mean_speed > 0.0)) throw std::invalid_argument("mean speed must be positive");
    return 2.0 * std::numbers::pi * mean_speed / lemniscate_lap_length();
}

// --- shared terms ----------------------------------------------------------------

namespace detail {

inline double action_delta(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - (i < b.size() ? b[i] : 0.0);
        s += d * d;
    }
    return std::sqrt(s);
}

inline double action_energy(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
}

/// World-z component of the rotated body z axis.
inline double up_alignment(const Quat& q) { return rotate_vec(q, Vec3::UnitZ()).z(); }

inline double yaw_of(const Quat& q) { return EgoFrame::from_attitude(q).yaw; }

inline double throttle_term(double gain, const ActionContext& ctx, double hover) {
    return ctx.throttle ? gain * (1.0 - std::abs(hover - *ctx.throttle)) : 0.0;
}

}  // namespace detail

// --- rewards -----------------------------------------------------------------

/// Hovering: smooth + effort + pos + throttle + pos·(ups + spin + heading + vel_dir).
inline RewardBreakdown reward_hover(const QuadState& s, const Vec3& target, double target_yaw,
                                    const ActionContext& ctx, const RewardGains& k, double hover_throttle) {
    const Vec3 dp = target - s.position;
    const double smooth = k[1] * std::exp(-detail::action_delta(ctx.action, ctx.prev_action));
    double effort = 0.0;
    for (double o : ctx.omega_norm) effort += 1.0 - o;
    effort *= k[2];
    const double pos = k[3] / (1.0 + k[4] * dp.squaredNorm());
    const double throttle = detail::throttle_term(k[5], ctx, hover_throttle);
    const double ups = k[6] * std::pow(detail::up_alignment(s.attitude) + 1.0, 2);
    const double spin = k[7] / (1.0 + s.body_rate.z() * s.body_rate.z());
    const double dpsi = wrap_pi(target_yaw - detail::yaw_of(s.attitude));
    const double heading = k[8] / (1.0 + dpsi * dpsi);
    const double dist = dp.norm();
    const Vec3 dir = dist > 1e-12 ? Vec3(dp / dist) : Vec3::Zero();
    const double vel_dir = k[9] * std::exp(-s.velocity.dot(dir) / std::numbers::pi);

    RewardBreakdown r;
    r.terms = {{"smooth", smooth, smooth},        {"effort", effort, effort},
               {"pos", pos, pos},                 {"throttle", throttle, throttle},
               {"ups", ups, pos * ups},           {"spin", spin, pos * spin},
               {"heading", heading, pos * heading}, {"vel_dir", vel_dir, pos * vel_dir}};
    r.total = smooth + effort + pos + throttle + pos * (ups + spin + heading + vel_dir);
    return r;
}

/// Tracking: smooth + effort + dist + throttle + dist·(ups + spin + heading),
/// with `expected` the current point of the reference.
inline RewardBreakdown reward_track(const QuadState& s, const Vec3& expected, double target_yaw,
                                    const ActionContext& ctx, const RewardGains& k, double hover_throttle) {
    const double smooth = k[1] * std::exp(-detail::action_delta(ctx.action, ctx.prev_action));
    double effort = 0.0;
    for (double o : ctx.omega_norm) effort += 1.0 - o;
    effort *= k[2];
    const double dist = k[3] / (1.0 + k[4] * (expected - s.position).squaredNorm());
    const double throttle = detail::throttle_term(k[5], ctx, hover_throttle);
    const double ups = k[6] * std::pow(detail::up_alignment(s.attitude) + 1.0, 2);
    const double spin = k[7] / (1.0 + s.body_rate.z() * s.body_rate.z());
    const double dpsi = wrap_pi(target_yaw - detail::yaw_of(s.attitude));
    const double heading = k[8] / (1.0 + dpsi * dpsi);

    RewardBreakdown r;
    r.terms = {{"smooth", smooth, smooth},   {"effort", effort, effort},       {"dist", dist, dist},
               {"throttle", throttle, throttle}, {"ups", ups, dist * ups}, {"spin", spin, dist * spin},
               {"heading", heading, dist * heading}};
    r.total = smooth + effort + dist + throttle + dist * (ups + spin + heading);
    return r;
}

/// Target hitting: smooth + effort + guidance + ups + heading + hit.
inline RewardBreakdown reward_hit(const QuadState& s, const Vec3& prev_pos, const Vec3& balloon, double target_yaw,
                                  const ActionContext& ctx, const RewardGains& k, bool hit) {
    const double smooth = k[1] * std::exp(-detail::action_delta(ctx.action, ctx.prev_action));
    const double effort = k[2] * std::exp(-detail::action_energy(ctx.action));
    const double guidance = k[3] * ((balloon - prev_pos).norm() - (balloon - s.position).norm());
    const double ups = k[4] * std::pow(detail::up_alignment(s.attitude) + 1.0, 2);
    const double dpsi = wrap_pi(target_yaw - detail::yaw_of(s.attitude));
    const double heading = k[5] / (1.0 + dpsi * dpsi);
    const double bonus = hit ? k[6] : 0.0;

    RewardBreakdown r;
    r.terms = {{"smooth", smooth, smooth}, {"effort", effort, effort}, {"guidance", guidance, guidance},
               {"ups", ups, ups},          {"heading", heading, heading}, {"hit", bonus, bonus}};
    r.total = smooth + effort + guidance + ups + heading + bonus;
    return r;
}

struct PoseTarget {
    Vec3 position = Vec3::Zero();
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;
};

/// Avoidance: smooth + effort + throttle + pose + alive + pose·(ups + spin).
inline RewardBreakdown reward_avoid(const QuadState& s, const PoseTarget& target, const ActionContext& ctx,
                                    const RewardGains& k, double hover_throttle, bool alive) {
    const double smooth = k[1] * std::exp(-detail::action_delta(ctx.action, ctx.prev_action));
    const double effort = k[2] * std::exp(-detail::action_energy(ctx.action));
    const double throttle = detail::throttle_term(k[3], ctx, hover_throttle);
    const Vec3 euler = euler_zyx(s.attitude, detail::yaw_of(s.attitude));
    const double d_pitch = wrap_pi(target.pitch - euler.y());
    const double d_roll = wrap_pi(target.roll - euler.x());
    const double d_yaw = wrap_pi(target.yaw - euler.z());
    const double err2 = (target.position - s.position).squaredNorm() + d_pitch * d_pitch + d_roll * d_roll + d_yaw * d_yaw;
    const double pose = k[4] / (1.0 + err2);
    const double ups = k[5] * std::pow(detail::up_alignment(s.attitude) + 1.0, 2);
    const double spin = k[6] / (1.0 + s.body_rate.z() * s.body_rate.z());
    const double alive_term = alive ? k[7] : k[8];

    RewardBreakdown r;
    r.terms = {{"smooth", smooth, smooth}, {"effort", effort, effort}, {"throttle", throttle, throttle},
               {"pose", pose, pose},       {"alive", alive_term, alive_term}, {"ups", ups, pose * ups},
               {"spin", spin, pose * spin}};
    r.total = smooth + effort + throttle + pose + alive_term + pose * (ups + spin);
    return r;
}

/// Planning: smooth + effort + throttle + guidance + speed + height + heading
/// + ups + guidance·(esdf + alive) + goal.
inline RewardBreakdown reward_plan(const QuadState& s, const Vec3& prev_pos, const Vec3& goal, double x_esdf,
                                   const ActionContext& ctx, const RewardGains& k, double hover_throttle,
                                   bool goal_reached) {
    const EgoFrame ego = EgoFrame::from_attitude(s.attitude);
    const Vec3 rate_ego = ego.to_ego(rotate_vec(s.attitude, s.body_rate));
    const double smooth = k[1] * (detail::action_delta(ctx.action, ctx.prev_action) + rate_ego.norm());
    const double effort = k[2] * std::exp(-detail::action_energy(ctx.action));
    const double throttle = detail::throttle_term(k[3], ctx, hover_throttle);
    const double guidance = k[4] * ((goal - prev_pos).norm() - (goal - s.position).norm());
    const double vx = std::abs(ego.to_ego(s.velocity).x());
    const double speed = -k[5] * (1.0 - std::exp(-k[6] * (vx - k[7]) * (vx - k[7])));
    const double pz = s.position.z();
    const double height = std::min(std::min(pz - k[8], 0.0), k[9] - pz);
    const double esdf = k[10] * (1.0 - std::exp(-k[11] * x_esdf * x_esdf));
    const double ups = k[12] * std::pow(detail::up_alignment(s.attitude) + 1.0, 2);
    const double alive = x_esdf > k[14] ? k[13] : 0.0;
    const double goal_bonus = goal_reached ? k[15] : 0.0;
    const Vec3 to_goal = goal - s.position;
    const double goal_yaw = std::atan2(to_goal.y(), to_goal.x());
    const double dpsi = wrap_pi(goal_yaw - ego.yaw);
    const double heading = k.heading / (1.0 + dpsi * dpsi);

    RewardBreakdown r;
    r.terms = {{"smooth", smooth, smooth},       {"effort", effort, effort},
               {"throttle", throttle, throttle}, {"guidance", guidance, guidance},
               {"speed", speed, speed},          {"height", height, height},
               {"heading", heading, heading},    {"ups", ups, ups},
               {"esdf", esdf, guidance * esdf},  {"alive", alive, guidance * alive},
               {"goal", goal_bonus, goal_bonus}};
    r.total = smooth + effort + throttle + guidance + speed + height + heading + ups + guidance * (esdf + alive) +
              goal_bonus;
    return r;
}

// --- termination ---------------------------------------------------------------

struct TerminationConfig {
    std::size_t max_steps = 1000;
    Vec3 arena_min{-10.0, -10.0, -10.0};
    Vec3 arena_max{10.0, 10.0, 10.0};
    double tilt_max = 80.0 * std::numbers::pi / 180.0;
    double hit_radius = 0.2;
    double goal_radius = 0.5;
    double crash_depth = 0.3;  ///< K14 of the planning gains; also used for avoidance
};

struct TerminationInputs {
    std::optional<double> x_esdf;     ///< avoidance / planning only
    std::optional<Vec3> target;       ///< balloon (target hitting) or goal (planning)
    bool collided = false;            ///< geometric contact with a scene body
};

/// `step` counts completed steps in the episode.
inline EpisodeOutcome termination(const QuadState& s, TaskKind task, const TerminationInputs& in, std::size_t step,
                                  const TerminationConfig& cfg) {
    if (!s.finite()) return EpisodeOutcome::Crashed;
    const bool outside = (s.position.array() < cfg.arena_min.array()).any() ||
                         (s.position.array() > cfg.arena_max.array()).any();
    const double tilt = std::acos(std::clamp(detail::up_alignment(s.attitude), -1.0, 1.0));
    if (outside || tilt > cfg.tilt_max || in.collided) return EpisodeOutcome::Crashed;
    if ((task == TaskKind::Planning || task == TaskKind::Avoidance) && in.x_esdf && *in.x_esdf < cfg.crash_depth)
        return EpisodeOutcome::Crashed;
    if (task == TaskKind::TargetHitting && in.target && (*in.target - s.position).norm() <= cfg.hit_radius)
        return EpisodeOutcome::Hit;
    if (task == TaskKind::Planning && in.target && (*in.target - s.position).norm() <= cfg.goal_radius)
        return EpisodeOutcome::GoalReached;
    if (step >= cfg.max_steps) return EpisodeOutcome::TimedOut;
    return EpisodeOutcome::Running;
}

// --- spawners -------------------------------------------------------------------

inline Vec3 spawn_balloon(CounterRng& rng, const Vec3& lo, const Vec3& hi) {
    return {rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()), rng.uniform(lo.z(), hi.z())};
}

struct ProjectileSpec {
    double distance = 6.0;      ///< launch distance from the aim point, m
    double speed_min = 4.0;     ///< m/s
    double speed_max = 8.0;
    double azimuth = 0.0;       ///< world heading from aim point to thrower, rad
    double azimuth_spread = 0.5;
    double elevation_min = 0.0;  ///< launch elevation seen from the aim point, rad
    double elevation_max = 0.6;
    double angle_noise = 0.0;    ///< σ of direction noise applied to the launch velocity, rad
    double radius = 0.15;        ///< thrown body radius (half-edge for cubes)
};

struct Projectile {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    double flight_time = 0.0;
};

/// Launch velocity of fixed speed that reaches `delta` under gravity, taking
/// the shorter flight time. Empty if the speed is insufficient.
inline std::optional<Projectile> ballistic_intercept(const Vec3& delta, double speed, const Vec3& gravity) {
    // |delta/t - g t/2|² = s²  ⇒  (g²/4)u² - (s² + Δ·g)u + |Δ|² = 0 with u = t².
    const double a = 0.25 * gravity.squaredNorm();
    const double b = -(speed * speed + delta.dot(gravity));
    const double c = delta.squaredNorm();
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0 || a <= 0.0) return std::nullopt;
    const double u = (-b - std::sqrt(disc)) / (2.0 * a);
    if (!(u > 0.0)) return std::nullopt;
    const double t = std::sqrt(u);
    return Projectile{Vec3::Zero(), delta / t - 0.5 * gravity * t, t};
}

/// Lowest elevation (seen from the aim point) at which `speed` can cover
/// `distance`, plus a small margin.
inline double min_launch_elevation(double distance, double speed, double g) {
    // Reachable iff s² >= d·g·(1 - sin α).
    const double need = 1.0 - speed * speed / (distance * g);
    if (need <= -1.0) return -std::numbers::pi / 2;
    return std::asin(std::clamp(need, -1.0, 1.0)) + 1e-3;
}

inline Projectile spawn_projectile(CounterRng& rng, const Vec3& aim, const ProjectileSpec& spec, const Vec3& gravity) {
    const double speed = std::clamp(rng.uniform(spec.speed_min, spec.speed_max), spec.speed_min, spec.speed_max);
    const double az = spec.azimuth + rng.uniform(-spec.azimuth_spread, spec.azimuth_spread);
    const double el_draw = rng.uniform(spec.elevation_min, spec.elevation_max);
    const double elevation = std::max(el_draw, min_launch_elevation(spec.distance, speed, gravity.norm()));
    const Vec3 from_aim{std::cos(elevation) * std::cos(az), std::cos(elevation) * std::sin(az), std::sin(elevation)};
    const Vec3 start = aim + spec.distance * from_aim;
    auto shot = ballistic_intercept(aim - start, speed, gravity);
    if (!shot) throw std::logic_error("spawn_projectile: no ballistic solution");
    shot->position = start;
    if (spec.angle_noise > 0.0) {
        // Perturb direction only; the speed stays in range.
        const Vec3 axis{rng.normal(0.0, 1.0), rng.normal(0.0, 1.0), rng.normal(0.0, 1.0)};
        const double angle = rng.normal(0.0, spec.angle_noise);
        if (axis.norm() > 1e-12) shot->velocity = rotate_vec(Quat::from_axis_angle(axis, angle), shot->velocity);
    }
    return *shot;
}

// --- trajectory playback --------------------------------------------------------

struct TemporalMargin {
    bool enabled = false;
    double mean = 0.3;   ///< s
    double stddev = 0.5; ///< s
};

/// Per-episode lag draw; zero when disabled.
inline double draw_playback_offset(CounterRng& rng, const TemporalMargin& m) {
    return m.enabled ? rng.normal(m.mean, m.stddev) : 0.0;
}

/// Reference time seen by the agent; negative offsets are treated as no lag.
inline double trajectory_playback(double t_sim, double offset) { return t_sim - std::max(0.0, offset); }

}  // namespace quadgym
