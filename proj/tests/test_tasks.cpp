#include "quadgym/tasks.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace quadgym;

namespace {

RewardGains ones(double v = 1.0) {
    RewardGains g;
    g.k.fill(v);
    g.heading = v;
    return g;
}

struct Ctx {
    std::array<double, 4> a{0.1, 0.2, 0.3, 0.4};
    std::array<double, 4> prev{0.1, 0.2, 0.3, 0.4};
    ActionContext make(double omega = 0.5, std::optional<double> throttle = std::nullopt) const {
        return {a, prev, {omega, omega, omega, omega}, throttle};
    }
};

QuadState at(const Vec3& p) {
    QuadState s;
    s.position = p;
    return s;
}

double sum_terms(const RewardBreakdown& r) {
    double s = 0.0;
    for (const auto& t : r.terms) s += t.value;
    return s;
}

}  // namespace

TEST(Lemniscate, Examples) {
    const double k = 0.7;
    EXPECT_EQ(lemniscate(0.0, k), Vec3(0, 0, 1));
    const Vec3 p = lemniscate(std::numbers::pi / 2 / k, k);
    EXPECT_NEAR(p.x(), 3.0, 1e-12);
    EXPECT_NEAR(p.y(), 0.0, 1e-12);
    EXPECT_EQ(p.z(), 1.0);
}

TEST(Lemniscate, VelocityMatchesFiniteDifference) {
    const double k = 0.9, h = 1e-6;
    for (double t : {0.0, 0.3, 1.7, 4.2}) {
        const Vec3 fd = (lemniscate(t + h, k) - lemniscate(t - h, k)) / (2 * h);
        EXPECT_LT((lemniscate_velocity(t, k) - fd).norm(), 1e-6);
    }
}

TEST(Lemniscate, RateGivesMeanSpeed) {
    const double k = lemniscate_rate_for_speed(1.6);
    const double period = 2 * std::numbers::pi / k;
    // Independent arc length by dense polyline.
    double len = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) len += (lemniscate(period * (i + 1) / n, k) - lemniscate(period * i / n, k)).norm();
    EXPECT_NEAR(len / period, 1.6, 1e-6);
}

TEST(RewardHover, PerfectHoverStationaryPoint) {
    const RewardGains g = RewardGains::defaults(TaskKind::Hovering);
    const Ctx c;
    const double th = 0.327;
    const double om = 0.57;
    const auto r = reward_hover(at({0, 0, 1}), {0, 0, 1}, 0.0, c.make(om, th), g, th);
    EXPECT_DOUBLE_EQ(r.term("smooth").raw, g[1]);
    EXPECT_NEAR(r.term("effort").raw, 4 * g[2] * (1 - om), 1e-15);
    EXPECT_DOUBLE_EQ(r.term("pos").raw, g[3]);
    EXPECT_DOUBLE_EQ(r.term("throttle").raw, g[5]);
    EXPECT_DOUBLE_EQ(r.term("ups").raw, 4 * g[6]);
    EXPECT_DOUBLE_EQ(r.term("spin").raw, g[7]);
    EXPECT_DOUBLE_EQ(r.term("heading").raw, g[8]);
    EXPECT_DOUBLE_EQ(r.term("vel_dir").raw, g[9]);
    const double expected = g[1] + 4 * g[2] * (1 - om) + g[3] + g[5] + g[3] * (4 * g[6] + g[7] + g[8] + g[9]);
    EXPECT_NEAR(r.total, expected, 1e-12);
}

TEST(RewardHover, UnitDistance) {
    RewardGains g = RewardGains::defaults(TaskKind::Hovering);
    g[3] = 1;
    g[4] = 1;
    const Ctx c;
    const auto r = reward_hover(at({1, 0, 1}), {0, 0, 1}, 0.0, c.make(), g, 0.327);
    EXPECT_DOUBLE_EQ(r.term("pos").raw, 0.5);
}

TEST(RewardHover, ThrottleZeroWithoutThrottleCommand) {
    const Ctx c;
    const auto r = reward_hover(at({0, 0, 1}), {0, 0, 1}, 0.0, c.make(0.5, std::nullopt), ones(), 0.327);
    EXPECT_EQ(r.term("throttle").value, 0.0);
}

TEST(RewardHover, VelocityDirectionOrdering) {
    const RewardGains g = ones();
    const Ctx c;
    QuadState toward = at({1, 0, 1}), away = at({1, 0, 1});
    toward.velocity = {-1, 0, 0};
    away.velocity = {1, 0, 0};
    const Vec3 target{0, 0, 1};
    const double rt = reward_hover(toward, target, 0.0, c.make(), g, 0.3).term("vel_dir").raw;
    const double ra = reward_hover(away, target, 0.0, c.make(), g, 0.3).term("vel_dir").raw;
    // e^{−v·d/π} with d pointing at the target: the two signs of v·d order
    // the term oppositely.
    EXPECT_NE(rt, ra);
    EXPECT_NEAR(rt, std::exp(-1.0 / std::numbers::pi), 1e-12);
    EXPECT_NEAR(ra, std::exp(1.0 / std::numbers::pi), 1e-12);
}

TEST(RewardHover, PosDecreasingOnGrid) {
    const RewardGains g = RewardGains::defaults(TaskKind::Hovering);
    const Ctx c;
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 1000; ++i) {
        const double d = 0.01 * i;
        const double v = reward_hover(at({d, 0, 1}), {0, 0, 1}, 0.0, c.make(), g, 0.3).term("pos").raw;
        EXPECT_LT(v, prev);
        prev = v;
    }
}

TEST(RewardTrack, OnTrajectoryAndMonotone) {
    const RewardGains g = RewardGains::defaults(TaskKind::Tracking);
    const Ctx c;
    const Vec3 ref{1, 2, 1};
    EXPECT_DOUBLE_EQ(reward_track(at(ref), ref, 0.0, c.make(), g, 0.3).term("dist").raw, g[3]);
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 500; ++i) {
        const auto r = reward_track(at(ref + Vec3(0, 0.02 * i, 0)), ref, 0.0, c.make(0.4, 0.31), g, 0.3);
        EXPECT_LT(r.term("dist").raw, prev);
        prev = r.term("dist").raw;
        EXPECT_NEAR(sum_terms(r), r.total, 1e-12);
    }
}

TEST(RewardHit, GuidanceAndBonus) {
    RewardGains g = RewardGains::defaults(TaskKind::TargetHitting);
    const Ctx c;
    const Vec3 balloon{5, 0, 1};
    const auto still = reward_hit(at({0, 0, 1}), {0, 0, 1}, balloon, 0.0, c.make(), g, false);
    EXPECT_EQ(still.term("guidance").raw, 0.0);
    g[3] = 1;
    const auto prog = reward_hit(at({1, 0, 1}), {0, 0, 1}, balloon, 0.0, c.make(), g, false);
    EXPECT_DOUBLE_EQ(prog.term("guidance").raw, 1.0);
    const auto hit = reward_hit(at({1, 0, 1}), {0, 0, 1}, balloon, 0.0, c.make(), g, true);
    EXPECT_DOUBLE_EQ(hit.total - prog.total, g[6]);
    EXPECT_EQ(termination(at(balloon), TaskKind::TargetHitting, {std::nullopt, balloon, false}, 3, {}),
              EpisodeOutcome::Hit);
}

TEST(RewardHit, GuidanceTelescopes) {
    // Sum of progress rewards along a path equals K3·(d_start − d_end).
    const RewardGains g = RewardGains::defaults(TaskKind::TargetHitting);
    const Ctx c;
    const Vec3 balloon{3, -2, 2};
    Vec3 prev{0, 0, 1};
    double sum = 0.0;
    for (int i = 1; i <= 100; ++i) {
        const Vec3 p{0.02 * i, std::sin(0.1 * i), 1 + 0.005 * i};
        sum += reward_hit(at(p), prev, balloon, 0.0, c.make(), g, false).term("guidance").raw;
        prev = p;
    }
    EXPECT_NEAR(sum, g[3] * ((balloon - Vec3(0, 0, 1)).norm() - (balloon - prev).norm()), 1e-12);
}

TEST(RewardAvoid, PoseAliveAndPenalty) {
    const RewardGains g = RewardGains::defaults(TaskKind::Avoidance);
    const Ctx c;
    const PoseTarget target{{0, 0, 1}, 0, 0, 0};
    const auto alive = reward_avoid(at({0, 0, 1}), target, c.make(), g, 0.3, true);
    EXPECT_DOUBLE_EQ(alive.term("pose").raw, g[4]);
    EXPECT_DOUBLE_EQ(alive.term("alive").value, g[7]);
    const auto dead = reward_avoid(at({0, 0, 1}), target, c.make(), g, 0.3, false);
    EXPECT_DOUBLE_EQ(dead.term("alive").value, g[8]);
    EXPECT_LT(g[8], 0.0);
    EXPECT_DOUBLE_EQ(alive.total - dead.total, g[7] - g[8]);
}

TEST(RewardAvoid, PoseDecreasingInYawError) {
    const RewardGains g = RewardGains::defaults(TaskKind::Avoidance);
    const Ctx c;
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 300; ++i) {
        QuadState s = at({0, 0, 1});
        s.attitude = Quat::from_yaw(0.01 * i);
        const double v = reward_avoid(s, {{0, 0, 1}, 0, 0, 0}, c.make(), g, 0.3, true).term("pose").raw;
        EXPECT_LT(v, prev);
        prev = v;
    }
}

TEST(RewardPlan, Examples) {
    const RewardGains g = RewardGains::defaults(TaskKind::Planning);
    const Ctx c;
    const Vec3 goal{20, 0, 1.5};
    QuadState s = at({0, 0, 1.5});
    EXPECT_EQ(reward_plan(s, s.position, goal, 0.0, c.make(), g, 0.3, false).term("esdf").raw, 0.0);
    s.velocity = {g[7], 0, 0};
    EXPECT_EQ(reward_plan(s, s.position, goal, 1.0, c.make(), g, 0.3, false).term("speed").raw, 0.0);
    for (double z : {g[8], 0.5 * (g[8] + g[9]), g[9]})
        EXPECT_EQ(reward_plan(at({0, 0, z}), {0, 0, z}, goal, 1.0, c.make(), g, 0.3, false).term("height").raw, 0.0);
    EXPECT_LT(reward_plan(at({0, 0, g[9] + 1}), {0, 0, 1}, goal, 1.0, c.make(), g, 0.3, false).term("height").raw, 0.0);
    EXPECT_LT(reward_plan(at({0, 0, g[8] - 0.2}), {0, 0, 1}, goal, 1.0, c.make(), g, 0.3, false).term("height").raw,
              0.0);
}

TEST(RewardPlan, EsdfIncreasingWithSupremum) {
    const RewardGains g = RewardGains::defaults(TaskKind::Planning);
    const Ctx c;
    double prev = -1.0;
    for (int i = 0; i <= 1000; ++i) {
        const double x = 0.005 * i;
        const double v = reward_plan(at({0, 0, 1.5}), {0, 0, 1.5}, {9, 0, 1.5}, x, c.make(), g, 0.3, false)
                             .term("esdf")
                             .raw;
        EXPECT_GT(v, prev);
        EXPECT_LT(v, g[10]);
        prev = v;
    }
}

TEST(RewardPlan, SpeedPeaksAtExpectedSpeed) {
    const RewardGains g = RewardGains::defaults(TaskKind::Planning);
    const Ctx c;
    auto speed_term = [&](double vx) {
        QuadState s = at({0, 0, 1.5});
        s.velocity = {vx, 0, 0};
        return reward_plan(s, s.position, {9, 0, 1.5}, 1.0, c.make(), g, 0.3, false).term("speed").raw;
    };
    for (double dv : {0.1, 0.5, 1.0}) {
        EXPECT_LT(speed_term(g[7] + dv), 0.0);
        EXPECT_LT(speed_term(g[7] - dv), 0.0);
    }
}

TEST(Rewards, BreakdownsSumToTotals) {
    const Ctx c;
    for (int i = 0; i < 200; ++i) {
        QuadState s = at({0.1 * i, -0.05 * i, 1 + 0.01 * i});
        s.velocity = {std::sin(i), std::cos(i), 0.1};
        s.body_rate = {0.2, -0.1, std::sin(0.3 * i)};
        s.attitude = Quat::from_axis_angle({1, 2, 3}, 0.01 * i);
        const ActionContext ctx = c.make(0.3 + 0.001 * i, 0.2 + 0.001 * i);
        const Vec3 prev = s.position - Vec3(0.05, 0, 0);
        const std::vector<RewardBreakdown> all{
            reward_hover(s, {0, 0, 1}, 0.3, ctx, RewardGains::defaults(TaskKind::Hovering), 0.327),
            reward_track(s, {1, 1, 1}, 0.1, ctx, RewardGains::defaults(TaskKind::Tracking), 0.327),
            reward_hit(s, prev, {4, 0, 2}, 0.0, ctx, RewardGains::defaults(TaskKind::TargetHitting), i % 7 == 0),
            reward_avoid(s, {{0, 0, 1}, 0, 0, 0.2}, ctx, RewardGains::defaults(TaskKind::Avoidance), 0.327, i % 3),
            reward_plan(s, prev, {20, 0, 1.5}, 0.01 * i, ctx, RewardGains::defaults(TaskKind::Planning), 0.327,
                        i % 11 == 0)};
        for (const auto& r : all) EXPECT_NEAR(sum_terms(r), r.total, 1e-12);
    }
}

TEST(Rewards, SmoothBounded) {
    const RewardGains g = RewardGains::defaults(TaskKind::Hovering);
    Ctx c;
    for (int i = 0; i < 50; ++i) {
        c.a = {0.1 * i, -0.1 * i, 0.0, 0.05 * i};
        const double v = reward_hover(at({0, 0, 1}), {0, 0, 1}, 0.0, c.make(), g, 0.3).term("smooth").raw;
        EXPECT_GT(v, 0.0);
        EXPECT_LE(v, g[1]);
    }
}

TEST(Termination, Examples) {
    TerminationConfig cfg;
    cfg.max_steps = 100;
    cfg.crash_depth = 0.3;
    const QuadState s = at({0, 0, 1});
    EXPECT_EQ(termination(s, TaskKind::Hovering, {}, 100, cfg), EpisodeOutcome::TimedOut);
    EXPECT_EQ(termination(s, TaskKind::Hovering, {}, 5, cfg), EpisodeOutcome::Running);
    EXPECT_EQ(termination(s, TaskKind::Planning, {0.15, Vec3(10, 0, 1), false}, 5, cfg), EpisodeOutcome::Crashed);
    EXPECT_EQ(termination(s, TaskKind::Avoidance, {0.15, std::nullopt, false}, 5, cfg), EpisodeOutcome::Crashed);
    EXPECT_EQ(termination(at({11, 0, 1}), TaskKind::Hovering, {}, 5, cfg), EpisodeOutcome::Crashed);
    QuadState flipped = s;
    flipped.attitude = Quat::from_axis_angle({1, 0, 0}, 1.5);
    EXPECT_EQ(termination(flipped, TaskKind::Hovering, {}, 5, cfg), EpisodeOutcome::Crashed);
    EXPECT_EQ(termination(s, TaskKind::Planning, {1.0, Vec3(0.3, 0, 1), false}, 5, cfg), EpisodeOutcome::GoalReached);
    EXPECT_EQ(termination(s, TaskKind::Avoidance, {1.0, std::nullopt, true}, 5, cfg), EpisodeOutcome::Crashed);
}

TEST(Spawn, BalloonInsideBounds) {
    CounterRng rng(1, 0, 0, StreamPurpose::Reset);
    const Vec3 lo{-2, -2, 0.5}, hi{2, 2, 2.5};
    for (int i = 0; i < 10000; ++i) {
        const Vec3 b = spawn_balloon(rng, lo, hi);
        EXPECT_TRUE((b.array() >= lo.array()).all() && (b.array() <= hi.array()).all());
    }
}

TEST(Spawn, ProjectileSpeedAndBallisticHit) {
    const Vec3 g{0, 0, -9.81};
    const Vec3 aim{0, 0, 1};
    ProjectileSpec spec;
    CounterRng rng(2, 0, 0, StreamPurpose::Reset);
    for (int i = 0; i < 2000; ++i) {
        const Projectile p = spawn_projectile(rng, aim, spec, g);
        const double speed = p.velocity.norm();
        EXPECT_GE(speed, 4.0 - 1e-9);
        EXPECT_LE(speed, 8.0 + 1e-9);
        EXPECT_NEAR((p.position - aim).norm(), spec.distance, 1e-9);
        // Closed-form ballistic position at the reported flight time.
        const double t = p.flight_time;
        const Vec3 at_t = p.position + p.velocity * t + 0.5 * g * t * t;
        EXPECT_LT((at_t - aim).norm(), 1e-9);
    }
}

TEST(Spawn, InterceptRejectsSlowThrows) {
    EXPECT_FALSE(ballistic_intercept({20, 0, 0}, 4.0, {0, 0, -9.81}).has_value());
    EXPECT_TRUE(ballistic_intercept({2, 0, 0}, 8.0, {0, 0, -9.81}).has_value());
}

TEST(Playback, Examples) {
    TemporalMargin off;
    CounterRng rng(3, 0, 0, StreamPurpose::Reset);
    const double o = draw_playback_offset(rng, off);
    EXPECT_EQ(o, 0.0);
    EXPECT_EQ(trajectory_playback(2.5, o), 2.5);
    for (double t : {0.0, 1.0, 7.3}) EXPECT_DOUBLE_EQ(t - trajectory_playback(t, 0.3), 0.3);
    EXPECT_EQ(trajectory_playback(1.0, -0.4), 1.0);
}

TEST(Playback, RectifiedNormalMean) {
    // E[max(0, X)] for X ~ N(μ, σ²) is μΦ(μ/σ) + σφ(μ/σ).
    const TemporalMargin m{true, 0.3, 0.5};
    const double z = m.mean / m.stddev;
    const double Phi = 0.5 * std::erfc(-z / std::sqrt(2.0));
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi);
    const double expected = m.mean * Phi + m.stddev * phi;
    const int n = 10000;
    double sum = 0.0, sum2 = 0.0;
    for (int e = 0; e < n; ++e) {
        CounterRng rng(42, 0, static_cast<std::uint64_t>(e), StreamPurpose::Reset);
        const double lag = 5.0 - trajectory_playback(5.0, draw_playback_offset(rng, m));
        sum += lag;
        sum2 += lag * lag;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    EXPECT_NEAR(mean, expected, 4 * se);
}
