#include "quadgym/frames.hpp"
#include "quadgym/tasks.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace quadgym;

TEST(RotFlatten, IdentityAndYaw) {
    const auto id = flatten_rot(rot_from_quat(Quat::identity()));
    EXPECT_EQ(id, (std::array<double, 9>{1, 0, 0, 0, 1, 0, 0, 0, 1}));
    const auto r = flatten_rot(rot_from_quat(Quat::from_yaw(std::numbers::pi / 2)));
    EXPECT_NEAR(r[0], 0.0, 1e-12);
    EXPECT_NEAR(r[1], -1.0, 1e-12);
    EXPECT_NEAR(r[2], 0.0, 1e-12);
}

TEST(RotFlatten, OrthonormalForRandomQuaternions) {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> n(0, 1);
    for (int i = 0; i < 1000; ++i) {
        const Quat q = Quat{n(gen), n(gen), n(gen), n(gen)}.normalized();
        const Mat3 r = rot_from_quat(q);
        EXPECT_LT((r.transpose() * r - Mat3::Identity()).norm(), 1e-12);
        EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
        const Quat back = quat_from_rot(r);
        EXPECT_NEAR(std::abs(back.w * q.w + back.x * q.x + back.y * q.y + back.z * q.z), 1.0, 1e-12);
    }
}

TEST(WorldToEgo, Examples) {
    std::mt19937_64 gen(2);
    std::normal_distribution<double> n(0, 1);
    const Vec3 g{0, 0, -9.81};
    for (int i = 0; i < 100; ++i) {
        const Quat q = Quat{n(gen), n(gen), n(gen), n(gen)}.normalized();
        EXPECT_LT((world_to_ego(q, g) - g).norm(), 1e-12);
    }
    const Vec3 v{0.4, -1.1, 0.3};
    EXPECT_EQ(world_to_ego(Quat::identity(), v), v);
    const Vec3 e = world_to_ego(Quat::from_yaw(std::numbers::pi / 2), {1, 0, 0});
    EXPECT_LT((e - Vec3(0, -1, 0)).norm(), 1e-12);
}

TEST(WorldToEgo, IgnoresRollAndPitch) {
    const Quat yaw = Quat::from_yaw(0.8);
    const Quat tilted = quat_mul(yaw, Quat::from_axis_angle({0.3, 1.0, 0}, 0.4));
    // Tilt about an axis with an x component changes heading slightly; compare
    // against the ego yaw read directly from body x.
    const Vec3 bx = rotate_vec(tilted, Vec3::UnitX());
    const double psi = std::atan2(bx.y(), bx.x());
    const Vec3 v{2, 1, -0.5};
    const Vec3 expected{std::cos(psi) * v.x() + std::sin(psi) * v.y(), -std::sin(psi) * v.x() + std::cos(psi) * v.y(),
                        v.z()};
    EXPECT_LT((world_to_ego(tilted, v) - expected).norm(), 1e-12);
}

TEST(ObsHover, AtTarget) {
    QuadState s;
    s.position = {1, 2, 3};
    s.velocity = {0.1, 0.2, 0.3};
    TargetState t{s.position, s.velocity, s.body_rate};
    const Observation o = obs_hover(s, t);
    ASSERT_EQ(o.size(), kHoverObsDim);
    const std::array<double, 9> id{1, 0, 0, 0, 1, 0, 0, 0, 1};
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(o[i], id[i]);
    for (std::size_t i = 9; i < 18; ++i) EXPECT_EQ(o[i], 0.0);
}

TEST(ObsHover, Layout) {
    QuadState s;
    s.position = {1, 0, 0};
    s.velocity = {0, 2, 0};
    s.body_rate = {0, 0, 3};
    const Observation o = obs_hover(s, TargetState{});
    EXPECT_EQ(o[9], -1.0);
    EXPECT_EQ(o[13], -2.0);
    EXPECT_EQ(o[17], -3.0);
}

TEST(ObsTrack, DimOrderingAndLemniscate) {
    const double k = lemniscate_rate_for_speed(1.0);
    auto traj = [k](double t) { return lemniscate(t, k); };
    const RefWindow w = ref_window(traj, 0.0, 0.1);
    QuadState s;
    const Observation o = obs_track(s, w);
    ASSERT_EQ(o.size(), kTrackObsDim);
    for (std::size_t i = 0; i < kRefWindowPoints; ++i) {
        const double t = 0.1 * static_cast<double>(i + 1);
        const double sn = std::sin(k * t), cs = std::cos(k * t);
        const Vec3 expected{3.0 * sn / (1.0 + cs * cs), 3.0 * sn * cs / (1.0 + cs * cs), 1.0};
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(o[18 + 3 * i + static_cast<std::size_t>(j)], expected(j), 1e-12);
    }
}

TEST(ObsEgo, Examples) {
    QuadState s;
    s.position = {1, 1, 2};
    s.attitude = Quat::from_yaw(0.6);
    const Vec3 goal = s.position + 5.0 * Vec3(std::cos(0.6), std::sin(0.6), 0.0);
    const std::array<double, 4> act{0.1, 0.2, 0.3, 0.4};
    const std::vector<double> feat(kDepthFeatureDim, 0.5);
    const Observation o = obs_ego(s, goal, act, feat);
    ASSERT_EQ(o.size(), kEgoObsDim);
    EXPECT_NEAR(o[0], 1.0, 1e-12);
    EXPECT_NEAR(o[1], 0.0, 1e-12);
    EXPECT_NEAR(o[2], 0.0, 1e-12);
    EXPECT_NEAR(o[3], 0.0, 1e-12);
    EXPECT_NEAR(o[4], 0.0, 1e-12);
    EXPECT_NEAR(o[5], 0.6, 1e-12);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(o[12 + i], act[i]);
    for (std::size_t i = 0; i < kDepthFeatureDim; ++i) EXPECT_EQ(o[16 + i], 0.5);
    EXPECT_THROW(obs_ego(s, goal, act, std::vector<double>(29)), std::invalid_argument);
}

TEST(DepthPool, ConstantImage) {
    const std::vector<float> img(120 * 212, 3.0f);
    const auto f = depth_feature_pool(img, 120, 212, 4.5);
    ASSERT_EQ(f.size(), kDepthFeatureDim);
    for (double v : f) EXPECT_NEAR(v, 3.0 / 4.5, 1e-12);
}

TEST(DepthPool, LeftRightGradientMonotone) {
    std::vector<float> img(120 * 212);
    for (std::size_t r = 0; r < 120; ++r)
        for (std::size_t c = 0; c < 212; ++c) img[r * 212 + c] = static_cast<float>(0.02 * static_cast<double>(c));
    const auto f = depth_feature_pool(img, 120, 212, 4.5);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 1; c < 6; ++c) EXPECT_GT(f[r * 6 + c], f[r * 6 + c - 1]);
}

TEST(DepthPool, MeanPreservedOnDivisibleTiling) {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<float> u(0.05f, 4.5f);
    const std::size_t h = 120, w = 210;
    std::vector<float> img(h * w);
    double total = 0.0;
    for (auto& p : img) {
        p = u(gen);
        total += p;
    }
    const auto f = depth_feature_pool(img, h, w, 1.0);
    double pooled = 0.0;
    for (double v : f) pooled += v;
    EXPECT_NEAR(pooled / static_cast<double>(f.size()), total / static_cast<double>(img.size()), 1e-6);
}

TEST(RefWindow, ConstantAndBruteForce) {
    const Vec3 c{1, 2, 3};
    const RefWindow w = ref_window([&](double) { return c; }, 4.0, 0.1);
    for (const auto& p : w) EXPECT_EQ(p, c);
    auto f = [](double t) { return Vec3(t, t * t, std::sin(t)); };
    const RefWindow r = ref_window(f, 1.5, 0.2);
    EXPECT_EQ(r[0], f(1.5 + 0.2));
    for (std::size_t i = 0; i < kRefWindowPoints; ++i) {
        const double t = 1.5 + static_cast<double>(i + 1) * 0.2;
        EXPECT_EQ(r[i], f(t));
    }
    EXPECT_THROW(ref_window(f, 0.0, 0.0), std::invalid_argument);
}
