#include "quadgym/dynamics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace quadgym;

namespace {

QuadParams P() { return QuadParams::defaults(); }

Quat random_unit(std::mt19937_64& gen) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Quat{n(gen), n(gen), n(gen), n(gen)}.normalized();
}

// Rotor speed held fixed: with omega_cmd equal to the current speeds the lag
// term is zero.
Rotor4 hold(const QuadState& s) { return s.rotor_speed; }

}  // namespace

TEST(RotorWrench, HoverIsPureLift) {
    const auto p = P();
    const double wh = hover_speed(p);
    const Wrench w = rotor_wrench({wh, wh, wh, wh}, p);
    EXPECT_NEAR(w.force.z(), 4.0 * p.c_l * wh * wh, 1e-12);
    EXPECT_NEAR(w.force.head<2>().norm(), 0.0, 1e-15);
    EXPECT_NEAR(w.torque.norm(), 0.0, 1e-15);
}

TEST(RotorWrench, ZeroInput) {
    const Wrench w = rotor_wrench({0, 0, 0, 0}, P());
    EXPECT_EQ(w.force, Vec3::Zero());
    EXPECT_EQ(w.torque, Vec3::Zero());
}

TEST(RotorWrench, SingleRotorTorqueMatchesHandExpansion) {
    const auto p = P();
    for (std::size_t i = 0; i < 4; ++i) {
        Rotor4 om{0, 0, 0, 0};
        const double w = 1234.5;
        om[i] = w;
        const Wrench wr = rotor_wrench(om, p);
        const double f = p.c_l * w * w;
        const Vec3& r = p.rotor_pos[i];
        // r × (0,0,f) = (r_y f, −r_x f, 0)
        EXPECT_NEAR(wr.torque.x(), r.y() * f, 1e-12);
        EXPECT_NEAR(wr.torque.y(), -r.x() * f, 1e-12);
        EXPECT_NEAR(wr.torque.z(), p.spin_sign[i] * p.c_d * w * w, 1e-15);
        EXPECT_NEAR(wr.force.z(), f, 1e-12);
    }
}

TEST(RotorWrench, HomogeneousDegreeTwo) {
    const auto p = P();
    const Rotor4 om{500, 700, 900, 1100};
    const double s = 1.7;
    const Wrench a = rotor_wrench(om, p);
    const Wrench b = rotor_wrench({s * om[0], s * om[1], s * om[2], s * om[3]}, p);
    EXPECT_LT((b.force - s * s * a.force).norm(), 1e-12 * b.force.norm());
    EXPECT_LT((b.torque - s * s * a.torque).norm(), 1e-12 * std::max(1.0, b.torque.norm()));
}

TEST(Derivative, HoverEquilibrium) {
    const auto p = P();
    QuadState s;
    const double wh = hover_speed(p);
    s.rotor_speed = {wh, wh, wh, wh};
    const StateDerivative d = derivative(s, s.rotor_speed, p, {});
    EXPECT_LT(d.dv.norm(), 1e-12);
    EXPECT_LT(d.domega.norm(), 1e-12);
}

TEST(Derivative, FreeFall) {
    const auto p = P();
    const StateDerivative d = derivative(QuadState{}, {0, 0, 0, 0}, p, {});
    EXPECT_EQ(d.dv, p.gravity);
}

TEST(Derivative, PureYawSpinIsTorqueFree) {
    const auto p = P();
    QuadState s;
    s.body_rate = {0, 0, 3.0};
    const StateDerivative d = derivative(s, {0, 0, 0, 0}, p, {});
    EXPECT_EQ(d.domega, Vec3::Zero());
}

TEST(Derivative, MotorLagGainForm) {
    auto p = P();
    QuadState s;
    s.rotor_speed = {100, 200, 300, 400};
    const Rotor4 cmd{500, 500, 500, 500};
    const StateDerivative d = derivative(s, cmd, p, {});
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(d.drotor[i], p.motor_gain * (cmd[i] - s.rotor_speed[i]));
}

TEST(HoverSpeed, ClosedFormAndScaling) {
    auto p = P();
    const double wh = hover_speed(p);
    const Wrench w = rotor_wrench({wh, wh, wh, wh}, p);
    EXPECT_NEAR(w.force.z(), p.mass * 9.81, 1e-12);
    auto p2 = p;
    p2.c_l *= 2.0;
    EXPECT_NEAR(hover_speed(p2), wh / std::sqrt(2.0), 1e-9);
}

TEST(Step, GravityOnlyMatchesClosedForm) {
    const auto p = P();
    QuadState s;
    s.position = {1, 2, 3};
    s.velocity = {0.5, -0.25, 2.0};
    const Vec3 p0 = s.position, v0 = s.velocity;
    const double dt = 0.01;
    for (int k = 0; k < 100; ++k) s = step(s, {0, 0, 0, 0}, p, {}, dt);
    const double t = 1.0;
    EXPECT_LT((s.velocity - (v0 + p.gravity * t)).norm(), 1e-9);
    EXPECT_LT((s.position - (p0 + v0 * t + 0.5 * p.gravity * t * t)).norm(), 1e-9);
}

TEST(Step, ConstantYawRateMatchesQuaternionExponential) {
    const auto p = P();
    QuadState s;
    s.body_rate = {0, 0, std::numbers::pi};
    for (int k = 0; k < 100; ++k) s = step(s, {0, 0, 0, 0}, p, {}, 0.01);
    // q(t) = exp(½ ω t) = (cos(πt/2), 0, 0, sin(πt/2)) at t = 1.
    EXPECT_NEAR(s.attitude.w, std::cos(std::numbers::pi / 2), 1e-6);
    EXPECT_NEAR(s.attitude.z, std::sin(std::numbers::pi / 2), 1e-6);
    EXPECT_NEAR(std::abs(s.attitude.x) + std::abs(s.attitude.y), 0.0, 1e-12);
}

TEST(Step, MotorLagReachesOneMinusInverseE) {
    const auto p = P();
    const double c = 0.9 * p.omega_max;
    const double t_end = 1.0 / p.motor_gain;
    const int n = 25;
    QuadState s;
    s.position = {0, 0, 100};
    for (int k = 0; k < n; ++k) s = step(s, {c, c, c, c}, p, {}, t_end / n);
    const double expected = c * (1.0 - std::exp(-p.motor_gain * t_end));
    for (double o : s.rotor_speed) {
        EXPECT_NEAR(o, expected, 1e-6 * c);
        EXPECT_NEAR(o / c, 0.632, 0.01);
    }
}

TEST(Step, RotorSpeedClamped) {
    const auto p = P();
    QuadState s;
    s.rotor_speed = {p.omega_max, p.omega_max, p.omega_max, p.omega_max};
    const double over = 10.0 * p.omega_max;
    s = step(s, {over, over, over, over}, p, {}, 0.01);
    for (double o : s.rotor_speed) EXPECT_LE(o, p.omega_max);
    s = step(s, {-over, -over, -over, -over}, p, {}, 0.01);
    for (double o : s.rotor_speed) EXPECT_GE(o, 0.0);
}

TEST(Step, Deterministic) {
    const auto p = P();
    QuadState s;
    s.body_rate = {0.3, -0.2, 0.1};
    s.rotor_speed = {900, 950, 1000, 1050};
    const Rotor4 cmd{1000, 1000, 1000, 1000};
    const QuadState a = step(s, cmd, p, {{0.1, 0, 0}, {0, 0, 0.001}}, 0.01);
    const QuadState b = step(s, cmd, p, {{0.1, 0, 0}, {0, 0, 0.001}}, 0.01);
    EXPECT_EQ(a.position, b.position);
    EXPECT_EQ(a.attitude, b.attitude);
    EXPECT_EQ(a.velocity, b.velocity);
    EXPECT_EQ(a.body_rate, b.body_rate);
    EXPECT_EQ(a.rotor_speed, b.rotor_speed);
}

TEST(Step, DivergenceIsReported) {
    const auto p = P();
    QuadState s;
    s.velocity = {std::numeric_limits<double>::quiet_NaN(), 0, 0};
    EXPECT_THROW(step(s, {0, 0, 0, 0}, p, {}, 0.01), SimulationDiverged);
    EXPECT_THROW(step(QuadState{}, {0, 0, 0, 0}, p, {}, 0.0), std::invalid_argument);
}

TEST(Step, TorqueFreeEnergyConserved) {
    auto p = P();
    p.gravity = Vec3::Zero();
    QuadState s;
    s.body_rate = {1.2, -0.7, 2.3};
    auto energy = [&](const QuadState& x) { return 0.5 * x.body_rate.dot(p.inertia.cwiseProduct(x.body_rate)); };
    const double e0 = energy(s);
    QuadState a = s;
    for (int k = 0; k < 10000; ++k) a = step(a, hold(a), p, {}, 1e-3);
    EXPECT_LT(std::abs(energy(a) - e0) / e0, 1e-6);
    QuadState b = s;
    for (int k = 0; k < 1000; ++k) b = step(b, hold(b), p, {}, 1e-2);
    EXPECT_LT(std::abs(energy(b) - e0) / e0, 1e-4);
}

TEST(Step, LinearDragOpposesVelocity) {
    auto p = P();
    p.gravity = Vec3::Zero();
    p.linear_drag = {0.1, 0.1, 0.1};
    QuadState s;
    s.velocity = {2, 0, 0};
    const StateDerivative d = derivative(s, {0, 0, 0, 0}, p, {});
    EXPECT_NEAR(d.dv.x(), -0.1 * 2 / p.mass, 1e-12);
}

TEST(Params, Validation) {
    auto p = P();
    EXPECT_NO_THROW(p.validate());
    p.spin_sign = {1, 1, 1, -1};
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = P();
    p.mass = 0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = P();
    EXPECT_NEAR((p.rotor_pos[0] - p.rotor_pos[1]).norm(), 0.152, 1e-12);
}

TEST(Quaternion, RotateIdentityAndKnown) {
    const Vec3 v{0.3, -1.2, 2.5};
    EXPECT_EQ(rotate_vec(Quat::identity(), v), v);
    const Vec3 r = rotate_vec(Quat::from_yaw(std::numbers::pi / 2), Vec3::UnitX());
    EXPECT_LT((r - Vec3::UnitY()).norm(), 1e-12);
}

TEST(Quaternion, IsometryAndDoubleCover) {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const Quat q = random_unit(gen);
        const Vec3 v{n(gen), n(gen), n(gen)};
        EXPECT_NEAR(rotate_vec(q, v).norm(), v.norm(), 1e-12);
        EXPECT_LT((rotate_vec(q, v) - rotate_vec(-q, v)).norm(), 1e-12);
    }
}

TEST(Quaternion, MulMatchesMatrixProduct) {
    std::mt19937_64 gen(11);
    for (int i = 0; i < 200; ++i) {
        const Quat a = random_unit(gen), b = random_unit(gen);
        const Mat3 lhs = rot_from_quat(quat_mul(a, b));
        const Mat3 rhs = rot_from_quat(a) * rot_from_quat(b);
        EXPECT_LT((lhs - rhs).norm(), 1e-12);
    }
}

TEST(Quaternion, NormHeldOverLongRun) {
    const auto p = P();
    QuadState s;
    s.position = {0, 0, 0};
    s.body_rate = {0.9, -1.3, 0.4};
    auto pz = p;
    pz.gravity = Vec3::Zero();
    double worst = 0.0;
    for (int k = 0; k < 100000; ++k) {
        s = step(s, hold(s), pz, {}, 0.01);
        worst = std::max(worst, std::abs(s.attitude.norm() - 1.0));
    }
    EXPECT_LT(worst, 1e-9);
}
