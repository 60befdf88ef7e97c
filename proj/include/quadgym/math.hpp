#pragma once

// Quaternion and rotation helpers shared by the simulator.
//
// Convention: Hamilton product, scalar-first (w, x, y, z), quaternions map
// body-frame vectors into the world frame. Frames are right-handed with
// world z pointing up.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace quadgym {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

struct Quat {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    static Quat identity() { return {}; }

    static Quat from_axis_angle(const Vec3& axis, double angle) {
        const Vec3 n = axis.normalized();
        const double s = std::sin(0.5 * angle);
        return {std::cos(0.5 * angle), n.x() * s, n.y() * s, n.z() * s};
    }

    static Quat from_yaw(double yaw) { return {std::cos(0.5 * yaw), 0.0, 0.0, std::sin(0.5 * yaw)}; }

    Vec3 vec() const { return {x, y, z}; }
    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
    Quat conjugate() const { return {w, -x, -y, -z}; }
    Quat operator-() const { return {-w, -x, -y, -z}; }

    Quat normalized() const {
        const double n = norm();
        return {w / n, x / n, y / n, z / n};
    }

    bool operator==(const Quat&) const = default;
};

inline Quat operator+(const Quat& a, const Quat& b) { return {a.w + b.w, a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Quat operator*(double s, const Quat& q) { return {s * q.w, s * q.x, s * q.y, s * q.z}; }

/// Hamilton product a ⊗ b.
inline Quat quat_mul(const Quat& a, const Quat& b) {
    return {
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    };
}

/// Imaginary part of q ⊗ (0, v) ⊗ q*. Expects a unit quaternion.
inline Vec3 rotate_vec(const Quat& q, const Vec3& v) {
    const Quat p{0.0, v.x(), v.y(), v.z()};
    const Quat r = quat_mul(quat_mul(q, p), q.conjugate());
    return {r.x, r.y, r.z};
}

inline Mat3 rot_from_quat(const Quat& q) {
    const double ww = q.w * q.w, xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
    const double xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
    const double wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
    Mat3 r;
    r << ww + xx - yy - zz, 2.0 * (xy - wz), 2.0 * (xz + wy),
        2.0 * (xy + wz), ww - xx + yy - zz, 2.0 * (yz - wx),
        2.0 * (xz - wy), 2.0 * (yz + wx), ww - xx - yy + zz;
    return r;
}

/// Row-major flattening.
inline std::array<double, 9> flatten_rot(const Mat3& r) {
    std::array<double, 9> out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[static_cast<std::size_t>(3 * i + j)] = r(i, j);
    return out;
}

/// Shepperd's method; the returned quaternion has w >= 0.
inline Quat quat_from_rot(const Mat3& r) {
    const double tr = r.trace();
    Quat q;
    if (tr > 0.0) {
        const double s = 2.0 * std::sqrt(1.0 + tr);
        q = {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s};
    } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
        q = {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s};
    } else if (r(1, 1) > r(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
        q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s};
    } else {
        const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
        q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s};
    }
    if (q.w < 0.0) q = -q;
    return q.normalized();
}

inline double wrap_pi(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

/// Intrinsic Z-Y-X angles, returned as (roll, pitch, yaw).
/// Near gimbal lock (|pitch| > 89.9 deg) yaw is unobservable and
/// `fallback_yaw` is reported instead.
inline Vec3 euler_zyx(const Quat& q, double fallback_yaw = 0.0) {
    const Mat3 r = rot_from_quat(q);
    const double sp = std::clamp(-r(2, 0), -1.0, 1.0);
    const double pitch = std::asin(sp);
    constexpr double lock = 89.9 * std::numbers::pi / 180.0;
    if (std::abs(pitch) > lock) {
        // Roll absorbs the remaining rotation about the degenerate axis.
        const double yaw = fallback_yaw;
        const double roll = sp > 0 ? wrap_pi(std::atan2(r(0, 1), r(1, 1)) + yaw)
                                   : wrap_pi(std::atan2(-r(0, 1), r(1, 1)) - yaw);
        return {roll, pitch, yaw};
    }
    return {std::atan2(r(2, 1), r(2, 2)), pitch, std::atan2(r(1, 0), r(0, 0))};
}

inline Vec3 clamp_components(const Vec3& v, double limit) {
    return v.cwiseMax(-limit).cwiseMin(limit);
}

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace quadgym
