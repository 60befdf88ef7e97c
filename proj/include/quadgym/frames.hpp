#pragma once

// Frame conversions and per-task observation builders.
//
// Observation layouts (index tables live in docs/obs-layout.md):
//   hover / target hitting  18 = R(9) | p_t - p (3) | v_t - v (3) | ω_t - ω (3)
//   tracking                48 = R(9) | p (3) | v (3) | ω (3) | ref window 10×3
//   avoidance / planning    46 = goal dir (3) | euler (3) | v_E (3) | ω_E (3) | last action (4) | depth feature (30)

#include "quadgym/dynamics.hpp"
#include "quadgym/math.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace quadgym {

inline constexpr std::size_t kHoverObsDim = 18;
inline constexpr std::size_t kTrackObsDim = 48;
inline constexpr std::size_t kEgoStateDim = 16;
inline constexpr std::size_t kDepthFeatureDim = 30;
inline constexpr std::size_t kEgoObsDim = kEgoStateDim + kDepthFeatureDim;
inline constexpr std::size_t kRefWindowPoints = 10;

using Observation = std::vector<double>;
using RefWindow = std::array<Vec3, kRefWindowPoints>;

/// Yaw-only frame: z is world up, x is the horizontal projection of body x.
struct EgoFrame {
    double yaw = 0.0;

    /// `fallback_yaw` is used when body x is (nearly) vertical.
    static EgoFrame from_attitude(const Quat& q, double fallback_yaw = 0.0) {
        const Vec3 bx = rotate_vec(q, Vec3::UnitX());
        if (std::hypot(bx.x(), bx.y()) < 1e-9) return {fallback_yaw};
        return {std::atan2(bx.y(), bx.x())};
    }

    Vec3 x_axis() const { return {std::cos(yaw), std::sin(yaw), 0.0}; }

    Vec3 to_ego(const Vec3& v_world) const {
        const double c = std::cos(yaw), s = std::sin(yaw);
        return {c * v_world.x() + s * v_world.y(), -s * v_world.x() + c * v_world.y(), v_world.z()};
    }
};

inline Vec3 world_to_ego(const Quat& q, const Vec3& v_world) { return EgoFrame::from_attitude(q).to_ego(v_world); }

/// Target for the differential hover observation.
struct TargetState {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    Vec3 body_rate = Vec3::Zero();
};

namespace detail {
inline void append(Observation& o, const Vec3& v) { o.insert(o.end(), {v.x(), v.y(), v.z()}); }
inline void append_rot(Observation& o, const Quat& q) {
    const auto flat = flatten_rot(rot_from_quat(q));
    o.insert(o.end(), flat.begin(), flat.end());
}
}  // namespace detail

/// Current rotation plus target-minus-current position, velocity and rate.
inline Observation obs_hover(const QuadState& s, const TargetState& target) {
    Observation o;
    o.reserve(kHoverObsDim);
    detail::append_rot(o, s.attitude);
    detail::append(o, target.position - s.position);
    detail::append(o, target.velocity - s.velocity);
    detail::append(o, target.body_rate - s.body_rate);
    return o;
}

/// Absolute state plus the upcoming reference points, earliest first.
inline Observation obs_track(const QuadState& s, const RefWindow& window) {
    Observation o;
    o.reserve(kTrackObsDim);
    detail::append_rot(o, s.attitude);
    detail::append(o, s.position);
    detail::append(o, s.velocity);
    detail::append(o, s.body_rate);
    for (const Vec3& p : window) detail::append(o, p);
    return o;
}

inline Observation obs_ego(const QuadState& s, const Vec3& goal, std::span<const double> last_action,
                           std::span<const double> depth_feature) {
    if (depth_feature.size() != kDepthFeatureDim) throw std::invalid_argument("obs_ego: depth feature must have 30 entries");
    if (last_action.size() < 4) throw std::invalid_argument("obs_ego: last action needs 4 entries");
    const EgoFrame ego = EgoFrame::from_attitude(s.attitude);
    const Vec3 to_goal = ego.to_ego(goal - s.position);
    const double dist = to_goal.norm();
    const Vec3 dir = dist > 1e-12 ? Vec3(to_goal / dist) : Vec3::Zero();
    const Vec3 euler = euler_zyx(s.attitude, ego.yaw);
    const Vec3 rate_ego = ego.to_ego(rotate_vec(s.attitude, s.body_rate));

    Observation o;
    o.reserve(kEgoObsDim);
    detail::append(o, dir);
    detail::append(o, euler);
    detail::append(o, ego.to_ego(s.velocity));
    detail::append(o, rate_ego);
    o.insert(o.end(), last_action.begin(), last_action.begin() + 4);
    o.insert(o.end(), depth_feature.begin(), depth_feature.end());
    return o;
}

/// Samples traj(t + i·spacing) for i = 1..10.
inline RefWindow ref_window(const std::function<Vec3(double)>& traj, double t, double spacing) {
    if (!(spacing > 0.0)) throw std::invalid_argument("ref_window: spacing must be positive");
    RefWindow w;
    for (std::size_t i = 0; i < kRefWindowPoints; ++i) w[i] = traj(t + static_cast<double>(i + 1) * spacing);
    return w;
}

/// Adaptive average pooling of a row-major depth image onto a grid_rows ×
/// grid_cols grid, normalized by `max_range`. Bin i spans
/// [floor(i·H/n), ceil((i+1)·H/n)) as in the usual adaptive-pool definition.
inline std::vector<double> depth_feature_pool(std::span<const float> pixels, std::size_t height, std::size_t width,
                                              double max_range, std::size_t grid_rows = 5, std::size_t grid_cols = 6) {
    if (pixels.size() != height * width) throw std::invalid_argument("depth_feature_pool: size mismatch");
    if (grid_rows == 0 || grid_cols == 0 || grid_rows > height || grid_cols > width)
        throw std::invalid_argument("depth_feature_pool: bad grid");
    std::vector<double> out;
    out.reserve(grid_rows * grid_cols);
    for (std::size_t gr = 0; gr < grid_rows; ++gr) {
        const std::size_t r0 = gr * height / grid_rows;
        const std::size_t r1 = ((gr + 1) * height + grid_rows - 1) / grid_rows;
        for (std::size_t gc = 0; gc < grid_cols; ++gc) {
            const std::size_t c0 = gc * width / grid_cols;
            const std::size_t c1 = ((gc + 1) * width + grid_cols - 1) / grid_cols;
            double sum = 0.0;
            for (std::size_t r = r0; r < r1; ++r)
                for (std::size_t c = c0; c < c1; ++c) sum += pixels[r * width + c];
            out.push_back(sum / static_cast<double>((r1 - r0) * (c1 - c0)) / max_range);
        }
    }
    return out;
}

}  // namespace quadgym
