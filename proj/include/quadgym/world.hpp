#pragma once

// Analytic scenes and a pinhole depth camera.
//
// Depth pixels store the distance along each pixel's ray to the nearest
// surface. Misses and anything beyond max_range read max_range; hits closer
// than `near` (including a camera inside an obstacle) read `near`.

#include "quadgym/math.hpp"
#include "quadgym/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace quadgym {

struct Sphere {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
};

/// Yaw-oriented box.
struct Box {
    Vec3 center = Vec3::Zero();
    Vec3 half_extents{0.5, 0.5, 0.5};
    double yaw = 0.0;
};

/// Vertical cylinder; `center` is the midpoint of its axis.
struct Cylinder {
    Vec3 center = Vec3::Zero();
    double radius = 0.1;
    double height = 1.0;
};

using Shape = std::variant<Sphere, Box, Cylinder>;

struct Primitive {
    Shape shape;
    Vec3 velocity = Vec3::Zero();
    bool ballistic = false;  ///< accelerates under gravity when true

    Vec3& center() {
        return std::visit([](auto& s) -> Vec3& { return s.center; }, shape);
    }
    const Vec3& center() const {
        return std::visit([](const auto& s) -> const Vec3& { return s.center; }, shape);
    }
    bool moving() const { return ballistic || velocity.squaredNorm() > 0.0; }
};

struct Scene {
    std::vector<Primitive> primitives;
};

struct Pose {
    Vec3 position = Vec3::Zero();
    Quat attitude = Quat::identity();
};

/// Camera frame: x along the optical axis, y left, z up.
struct CameraModel {
    int width = 212;
    int height = 120;
    double hfov = 87.0 * std::numbers::pi / 180.0;
    double vfov = 58.0 * std::numbers::pi / 180.0;
    double max_range = 4.5;
    double near = 0.05;
    Pose mount;  ///< camera pose in the body frame

    void validate() const {
        if (width <= 0 || height <= 0) throw std::invalid_argument("CameraModel: image size must be positive");
        if (!(near > 0.0 && near < max_range)) throw std::invalid_argument("CameraModel: need 0 < near < max_range");
        if (!(hfov > 0.0 && hfov < std::numbers::pi && vfov > 0.0 && vfov < std::numbers::pi))
            throw std::invalid_argument("CameraModel: fields of view must lie in (0, pi)");
    }

    /// Unit ray direction through the center of pixel (row, col), camera frame.
    Vec3 ray(int row, int col) const {
        const double u = 2.0 * (col + 0.5) / width - 1.0;
        const double v = 2.0 * (row + 0.5) / height - 1.0;
        return Vec3{1.0, -u * std::tan(0.5 * hfov), -v * std::tan(0.5 * vfov)}.normalized();
    }

    Pose world_pose(const Pose& body) const {
        return {body.position + rotate_vec(body.attitude, mount.position), quat_mul(body.attitude, mount.attitude)};
    }
};

struct DepthImage {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;  ///< row-major, meters

    DepthImage() = default;
    DepthImage(int w, int h, float fill) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    float& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
    float at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }

    bool operator==(const DepthImage&) const = default;
};

// --- intersections ---------------------------------------------------------

namespace detail {

inline constexpr double kNoHit = std::numeric_limits<double>::infinity();

inline double hit_sphere(const Sphere& s, const Vec3& o, const Vec3& d) {
    const Vec3 oc = o - s.center;
    const double b = d.dot(oc);
    const double c = oc.squaredNorm() - s.radius * s.radius;
    if (c <= 0.0) return 0.0;
    const double disc = b * b - c;
    if (disc < 0.0) return kNoHit;
    const double t = -b - std::sqrt(disc);
    return t >= 0.0 ? t : kNoHit;
}

inline Vec3 to_box_frame(const Box& b, const Vec3& v) {
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    return {c * v.x() + s * v.y(), -s * v.x() + c * v.y(), v.z()};
}

inline double hit_box(const Box& b, const Vec3& o_world, const Vec3& d_world) {
    const Vec3 o = to_box_frame(b, o_world - b.center);
    const Vec3 d = to_box_frame(b, d_world);
    double t0 = -kNoHit, t1 = kNoHit;
    for (int i = 0; i < 3; ++i) {
        const double h = b.half_extents(i);
        if (std::abs(d(i)) < 1e-15) {
            if (o(i) < -h || o(i) > h) return kNoHit;
            continue;
        }
        double ta = (-h - o(i)) / d(i), tb = (h - o(i)) / d(i);
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return kNoHit;
    }
    if (t1 < 0.0) return kNoHit;
    return std::max(t0, 0.0);
}

inline double hit_cylinder(const Cylinder& cy, const Vec3& o, const Vec3& d) {
    const double zlo = cy.center.z() - 0.5 * cy.height, zhi = cy.center.z() + 0.5 * cy.height;
    const double ox = o.x() - cy.center.x(), oy = o.y() - cy.center.y();
    const double r2 = cy.radius * cy.radius;
    if (ox * ox + oy * oy <= r2 && o.z() >= zlo && o.z() <= zhi) return 0.0;

    double best = kNoHit;
    const double a = d.x() * d.x() + d.y() * d.y();
    if (a > 1e-15) {
        const double b = ox * d.x() + oy * d.y();
        const double c = ox * ox + oy * oy - r2;
        const double disc = b * b - a * c;
        if (disc >= 0.0) {
            const double t = (-b - std::sqrt(disc)) / a;
            if (t >= 0.0) {
                const double z = o.z() + t * d.z();
                if (z >= zlo && z <= zhi) best = t;
            }
        }
    }
    if (std::abs(d.z()) > 1e-15) {
        for (double zc : {zlo, zhi}) {
            const double t = (zc - o.z()) / d.z();
            if (t < 0.0 || t >= best) continue;
            const double x = ox + t * d.x(), y = oy + t * d.y();
            if (x * x + y * y <= r2) best = t;
        }
    }
    return best;
}

}  // namespace detail

/// Distance along the unit ray to the primitive surface, +inf on a miss,
/// 0 when the origin is inside.
inline double ray_distance(const Primitive& p, const Vec3& origin, const Vec3& dir) {
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Sphere>) return detail::hit_sphere(s, origin, dir);
            else if constexpr (std::is_same_v<T, Box>) return detail::hit_box(s, origin, dir);
            else return detail::hit_cylinder(s, origin, dir);
        },
        p.shape);
}

/// Signed distance from a point to the primitive surface (negative inside).
inline double signed_distance(const Primitive& p, const Vec3& x) {
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Sphere>) {
                return (x - s.center).norm() - s.radius;
            } else if constexpr (std::is_same_v<T, Box>) {
                const Vec3 q = detail::to_box_frame(s, x - s.center).cwiseAbs() - s.half_extents;
                return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
            } else {
                const double dr = std::hypot(x.x() - s.center.x(), x.y() - s.center.y()) - s.radius;
                const double dz = std::abs(x.z() - s.center.z()) - 0.5 * s.height;
                return std::hypot(std::max(dr, 0.0), std::max(dz, 0.0)) + std::min(std::max(dr, dz), 0.0);
            }
        },
        p.shape);
}

inline double scene_distance(const Scene& scene, const Vec3& x) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : scene.primitives) best = std::min(best, signed_distance(p, x));
    return best;
}

inline DepthImage raycast(const Scene& scene, const Pose& camera_pose, const CameraModel& cam) {
    DepthImage img(cam.width, cam.height, static_cast<float>(cam.max_range));
    const Mat3 rot = rot_from_quat(camera_pose.attitude);
    for (int r = 0; r < cam.height; ++r) {
        for (int c = 0; c < cam.width; ++c) {
            const Vec3 dir = rot * cam.ray(r, c);
            double best = cam.max_range;
            for (const auto& p : scene.primitives) best = std::min(best, ray_distance(p, camera_pose.position, dir));
            img.at(r, c) = static_cast<float>(std::clamp(best, cam.near, cam.max_range));
        }
    }
    return img;
}

inline double min_depth(const DepthImage& img) {
    if (img.pixels.empty()) throw std::invalid_argument("min_depth: empty image");
    return *std::min_element(img.pixels.begin(), img.pixels.end());
}

// --- depth domain randomization --------------------------------------------

struct DepthNoiseParams {
    double mult_sigma = 0.0;    ///< σ of the multiplicative factor (1 + ε)
    double add_sigma = 0.0;     ///< σ of additive noise, m
    double blur_prob = 0.0;     ///< probability of a 3×3 box blur per image
    double scale_range = 0.0;   ///< global scale drawn from [1 - r, 1 + r]
    double offset_range = 0.0;  ///< global offset drawn from [-r, r], m
};

inline DepthImage box_blur3(const DepthImage& img) {
    DepthImage out = img;
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            double sum = 0.0;
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc)
                    sum += img.at(std::clamp(r + dr, 0, img.height - 1), std::clamp(c + dc, 0, img.width - 1));
            out.at(r, c) = static_cast<float>(sum / 9.0);
        }
    }
    return out;
}

/// Multiplicative noise, additive noise, optional blur, then a per-image
/// scale and offset; the result is re-clamped to [near, max_range].
inline DepthImage dr_depth(const DepthImage& img, CounterRng& rng, const DepthNoiseParams& p, double near,
                           double max_range) {
    DepthImage out = img;
    if (p.mult_sigma > 0.0 || p.add_sigma > 0.0) {
        for (float& px : out.pixels) {
            const double m = 1.0 + rng.normal(0.0, p.mult_sigma);
            px = static_cast<float>(px * m + rng.normal(0.0, p.add_sigma));
        }
    }
    if (p.blur_prob > 0.0 && rng.uniform(0.0, 1.0) < p.blur_prob) out = box_blur3(out);
    const double scale = p.scale_range > 0.0 ? rng.uniform(1.0 - p.scale_range, 1.0 + p.scale_range) : 1.0;
    const double offset = p.offset_range > 0.0 ? rng.uniform(-p.offset_range, p.offset_range) : 0.0;
    for (float& px : out.pixels) px = static_cast<float>(std::clamp(px * scale + offset, near, max_range));
    return out;
}

// --- scene generation -------------------------------------------------------

struct ForestSpec {
    std::size_t n_trunks = 20;
    Vec3 bounds_min{-6.0, -4.0, 0.0};  ///< trunk centers lie in [min, max] (x, y)
    Vec3 bounds_max{6.0, 4.0, 0.0};
    double radius_min = 0.10;
    double radius_max = 0.25;
    double min_clearance = 1.2;  ///< pairwise center spacing and start/goal keep-out, m
    double trunk_height = 6.0;
    Vec3 start{-8.0, 0.0, 1.5};
    Vec3 goal{8.0, 0.0, 1.5};
    std::size_t max_attempts = 20000;
};

/// Rejection sampling of vertical trunks. May return fewer than n_trunks if
/// the attempt budget runs out.
inline Scene scene_forest(CounterRng& rng, const ForestSpec& spec) {
    Scene scene;
    std::vector<Vec3> centers;
    auto planar = [](const Vec3& a, const Vec3& b) { return std::hypot(a.x() - b.x(), a.y() - b.y()); };
    for (std::size_t attempt = 0; attempt < spec.max_attempts && centers.size() < spec.n_trunks; ++attempt) {
        const double radius = rng.uniform(spec.radius_min, spec.radius_max);
        const Vec3 c{rng.uniform(spec.bounds_min.x(), spec.bounds_max.x()),
                     rng.uniform(spec.bounds_min.y(), spec.bounds_max.y()), 0.5 * spec.trunk_height};
        if (planar(c, spec.start) < spec.min_clearance + radius || planar(c, spec.goal) < spec.min_clearance + radius)
            continue;
        bool ok = true;
        for (const Vec3& other : centers)
            if (planar(c, other) < spec.min_clearance) {
                ok = false;
                break;
            }
        if (!ok) continue;
        centers.push_back(c);
        scene.primitives.push_back({Cylinder{c, radius, spec.trunk_height}, Vec3::Zero(), false});
    }
    return scene;
}

/// Moves primitives by dt. Ballistic bodies follow exact constant-gravity
/// kinematics; other moving bodies keep their velocity.
inline void advance_scene(Scene& scene, double dt, const Vec3& gravity) {
    for (auto& p : scene.primitives) {
        if (p.ballistic) {
            p.center() += p.velocity * dt + 0.5 * gravity * dt * dt;
            p.velocity += gravity * dt;
        } else if (p.moving()) {
            p.center() += p.velocity * dt;
        }
    }
}

// --- serialization -----------------------------------------------------------

inline nlohmann::json vec_to_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json scene_to_json(const Scene& scene) {
    nlohmann::json prims = nlohmann::json::array();
    for (const auto& p : scene.primitives) {
        nlohmann::json j;
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                j["center"] = vec_to_json(s.center);
                if constexpr (std::is_same_v<T, Sphere>) {
                    j["type"] = "sphere";
                    j["radius"] = s.radius;
                } else if constexpr (std::is_same_v<T, Box>) {
                    j["type"] = "box";
                    j["half_extents"] = vec_to_json(s.half_extents);
                    j["yaw"] = s.yaw;
                } else {
                    j["type"] = "cylinder";
                    j["radius"] = s.radius;
                    j["height"] = s.height;
                }
            },
            p.shape);
        j["velocity"] = vec_to_json(p.velocity);
        j["ballistic"] = p.ballistic;
        prims.push_back(std::move(j));
    }
    return {{"primitives", prims}};
}

inline Scene scene_from_json(const nlohmann::json& j) {
    Scene scene;
    for (const auto& e : j.at("primitives")) {
        const std::string type = e.at("type").get<std::string>();
        const Vec3 center = vec_from_json(e.at("center"));
        Primitive p;
        if (type == "sphere") {
            p.shape = Sphere{center, e.at("radius").get<double>()};
        } else if (type == "box") {
            p.shape = Box{center, vec_from_json(e.at("half_extents")), e.value("yaw", 0.0)};
        } else if (type == "cylinder") {
            p.shape = Cylinder{center, e.at("radius").get<double>(), e.at("height").get<double>()};
        } else {
            throw std::invalid_argument("unknown primitive type: " + type);
        }
        if (e.contains("velocity")) p.velocity = vec_from_json(e["velocity"]);
        p.ballistic = e.value("ballistic", false);
        std::visit(
            [](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                bool ok = true;
                if constexpr (std::is_same_v<T, Box>) ok = s.half_extents.minCoeff() > 0.0;
                else if constexpr (std::is_same_v<T, Cylinder>) ok = s.radius > 0.0 && s.height > 0.0;
                else ok = s.radius > 0.0;
                if (!ok) throw std::invalid_argument("primitive extents must be positive");
            },
            p.shape);
        scene.primitives.push_back(std::move(p));
    }
    return scene;
}

// Raw depth: "QDEP" | u32 width | u32 height | width·height float32, all
// little-endian, row-major.
inline constexpr std::array<char, 4> kDepthMagic{'Q', 'D', 'E', 'P'};

namespace detail {
inline void put_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("depth file truncated");
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}
}  // namespace detail

inline void write_depth_raw(std::ostream& os, const DepthImage& img) {
    os.write(kDepthMagic.data(), 4);
    detail::put_u32(os, static_cast<std::uint32_t>(img.width));
    detail::put_u32(os, static_cast<std::uint32_t>(img.height));
    for (float px : img.pixels) detail::put_u32(os, std::bit_cast<std::uint32_t>(px));
}

inline DepthImage read_depth_raw(std::istream& is) {
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), 4) || magic != kDepthMagic) throw std::runtime_error("not a raw depth file");
    const std::uint32_t w = detail::get_u32(is);
    const std::uint32_t h = detail::get_u32(is);
    if (w == 0 || h == 0 || static_cast<std::uint64_t>(w) * h > (1ULL << 26)) throw std::runtime_error("bad depth size");
    DepthImage img(static_cast<int>(w), static_cast<int>(h), 0.0f);
    for (float& px : img.pixels) px = std::bit_cast<float>(detail::get_u32(is));
    return img;
}

/// Coarse character preview: darker glyphs are closer.
inline std::string depth_ascii(const DepthImage& img, double max_range, int cols = 53, int rows = 15) {
    static constexpr std::string_view ramp = "@%#*+=-:. ";
    std::string out;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int pr = std::min(img.height - 1, r * img.height / rows + img.height / (2 * rows));
            const int pc = std::min(img.width - 1, c * img.width / cols + img.width / (2 * cols));
            const double v = std::clamp(img.at(pr, pc) / max_range, 0.0, 1.0);
            out += ramp[static_cast<std::size_t>(std::lround(v * (ramp.size() - 1)))];
        }
        out += '\n';
    }
    return out;
}

}  // namespace quadgym
