#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ngp/core/error.hpp"
#include "ngp/geometry/mesh.hpp"

namespace ngp {

/// Procedural shape family: a superellipsoid body with optional box and
/// cylinder parts. Every latent coordinate enters through smooth bounded maps,
/// so nearby codes give nearby meshes.
struct ShapeFamilyConfig {
    int latent_dim = 8;
    Vec3 body_scale{1.0, 1.0, 1.0};
    bool box_part = false;
    bool cylinder_parts = false;
    // Cylinders lie along x (wheels) or y (legs).
    bool cylinders_vertical = false;
    double radius = 0.5;  // max vertex norm after normalization
    int rings = 24;
    int segments = 48;
    int cylinder_segments = 16;

    static ShapeFamilyConfig car() {
        ShapeFamilyConfig c;
        c.body_scale = {0.9, 0.45, 1.8};
        c.box_part = true;
        c.cylinder_parts = true;
        return c;
    }
    static ShapeFamilyConfig chair() {
        ShapeFamilyConfig c;
        c.body_scale = {1.0, 0.18, 1.0};
        c.box_part = true;
        c.cylinder_parts = true;
        c.cylinders_vertical = true;
        return c;
    }
    static ShapeFamilyConfig named(const std::string& name) {
        if (name == "car") return car();
        if (name == "chair") return chair();
        if (name == "blob") return {};
        throw InvalidArgument("unknown shape family '" + name + "'");
    }
};

enum ShapePart : int { kBodyPart = 0, kBoxPart = 1, kCylinderPart = 2 };

namespace detail {

inline double signed_pow(double base, double e) { return std::copysign(std::pow(std::abs(base), e), base); }

inline TriangleMesh superellipsoid(const Vec3& scale, double e_lat, double e_lon, double taper, int rings,
                                   int segments) {
    TriangleMesh m = uv_sphere(1.0, rings, segments);
    for (std::size_t k = 0; k < m.vertices.size(); ++k) {
        const Vec3 s = m.vertices[k];
        const double eta = std::asin(std::clamp(s.y(), -1.0, 1.0));
        const double om = std::atan2(s.x(), s.z());
        const double ce = signed_pow(std::cos(eta), e_lat);
        const double y = signed_pow(std::sin(eta), e_lat);
        const double x = ce * signed_pow(std::sin(om), e_lon);
        const double z = ce * signed_pow(std::cos(om), e_lon);
        const double tp = 1.0 + taper * y;
        m.vertices[k] = Vec3(scale.x() * x * tp, scale.y() * y, scale.z() * z * tp);
    }
    return m;
}

inline TriangleMesh box(const Vec3& lo, const Vec3& hi) {
    TriangleMesh m;
    for (int k = 0; k < 8; ++k) {
        m.vertices.emplace_back((k & 1) ? hi.x() : lo.x(), (k & 2) ? hi.y() : lo.y(), (k & 4) ? hi.z() : lo.z());
    }
    // Outward winding per face.
    const int quads[6][4] = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
    for (const auto& q : quads) {
        m.triangles.push_back({q[0], q[1], q[2]});
        m.triangles.push_back({q[0], q[2], q[3]});
    }
    m.parts.assign(m.triangles.size(), 0);
    return m;
}

/// Closed cylinder along the local axis `axis` (0 = x, 1 = y) with capped ends.
inline TriangleMesh cylinder(const Vec3& c, double radius, double half_len, int axis, int segments) {
    TriangleMesh m;
    auto place = [&](double a, double r0, double r1) {
        Vec3 p = c;
        if (axis == 0) {
            p += Vec3(a, r0, r1);
        } else {
            p += Vec3(r1, a, r0);
        }
        return p;
    };
    for (int end = 0; end < 2; ++end) {
        const double a = end == 0 ? -half_len : half_len;
        for (int j = 0; j < segments; ++j) {
            const double om = 2 * M_PI * j / segments;
            m.vertices.push_back(place(a, radius * std::cos(om), radius * std::sin(om)));
        }
    }
    const int c0 = static_cast<int>(m.vertices.size());
    m.vertices.push_back(place(-half_len, 0, 0));
    m.vertices.push_back(place(half_len, 0, 0));
    for (int j = 0; j < segments; ++j) {
        const int j1 = (j + 1) % segments;
        m.triangles.push_back({j, j1, segments + j1});
        m.triangles.push_back({j, segments + j1, segments + j});
        m.triangles.push_back({c0, j1, j});
        m.triangles.push_back({c0 + 1, segments + j, segments + j1});
    }
    m.parts.assign(m.triangles.size(), 0);
    return m;
}

/// Flips triangle winding where needed so face normals point away from the
/// component centroid (all components are star-shaped about it).
inline void orient_outward(TriangleMesh& m) {
    Vec3 c = Vec3::Zero();
    for (const auto& v : m.vertices) c += v;
    c /= static_cast<double>(m.vertices.size());
    for (auto& t : m.triangles) {
        const Vec3 a = m.vertices[t[0]], b = m.vertices[t[1]], d = m.vertices[t[2]];
        if ((b - a).cross(d - a).dot((a + b + d) / 3.0 - c) < 0) std::swap(t[1], t[2]);
    }
}

} // namespace detail

/// Maps a shape code to a closed mesh inside the sphere of radius
/// `cfg.radius`. A zero code with no parts and unit body scale is a sphere.
inline TriangleMesh sample_coarse_shape(const std::vector<double>& z, const ShapeFamilyConfig& cfg = {}) {
    if (static_cast<int>(z.size()) != cfg.latent_dim) {
        throw InvalidArgument("sample_coarse_shape: expected latent of size " + std::to_string(cfg.latent_dim) +
                              ", got " + std::to_string(z.size()));
    }
    for (double v : z) {
        if (!std::isfinite(v)) throw NonFiniteError("sample_coarse_shape: non-finite latent");
    }
    auto at = [&](int i) { return i < static_cast<int>(z.size()) ? z[static_cast<std::size_t>(i)] : 0.0; };
    auto squash = [](double v, double range) { return range * std::tanh(v / 2.0); };

    const double e_lat = std::exp(squash(at(0), 0.9));
    const double e_lon = std::exp(squash(at(1), 0.9));
    const Vec3 scale(cfg.body_scale.x() * std::exp(squash(at(2), 0.35)),
                     cfg.body_scale.y() * std::exp(squash(at(3), 0.35)),
                     cfg.body_scale.z() * std::exp(squash(at(4), 0.35)));
    const double taper = squash(at(5), 0.4);

    TriangleMesh mesh;
    TriangleMesh body = detail::superellipsoid(scale, e_lat, e_lon, taper, cfg.rings, cfg.segments);
    detail::orient_outward(body);
    mesh.append(body, kBodyPart);

    if (cfg.box_part) {
        // Cabin on top for cars, backrest at the rear for chairs.
        const double s = std::exp(squash(at(6), 0.3));
        Vec3 lo, hi;
        if (cfg.cylinders_vertical) {
            lo = {-0.9 * scale.x(), 0.5 * scale.y(), -0.95 * scale.z()};
            hi = {0.9 * scale.x(), scale.y() + 1.1 * s * scale.x(), -0.75 * scale.z()};
        } else {
            lo = {-0.6 * scale.x(), 0.4 * scale.y(), -0.45 * s * scale.z()};
            hi = {0.6 * scale.x(), (1.1 + 0.5 * s) * scale.y(), 0.3 * s * scale.z()};
        }
        TriangleMesh b = detail::box(lo, hi);
        detail::orient_outward(b);
        mesh.append(b, kBoxPart);
    }
    if (cfg.cylinder_parts) {
        const double r_scale = std::exp(squash(at(7), 0.3));
        for (int k = 0; k < 4; ++k) {
            const double sx = (k & 1) ? 1.0 : -1.0;
            const double sz = (k & 2) ? 1.0 : -1.0;
            TriangleMesh c;
            if (cfg.cylinders_vertical) {
                const double len = 1.6 * scale.y() + 0.8;
                c = detail::cylinder(Vec3(0.7 * sx * scale.x(), -0.5 * scale.y() - len / 2, 0.7 * sz * scale.z()),
                                     0.07 * r_scale, len / 2, 1, cfg.cylinder_segments);
            } else {
                const double r = 0.28 * r_scale * scale.y() + 0.1;
                c = detail::cylinder(Vec3(0.85 * sx * scale.x(), -0.55 * scale.y(), 0.6 * sz * scale.z()), r,
                                     0.15 * scale.x() + 0.05, 0, cfg.cylinder_segments);
            }
            detail::orient_outward(c);
            mesh.append(c, kCylinderPart);
        }
    }

    const double n = mesh.max_vertex_norm();
    for (auto& v : mesh.vertices) v *= cfg.radius / n;
    return mesh;
}

} // namespace ngp
