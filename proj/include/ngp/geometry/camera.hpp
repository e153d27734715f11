#pragma once

#include <cmath>

#include "ngp/core/error.hpp"
#include "ngp/core/rng.hpp"
#include "ngp/geometry/mesh.hpp"

namespace ngp {

inline double deg2rad(double d) { return d * M_PI / 180.0; }

/// Pinhole camera. Extrinsics map world points into a camera frame with x to
/// the right, y down and z forward; depth is the camera-frame z. Pixel (row i,
/// col j) has its center at continuous coordinates (j + 0.5, i + 0.5).
struct Camera {
    Mat3 K = Mat3::Identity();
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();
    int width = 64;
    int height = 64;
    double focal_mm = 50.0;

    Vec3 center() const { return -R.transpose() * t; }
    Vec3 to_camera(const Vec3& p_world) const { return R * p_world + t; }
    Vec3 to_world(const Vec3& p_cam) const { return R.transpose() * (p_cam - t); }

    /// Continuous pixel coordinates (u, v) of a camera-frame point.
    Vec2 project_camera(const Vec3& pc) const {
        const Vec3 q = K * pc;
        return {q.x() / q.z(), q.y() / q.z()};
    }
    Vec2 project(const Vec3& p_world) const { return project_camera(to_camera(p_world)); }

    /// Camera-frame ray through (u, v), scaled so that its z component is 1.
    Vec3 ray(double u, double v) const {
        const double det = K.determinant();
        if (!(std::abs(det) > 1e-12)) throw InvalidArgument("camera: singular intrinsics");
        Vec3 r = K.inverse() * Vec3(u, v, 1.0);
        return r / r.z();
    }
    Vec3 pixel_ray(int row, int col) const { return ray(col + 0.5, row + 0.5); }
};

/// Intrinsics for a 35 mm-equivalent focal length: the 36 mm film width maps
/// to the image width, square pixels, principal point at the image center.
inline Mat3 intrinsics_35mm(double focal_mm, int width, int height) {
    const double f = focal_mm / 36.0 * width;
    Mat3 K;
    K << f, 0, width / 2.0, 0, f, height / 2.0, 0, 0, 1;
    return K;
}

/// Roll-free camera at `eye` looking at `target`, with world +y as up.
inline Camera look_at(const Vec3& eye, const Vec3& target, int width, int height, double focal_mm) {
    const Vec3 fwd = (target - eye).normalized();
    const Vec3 up(0, 1, 0);
    Vec3 right = fwd.cross(up);
    if (right.norm() < 1e-9) throw InvalidArgument("look_at: view direction parallel to up axis");
    right.normalize();
    const Vec3 down = fwd.cross(right);
    Camera cam;
    cam.R.row(0) = right;
    cam.R.row(1) = down;
    cam.R.row(2) = fwd;
    cam.t = -cam.R * eye;
    cam.width = width;
    cam.height = height;
    cam.focal_mm = focal_mm;
    cam.K = intrinsics_35mm(focal_mm, width, height);
    return cam;
}

/// Viewpoint distribution: elevation theta and azimuth phi in degrees, fixed
/// distance to the origin.
struct ViewDistribution {
    double distance = 2.0;
    double theta_min = 0.0;
    double theta_max = 20.0;
    double phi_min = -90.0;
    double phi_max = 90.0;
    double focal_mm = 50.0;
    int width = 64;
    int height = 64;
};

/// Camera position for elevation theta and azimuth phi; theta = phi = 0 puts
/// the camera on +z.
inline Vec3 orbit_position(double theta_deg, double phi_deg, double distance) {
    const double th = deg2rad(theta_deg), ph = deg2rad(phi_deg);
    return {distance * std::cos(th) * std::sin(ph), distance * std::sin(th), distance * std::cos(th) * std::cos(ph)};
}

inline Camera orbit_camera(double theta_deg, double phi_deg, const ViewDistribution& dist) {
    return look_at(orbit_position(theta_deg, phi_deg, dist.distance), Vec3::Zero(), dist.width, dist.height,
                   dist.focal_mm);
}

struct SampledView {
    double theta_deg;
    double phi_deg;
    Camera camera;
};

inline SampledView sample_view(Rng& rng, const ViewDistribution& dist) {
    if (!(dist.theta_min <= dist.theta_max) || !(dist.phi_min <= dist.phi_max) || !(dist.distance > 0) ||
        dist.theta_max >= 90.0 || dist.theta_min <= -90.0) {
        throw InvalidArgument("sample_camera: invalid view ranges");
    }
    const double th = rng.uniform(dist.theta_min, dist.theta_max);
    const double ph = rng.uniform(dist.phi_min, dist.phi_max);
    return {th, ph, orbit_camera(th, ph, dist)};
}

inline Camera sample_camera(Rng& rng, const ViewDistribution& dist) { return sample_view(rng, dist).camera; }

} // namespace ngp
