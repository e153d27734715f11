#pragma once

#include <cmath>
#include <vector>

#include "ngp/core/error.hpp"
#include "ngp/core/rng.hpp"
#include "ngp/geometry/camera.hpp"
#include "ngp/geometry/maps.hpp"

namespace ngp {

/// Directional light; `direction` points from the surface toward the light.
struct DirectionalLight {
    Vec3 direction{0, 0, 1};
    double intensity = 1.0;
    Vec3 color{1, 1, 1};
};

struct LightRig {
    std::vector<DirectionalLight> lights;

    bool empty() const { return lights.empty(); }

    LightRig scaled(double factor) const {
        LightRig r = *this;
        for (auto& l : r.lights) l.intensity *= factor;
        return r;
    }
};

inline void validate_rig(const LightRig& rig, const char* op) {
    if (rig.empty()) throw InvalidArgument(std::string(op) + ": empty light rig");
    for (const auto& l : rig.lights) {
        if (std::abs(l.direction.norm() - 1.0) > 1e-6) throw InvalidArgument(std::string(op) + ": light direction not unit");
        if (!(l.intensity >= 0)) throw InvalidArgument(std::string(op) + ": negative light intensity");
    }
}

/// Unit direction at the given azimuth (about +y, 0 = +z) and elevation above
/// the horizontal plane.
inline Vec3 direction_from_angles(double azimuth_deg, double elevation_deg) {
    const double az = deg2rad(azimuth_deg), el = deg2rad(elevation_deg);
    return {std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az)};
}

/// Four overhead white lights at azimuths 0/90/180/270 degrees, elevation
/// 60 degrees, unit intensity. World frame.
inline LightRig training_rig() {
    LightRig rig;
    for (double az : {0.0, 90.0, 180.0, 270.0}) rig.lights.push_back({direction_from_angles(az, 60.0), 1.0, {1, 1, 1}});
    return rig;
}

/// One random extra light: uniform azimuth, elevation in [30, 80] degrees,
/// intensity in [0.2, 0.6], white.
inline DirectionalLight random_extra_light(Rng& rng) {
    const double az = rng.uniform(0.0, 360.0);
    const double el = rng.uniform(30.0, 80.0);
    return {direction_from_angles(az, el), rng.uniform(0.2, 0.6), {1, 1, 1}};
}

/// Re-expresses world-frame light directions in the view frame of `cam`.
inline LightRig rig_to_view(const LightRig& world, const Camera& cam) {
    LightRig out = world;
    for (auto& l : out.lights) l.direction = world_to_view(cam, l.direction).normalized();
    return out;
}

/// Diffuse/specular weights per object category.
struct ShadingProfile {
    double k_d = 0.6;
    double k_s = 0.4;

    static ShadingProfile car() { return {0.6, 0.4}; }
    static ShadingProfile chair() { return {0.8, 0.2}; }
    static ShadingProfile named(const std::string& name) {
        if (name == "car") return car();
        if (name == "chair") return chair();
        throw InvalidArgument("unknown shading profile '" + name + "'");
    }
};

constexpr double kDefaultRoughness = 4.0;

} // namespace ngp
