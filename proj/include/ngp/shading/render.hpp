#pragma once

#include "ngp/geometry/maps.hpp"
#include "ngp/shading/lights.hpp"
#include "ngp/tensor/ops.hpp"

namespace ngp {

/// Per-view reflectance maps, batched [B,C,H,W]: normal (3, view frame),
/// diffuse and specular albedo (3), roughness (1), mask (1). An undefined mask
/// means every pixel is shaded.
template <typename T>
struct ReflectanceMaps {
    Tensor<T> normal;
    Tensor<T> diffuse_albedo;
    Tensor<T> specular_albedo;
    Tensor<T> roughness;
    Tensor<T> mask;
};

namespace detail {

template <typename T>
Tensor<T> channel_vector(const Vec3& v) {
    return Tensor<T>::from_data({1, 3, 1, 1}, {static_cast<T>(v.x()), static_cast<T>(v.y()), static_cast<T>(v.z())});
}

/// clamp_min(N . dir, 0) as [B,1,H,W].
template <typename T>
Tensor<T> cosine(const Tensor<T>& N, const Vec3& dir) {
    return clamp_min(sum(mul(N, channel_vector<T>(dir)), {1}, true), T(0));
}

template <typename T>
Tensor<T> diffuse_term(const Tensor<T>& N, const Tensor<T>& albedo, const DirectionalLight& l, double k_d) {
    return mul(mul(cosine(N, l.direction), albedo), channel_vector<T>(k_d * l.intensity * l.color));
}

template <typename T>
Tensor<T> apply_mask(const Tensor<T>& img, const Tensor<T>& mask) {
    return mask.defined() ? mul(img, mask) : img;
}

inline void expect_normal_shape(const Shape& s, const char* op) {
    if (s.size() != 4 || s[1] != 3) throw ShapeError(std::string(op) + ": normal map must be [B,3,H,W], got " + to_string(s));
}

} // namespace detail

/// Blinn-Phong before the final clamp: for each light,
/// k_d max(N.L,0) I_da + k_s max(N.H,0)^alpha I_sa, scaled by intensity and
/// color, summed over lights. H is the half vector of L and `view`.
template <typename T>
Tensor<T> render_blinn_phong_preclamp(const ReflectanceMaps<T>& maps, const LightRig& rig, const Vec3& view, double k_d,
                                      double k_s) {
    validate_rig(rig, "render_blinn_phong");
    detail::expect_normal_shape(maps.normal.shape(), "render_blinn_phong");
    Tensor<T> total;
    for (const auto& l : rig.lights) {
        const Vec3 h = (l.direction + view).normalized();
        auto spec = mul(mul(pow(detail::cosine(maps.normal, h), maps.roughness), maps.specular_albedo),
                        detail::channel_vector<T>(k_s * l.intensity * l.color));
        auto term = add(detail::diffuse_term(maps.normal, maps.diffuse_albedo, l, k_d), spec);
        total = total.defined() ? add(total, term) : term;
    }
    return detail::apply_mask(total, maps.mask);
}

template <typename T>
Tensor<T> render_blinn_phong(const ReflectanceMaps<T>& maps, const LightRig& rig, const Vec3& view, double k_d,
                             double k_s) {
    return clamp(render_blinn_phong_preclamp(maps, rig, view, k_d, k_s), T(0), T(1));
}

/// Diffuse component only; equals the full renderer with k_s = 0.
template <typename T>
Tensor<T> render_diffuse_preclamp(const Tensor<T>& N, const Tensor<T>& albedo, const LightRig& rig, double k_d,
                                  const Tensor<T>& mask = {}) {
    validate_rig(rig, "render_diffuse");
    detail::expect_normal_shape(N.shape(), "render_diffuse");
    if (albedo.shape() != N.shape()) {
        throw ShapeError("render_diffuse: albedo " + to_string(albedo.shape()) + " vs normal " + to_string(N.shape()));
    }
    Tensor<T> total;
    for (const auto& l : rig.lights) {
        // The zero specular term keeps this bit-identical to the full renderer.
        auto term = add(detail::diffuse_term(N, albedo, l, k_d), Tensor<T>::zeros({1, 1, 1, 1}));
        total = total.defined() ? add(total, term) : term;
    }
    return detail::apply_mask(total, mask);
}

template <typename T>
Tensor<T> render_diffuse(const Tensor<T>& N, const Tensor<T>& albedo, const LightRig& rig, double k_d,
                         const Tensor<T>& mask = {}) {
    return clamp(render_diffuse_preclamp(N, albedo, rig, k_d, mask), T(0), T(1));
}

/// White specular albedo on the foreground of a depth batch [B,1,H,W].
template <typename T>
Tensor<T> constant_specular_albedo(const Tensor<T>& depth) {
    auto m = depth_mask(depth);
    return concat<T>({m, m, m}, static_cast<std::int64_t>(depth.ndim()) - 3);
}

/// Constant roughness on the foreground, 0 on background.
template <typename T>
Tensor<T> constant_roughness(const Tensor<T>& depth, T alpha = T(kDefaultRoughness)) {
    return mul(depth_mask(depth), Tensor<T>::scalar(alpha));
}

/// Additive blend clamped to [0,1].
template <typename T>
Tensor<T> blend(const Tensor<T>& diffuse_img, const Tensor<T>& specular) {
    if (diffuse_img.shape() != specular.shape()) {
        throw ShapeError("blend: " + to_string(diffuse_img.shape()) + " vs " + to_string(specular.shape()));
    }
    return clamp(add(diffuse_img, specular), T(0), T(1));
}

} // namespace ngp
