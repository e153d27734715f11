#pragma once

#include <cmath>
#include <vector>

#include "ngp/core/error.hpp"
#include "ngp/geometry/camera.hpp"
#include "ngp/tensor/ops.hpp"
#include "ngp/tensor/tensor.hpp"

namespace ngp {

// Map conventions: per-view maps are [C,H,W] tensors. Normals live in the view
// frame (x right, y up, z toward the viewer), so a surface facing the camera
// has normal (0,0,1). Depth maps hold camera-frame z with 0 as background.

/// Camera frame (x right, y down, z forward) to view frame.
inline Vec3 camera_to_view(const Vec3& v) { return {v.x(), -v.y(), -v.z()}; }

/// World direction to view frame under `cam`.
inline Vec3 world_to_view(const Camera& cam, const Vec3& v) { return camera_to_view(cam.R * v); }

namespace detail {

inline void expect_single_channel(const Tensor<float>& d, const Camera& cam, const char* op) {
    if (d.numel() != static_cast<std::int64_t>(cam.width) * cam.height) {
        throw ShapeError(std::string(op) + ": depth " + to_string(d.shape()) + " does not match camera resolution " +
                         std::to_string(cam.height) + "x" + std::to_string(cam.width));
    }
}

} // namespace detail

/// 1 where depth > 0, else 0; same shape as the input.
template <typename T>
Tensor<T> depth_mask(const Tensor<T>& d) {
    std::vector<T> m(d.vec().size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = d.vec()[i] > T(0) ? T(1) : T(0);
    return Tensor<T>::from_data(d.shape(), std::move(m));
}

/// Back-projects a depth map to object space and encodes (p + 1) / 2, clamped
/// to [0,1]. Returns [3,H,W]; background is 0.
inline Tensor<float> noc_from_depth(const Tensor<float>& d, const Camera& cam) {
    detail::expect_single_channel(d, cam, "noc_from_depth");
    if (!(std::abs(cam.K.determinant()) > 1e-12)) throw InvalidArgument("noc_from_depth: singular intrinsics");
    const int H = cam.height, W = cam.width;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    std::vector<float> out(3 * plane, 0.0f);
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const std::size_t k = static_cast<std::size_t>(r) * W + c;
            const double z = d.vec()[k];
            if (!(z > 0)) continue;
            const Vec3 p = cam.to_world(z * cam.pixel_ray(r, c));
            for (int ch = 0; ch < 3; ++ch) {
                out[ch * plane + k] = static_cast<float>(std::clamp((p[ch] + 1.0) / 2.0, 0.0, 1.0));
            }
        }
    }
    return Tensor<float>::from_data({3, H, W}, std::move(out));
}

/// Inverse of the NOC encoding for one pixel value.
inline Vec3 noc_to_object(const Vec3& noc) { return 2.0 * noc - Vec3::Ones(); }

/// Per-pixel unit normals from central differences of back-projected
/// positions (one-sided where a neighbour is background). Oriented toward the
/// camera. Returns [3,H,W] in the view frame; background is 0.
inline Tensor<float> coarse_normals_from_depth(const Tensor<float>& d, const Camera& cam) {
    detail::expect_single_channel(d, cam, "coarse_normals_from_depth");
    const int H = cam.height, W = cam.width;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const auto& dv = d.vec();
    auto fg = [&](int r, int c) { return r >= 0 && r < H && c >= 0 && c < W && dv[static_cast<std::size_t>(r) * W + c] > 0; };
    auto pos = [&](int r, int c) { return Vec3(dv[static_cast<std::size_t>(r) * W + c] * cam.pixel_ray(r, c)); };
    auto diff = [&](int r, int c, int dr, int dc, bool& ok) -> Vec3 {
        const bool fwd = fg(r + dr, c + dc), bwd = fg(r - dr, c - dc);
        ok = fwd || bwd;
        if (fwd && bwd) return pos(r + dr, c + dc) - pos(r - dr, c - dc);
        if (fwd) return pos(r + dr, c + dc) - pos(r, c);
        if (bwd) return pos(r, c) - pos(r - dr, c - dc);
        return Vec3::Zero();
    };
    std::vector<float> out(3 * plane, 0.0f);
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            if (!fg(r, c)) continue;
            bool okx = false, oky = false;
            const Vec3 dx = diff(r, c, 0, 1, okx);
            const Vec3 dy = diff(r, c, 1, 0, oky);
            Vec3 n = dx.cross(dy);
            const Vec3 p = pos(r, c);
            if (!okx || !oky || n.norm() < 1e-15) {
                n = -p;  // isolated pixel: face the camera
            }
            if (n.dot(-p) < 0) n = -n;
            n = camera_to_view(n.normalized());
            const std::size_t k = static_cast<std::size_t>(r) * W + c;
            for (int ch = 0; ch < 3; ++ch) out[ch * plane + k] = static_cast<float>(n[ch]);
        }
    }
    return Tensor<float>::from_data({3, H, W}, std::move(out));
}

/// Depth normalization used as network input and output: nd = (far - d) / 2
/// with far = distance + 1, so depth in [distance-1, distance+1] maps to
/// [0,1]; background stays 0.
template <typename T>
Tensor<T> normalize_depth(const Tensor<float>& d, double distance) {
    std::vector<T> v(d.vec().size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double z = d.vec()[i];
        v[i] = z > 0 ? static_cast<T>((distance + 1.0 - z) / 2.0) : T(0);
    }
    return Tensor<T>::from_data(d.shape(), std::move(v));
}

/// World-frame ray directions (z_cam = 1 scaling) per pixel, [3,H,W].
template <typename T>
Tensor<T> world_rays(const Camera& cam) {
    const int H = cam.height, W = cam.width;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    std::vector<T> v(3 * plane);
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const Vec3 w = cam.R.transpose() * cam.pixel_ray(r, c);
            for (int ch = 0; ch < 3; ++ch) v[ch * plane + static_cast<std::size_t>(r) * W + c] = static_cast<T>(w[ch]);
        }
    }
    return Tensor<T>::from_data({3, H, W}, std::move(v));
}

/// Per-sample constants for differentiable NOC: world ray directions scaled
/// by 1/2 [B,3,H,W] and the NOC-encoded camera center (c + 1)/2 [B,3,1,1].
template <typename T>
struct ViewRays {
    Tensor<T> half_rays;
    Tensor<T> center;
};

template <typename T>
ViewRays<T> view_rays(const std::vector<Camera>& cams) {
    if (cams.empty()) throw InvalidArgument("view_rays: no cameras");
    std::vector<Tensor<T>> rays, centers;
    for (const auto& cam : cams) {
        const Vec3 c = cam.center();
        rays.push_back(reshape(mul(world_rays<T>(cam), Tensor<T>::scalar(T(0.5))), {1, 3, cam.height, cam.width}));
        centers.push_back(Tensor<T>::from_data(
            {1, 3, 1, 1}, {static_cast<T>((c.x() + 1) / 2), static_cast<T>((c.y() + 1) / 2), static_cast<T>((c.z() + 1) / 2)}));
    }
    NoGradGuard ng;
    return {concat<T>(rays, 0), concat<T>(centers, 0)};
}

/// Differentiable NOC of a normalized depth batch nd [B,1,H,W]:
/// p = d * ray + center with d = distance + 1 - 2 nd, encoded (p+1)/2 and
/// multiplied by `mask` [B,1,H,W]. Gradients flow to nd only.
template <typename T>
Tensor<T> noc_from_normalized_depth(const Tensor<T>& nd, const Tensor<T>& mask, const ViewRays<T>& rays,
                                    double distance) {
    if (nd.ndim() != 4 || nd.dim(1) != 1 || nd.dim(0) != rays.half_rays.dim(0) || nd.dim(2) != rays.half_rays.dim(2) ||
        nd.dim(3) != rays.half_rays.dim(3)) {
        throw ShapeError("noc_from_normalized_depth: depth " + to_string(nd.shape()) + " does not match rays " +
                         to_string(rays.half_rays.shape()));
    }
    auto d = sub(Tensor<T>::scalar(static_cast<T>(distance + 1.0)), mul(Tensor<T>::scalar(T(2)), nd));
    return mul(add(mul(d, rays.half_rays), rays.center), mask);
}

template <typename T>
Tensor<T> noc_from_normalized_depth(const Tensor<T>& nd, const Tensor<T>& mask, const Camera& cam, double distance) {
    return noc_from_normalized_depth(nd, mask, view_rays<T>(std::vector<Camera>(static_cast<std::size_t>(nd.dim(0)), cam)),
                                     distance);
}

/// Mask of a normalized depth batch: nd > threshold.
template <typename T>
Tensor<T> normalized_depth_mask(const Tensor<T>& nd, T threshold) {
    std::vector<T> m(nd.vec().size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = nd.vec()[i] > threshold ? T(1) : T(0);
    return Tensor<T>::from_data(nd.shape(), std::move(m));
}

} // namespace ngp
