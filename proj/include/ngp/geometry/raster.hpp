#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "ngp/core/error.hpp"
#include "ngp/geometry/camera.hpp"
#include "ngp/geometry/mesh.hpp"
#include "ngp/tensor/tensor.hpp"

namespace ngp {

/// Per-pixel visibility buffers. Depth 0 and triangle -1 mark background;
/// barycentrics are perspective-correct weights of the visible triangle's
/// vertices.
struct RasterBuffers {
    int width = 0;
    int height = 0;
    std::vector<double> depth;
    std::vector<int> triangle;
    std::vector<std::array<double, 3>> bary;
    bool empty = true;  // nothing projected into the frame

    std::size_t index(int row, int col) const { return static_cast<std::size_t>(row) * width + col; }

    /// Depth map as a [1,H,W] float tensor.
    Tensor<float> depth_map() const {
        std::vector<float> v(depth.begin(), depth.end());
        return Tensor<float>::from_data({1, height, width}, std::move(v));
    }
};

/// Z-buffer rasterization sampling pixel centers. Depth is interpolated
/// perspective-correctly (1/z is affine in screen space); each covered pixel
/// keeps the nearest surface.
inline RasterBuffers rasterize(const TriangleMesh& mesh, const Camera& cam) {
    if (mesh.empty()) throw InvalidArgument("rasterize_depth: empty mesh");
    if (cam.width < 8 || cam.height < 8) throw InvalidArgument("rasterize_depth: resolution below 8x8");
    validate_mesh(mesh);
    const int W = cam.width, H = cam.height;
    RasterBuffers out;
    out.width = W;
    out.height = H;
    out.depth.assign(static_cast<std::size_t>(W) * H, 0.0);
    out.triangle.assign(out.depth.size(), -1);
    out.bary.assign(out.depth.size(), {0.0, 0.0, 0.0});
    std::vector<double> zbuf(out.depth.size(), std::numeric_limits<double>::infinity());

    constexpr double kNear = 1e-6;
    std::vector<Vec3> pc(mesh.vertices.size());
    for (std::size_t i = 0; i < pc.size(); ++i) pc[i] = cam.to_camera(mesh.vertices[i]);

    for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
        const auto& tri = mesh.triangles[ti];
        const Vec3 a = pc[tri[0]], b = pc[tri[1]], c = pc[tri[2]];
        if (a.z() <= kNear || b.z() <= kNear || c.z() <= kNear) continue;  // no clipping; behind-camera skipped
        const Vec2 sa = cam.project_camera(a), sb = cam.project_camera(b), sc = cam.project_camera(c);
        const double area = (sb - sa).x() * (sc - sa).y() - (sb - sa).y() * (sc - sa).x();
        if (std::abs(area) < 1e-14) continue;
        const double inv_area = 1.0 / area;
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({sa.x(), sb.x(), sc.x()}) - 0.5)));
        const int x1 = std::min(W - 1, static_cast<int>(std::ceil(std::max({sa.x(), sb.x(), sc.x()}) - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({sa.y(), sb.y(), sc.y()}) - 0.5)));
        const int y1 = std::min(H - 1, static_cast<int>(std::ceil(std::max({sa.y(), sb.y(), sc.y()}) - 0.5)));
        for (int row = y0; row <= y1; ++row) {
            const double py = row + 0.5;
            for (int col = x0; col <= x1; ++col) {
                const double px = col + 0.5;
                // Screen-space barycentrics; sign-normalized by the triangle's area.
                const double w0 = ((sb.x() - px) * (sc.y() - py) - (sb.y() - py) * (sc.x() - px)) * inv_area;
                const double w1 = ((sc.x() - px) * (sa.y() - py) - (sc.y() - py) * (sa.x() - px)) * inv_area;
                const double w2 = 1.0 - w0 - w1;
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                const double inv_z = w0 / a.z() + w1 / b.z() + w2 / c.z();
                const double z = 1.0 / inv_z;
                const std::size_t k = out.index(row, col);
                if (z < zbuf[k]) {
                    zbuf[k] = z;
                    out.depth[k] = z;
                    out.triangle[k] = static_cast<int>(ti);
                    out.bary[k] = {w0 / a.z() * z, w1 / b.z() * z, w2 / c.z() * z};
                    out.empty = false;
                }
            }
        }
    }
    return out;
}

/// Camera-space depth map [1,H,W]; background pixels are 0.
inline Tensor<float> rasterize_depth(const TriangleMesh& mesh, const Camera& cam) {
    return rasterize(mesh, cam).depth_map();
}

} // namespace ngp
