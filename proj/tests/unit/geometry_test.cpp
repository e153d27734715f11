#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "ngp/geometry.hpp"
#include "raycast_oracle.hpp"

namespace ngp {
namespace {

ViewDistribution view64() {
    ViewDistribution v;
    v.width = v.height = 64;
    return v;
}

std::vector<double> random_latent(Rng& rng, int n = 8) {
    std::vector<double> z(static_cast<std::size_t>(n));
    for (auto& v : z) v = rng.normal();
    return z;
}

double hausdorff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    auto one_way = [](const std::vector<Vec3>& p, const std::vector<Vec3>& q) {
        double worst = 0.0;
        for (const auto& x : p) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& y : q) best = std::min(best, (x - y).squaredNorm());
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return std::max(one_way(a, b), one_way(b, a));
}

// Each undirected edge of a closed, consistently wound mesh is used exactly
// twice, once in each direction.
bool is_watertight(const TriangleMesh& m) {
    std::map<std::pair<int, int>, int> directed;
    for (const auto& t : m.triangles) {
        for (int k = 0; k < 3; ++k) ++directed[{t[k], t[(k + 1) % 3]}];
    }
    for (const auto& [e, n] : directed) {
        if (n != 1) return false;
        auto it = directed.find({e.second, e.first});
        if (it == directed.end() || it->second != 1) return false;
    }
    return true;
}

TEST(Shapes, ZeroLatentIsSphere) {
    ShapeFamilyConfig cfg;
    auto m = sample_coarse_shape(std::vector<double>(8, 0.0), cfg);
    for (const auto& v : m.vertices) EXPECT_NEAR(v.norm(), cfg.radius, 1e-12);
}

TEST(Shapes, InsideUnitSphereWatertightNonDegenerate) {
    Rng rng(10);
    for (const auto& cfg : {ShapeFamilyConfig{}, ShapeFamilyConfig::car(), ShapeFamilyConfig::chair()}) {
        for (int i = 0; i < 20; ++i) {
            auto m = sample_coarse_shape(random_latent(rng), cfg);
            EXPECT_LE(m.max_vertex_norm(), 1.0 + 1e-12);
            EXPECT_TRUE(is_watertight(m));
            for (std::size_t t = 0; t < m.triangles.size(); ++t) EXPECT_GT(m.triangle_area(t), 1e-10);
            EXPECT_EQ(m.parts.size(), m.triangles.size());
        }
    }
}

TEST(Shapes, OutwardOrientation) {
    Rng rng(11);
    auto m = sample_coarse_shape(random_latent(rng), ShapeFamilyConfig{});
    const auto n = m.vertex_normals();
    for (std::size_t i = 0; i < n.size(); ++i) EXPECT_GT(n[i].dot(m.vertices[i]), 0.0);
}

TEST(Shapes, DeterministicAndContinuous) {
    Rng rng(12);
    for (int i = 0; i < 5; ++i) {
        auto z = random_latent(rng);
        auto cfg = ShapeFamilyConfig::car();
        auto a = sample_coarse_shape(z, cfg);
        auto again = sample_coarse_shape(z, cfg);
        EXPECT_EQ(a.vertices, again.vertices);
        auto dz = random_latent(rng);
        double norm = 0;
        for (double v : dz) norm += v * v;
        norm = std::sqrt(norm);
        for (std::size_t k = 0; k < z.size(); ++k) z[k] += 1e-3 * dz[k] / norm;
        auto b = sample_coarse_shape(z, cfg);
        EXPECT_LT(hausdorff(a.vertices, b.vertices), 0.05);
    }
}

TEST(Shapes, RejectsBadLatent) {
    EXPECT_THROW(sample_coarse_shape({0.0, std::nan("")}, ShapeFamilyConfig{.latent_dim = 2}), NonFiniteError);
    EXPECT_THROW(sample_coarse_shape(std::vector<double>(3, 0.0), ShapeFamilyConfig{}), InvalidArgument);
}

TEST(Mesh, ObjRoundTrip) {
    Rng rng(13);
    auto m = sample_coarse_shape(random_latent(rng), ShapeFamilyConfig::chair());
    auto path = std::filesystem::temp_directory_path() / "ngp_geometry_test" / "m.obj";
    write_obj(path, m);
    auto back = read_obj(path);
    EXPECT_EQ(back.triangles, m.triangles);
    ASSERT_EQ(back.vertices.size(), m.vertices.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i) EXPECT_EQ(back.vertices[i], m.vertices[i]);
    std::filesystem::remove_all(path.parent_path());
}

TEST(Camera, FrontViewSitsOnPositiveZ) {
    auto cam = orbit_camera(0.0, 0.0, view64());
    EXPECT_NEAR((cam.center() - Vec3(0, 0, 2)).norm(), 0.0, 1e-12);
    // Origin projects to the image center.
    auto px = cam.project(Vec3::Zero());
    EXPECT_NEAR(px.x(), 32.0, 1e-12);
    EXPECT_NEAR(px.y(), 32.0, 1e-12);
}

TEST(Camera, SamplesRespectDistribution) {
    Rng rng(14);
    auto dist = view64();
    for (int i = 0; i < 1000; ++i) {
        auto v = sample_view(rng, dist);
        const auto& cam = v.camera;
        EXPECT_NEAR(cam.center().norm(), 2.0, 1e-9);
        EXPECT_GE(v.theta_deg, 0.0);
        EXPECT_LE(v.theta_deg, 20.0);
        const double elev = std::asin(cam.center().y() / 2.0) * 180.0 / M_PI;
        EXPECT_GE(elev, -1e-9);
        EXPECT_LE(elev, 20.0 + 1e-9);
        EXPECT_NEAR((cam.R * cam.R.transpose() - Mat3::Identity()).norm(), 0.0, 1e-6);
        EXPECT_NEAR(cam.R.determinant(), 1.0, 1e-6);
        // Looks at the origin.
        EXPECT_NEAR((cam.to_camera(Vec3::Zero()).head<2>()).norm(), 0.0, 1e-9);
        // No roll: the camera x axis stays horizontal.
        EXPECT_NEAR(cam.R.row(0).y(), 0.0, 1e-12);
    }
}

TEST(Raster, FrontoParallelPlane) {
    auto cam = orbit_camera(0.0, 0.0, view64());
    // Plane at camera depth 1.5 is world z = 0.5; one triangle covering the frame.
    TriangleMesh m;
    m.vertices = {Vec3(-10, -10, 0.5), Vec3(10, -10, 0.5), Vec3(0, 20, 0.5)};
    m.triangles = {{0, 1, 2}};
    auto buf = rasterize(m, cam);
    for (double d : buf.depth) EXPECT_NEAR(d, 1.5, 1e-12);
}

TEST(Raster, UnitSphereCenterDepth) {
    auto cam = orbit_camera(0.0, 0.0, view64());
    auto d = rasterize_depth(uv_sphere(1.0, 64, 128), cam);
    // Four pixels straddle the optical axis; all are within a pixel of the pole.
    EXPECT_NEAR(d.vec()[32 * 64 + 32], 1.0, 2e-3);
}

TEST(Raster, MatchesRayCaster) {
    Rng rng(15);
    for (int i = 0; i < 20; ++i) {
        auto mesh = i % 2 ? testing::random_triangle_soup(rng, 6) : sample_coarse_shape(random_latent(rng), ShapeFamilyConfig::car());
        auto cam = sample_camera(rng, view64());
        auto cmp = testing::compare_with_raycast(mesh, cam);
        EXPECT_EQ(cmp.coverage_mismatches, 0);
        EXPECT_LT(cmp.max_depth_error, 1e-4);
    }
}

TEST(Raster, AddingTriangleNeverIncreasesDepth) {
    Rng rng(16);
    auto cam = sample_camera(rng, view64());
    auto mesh = testing::random_triangle_soup(rng, 5);
    auto before = rasterize(mesh, cam);
    auto extra = testing::random_triangle_soup(rng, 1);
    mesh.append(extra, 0);
    auto after = rasterize(mesh, cam);
    for (std::size_t k = 0; k < before.depth.size(); ++k) {
        if (before.depth[k] > 0) EXPECT_LE(after.depth[k], before.depth[k]);
        if (after.depth[k] == 0) EXPECT_EQ(before.depth[k], 0);
    }
}

TEST(Raster, OutOfFrameIsEmpty) {
    auto cam = orbit_camera(0.0, 0.0, view64());
    TriangleMesh m;
    m.vertices = {Vec3(50, 50, 0), Vec3(51, 50, 0), Vec3(50, 51, 0)};
    m.triangles = {{0, 1, 2}};
    auto buf = rasterize(m, cam);
    EXPECT_TRUE(buf.empty);
    for (double d : buf.depth) EXPECT_EQ(d, 0.0);
    EXPECT_THROW(rasterize(TriangleMesh{}, cam), InvalidArgument);
}

TEST(Mask, Definition) {
    auto zero = Tensor<float>::zeros({1, 8, 8});
    for (float v : depth_mask(zero).vec()) EXPECT_EQ(v, 0.0f);
    Rng rng(17);
    auto cam = sample_camera(rng, view64());
    auto d = rasterize_depth(sample_coarse_shape(random_latent(rng), ShapeFamilyConfig::car()), cam);
    auto m = depth_mask(d);
    EXPECT_EQ(mul(m, d).vec(), d.vec());
}

TEST(Mask, SphereDiscArea) {
    const double radius = 0.5;
    auto cam = orbit_camera(0.0, 0.0, view64());
    auto d = rasterize_depth(uv_sphere(radius, 96, 192), cam);
    double area = 0;
    for (float v : depth_mask(d).vec()) area += v;
    // Silhouette cone half-angle asin(r/D) projects to a circle of radius f*tan.
    const double r_px = cam.K(0, 0) * std::tan(std::asin(radius / 2.0));
    EXPECT_NEAR(area / (M_PI * r_px * r_px), 1.0, 0.05);
}

TEST(Noc, KnownPoint) {
    auto cam = orbit_camera(0.0, 0.0, view64());
    const Vec3 p(0.25, -0.5, 0.1);
    // Put a small fronto-parallel patch through p and read the pixel it projects to.
    const Vec2 q = cam.project(p);
    const int row = static_cast<int>(std::floor(q.y())), col = static_cast<int>(std::floor(q.x()));
    const Vec3 center = cam.to_world(cam.to_camera(p).z() * cam.pixel_ray(row, col));
    TriangleMesh m;
    m.vertices = {center + Vec3(-0.05, -0.05, 0), center + Vec3(0.05, -0.05, 0), center + Vec3(0, 0.08, 0)};
    m.triangles = {{0, 1, 2}};
    auto noc = noc_from_depth(rasterize_depth(m, cam), cam);
    const std::size_t plane = 64 * 64, k = static_cast<std::size_t>(row) * 64 + col;
    const Vec3 got(noc.vec()[k], noc.vec()[plane + k], noc.vec()[2 * plane + k]);
    const Vec3 expected = (center + Vec3::Ones()) / 2.0;
    EXPECT_NEAR((got - expected).norm(), 0.0, 1e-6);
    // The encoding itself, on the exact point.
    EXPECT_NEAR(((p + Vec3::Ones()) / 2.0 - Vec3(0.625, 0.25, 0.55)).norm(), 0.0, 1e-15);
    EXPECT_NEAR((noc_to_object(Vec3(0.625, 0.25, 0.55)) - p).norm(), 0.0, 1e-15);
}

TEST(Noc, RoundTripReprojectsToPixel) {
    Rng rng(18);
    for (int i = 0; i < 10; ++i) {
        auto cam = sample_camera(rng, view64());
        auto d = rasterize_depth(sample_coarse_shape(random_latent(rng), ShapeFamilyConfig::car()), cam);
        auto noc = noc_from_depth(d, cam);
        const std::size_t plane = 64 * 64;
        for (int r = 0; r < 64; ++r) {
            for (int c = 0; c < 64; ++c) {
                const std::size_t k = static_cast<std::size_t>(r) * 64 + c;
                if (d.vec()[k] == 0) {
                    for (int ch = 0; ch < 3; ++ch) EXPECT_EQ(noc.vec()[ch * plane + k], 0.0f);
                    continue;
                }
                const Vec3 n(noc.vec()[k], noc.vec()[plane + k], noc.vec()[2 * plane + k]);
                for (int ch = 0; ch < 3; ++ch) {
                    EXPECT_GE(n[ch], 0.0);
                    EXPECT_LE(n[ch], 1.0);
                }
                const Vec2 px = cam.project(noc_to_object(n));
                EXPECT_LT((px - Vec2(c + 0.5, r + 0.5)).norm(), 0.5);
            }
        }
    }
}

TEST(Noc, DifferentiableVersionMatchesDirect) {
    Rng rng(19);
    auto dist = view64();
    auto cam = sample_camera(rng, dist);
    auto d = rasterize_depth(sample_coarse_shape(random_latent(rng), ShapeFamilyConfig::car()), cam);
    auto nd = reshape(normalize_depth<double>(d, dist.distance), {1, 1, 64, 64});
    auto mask = reshape(depth_mask(d).cast<double>(), {1, 1, 64, 64});
    auto soft = noc_from_normalized_depth(nd, mask, cam, dist.distance);
    auto direct = noc_from_depth(d, cam);
    double worst = 0;
    for (std::size_t k = 0; k < direct.vec().size(); ++k) worst = std::max(worst, std::abs(soft.vec()[k] - direct.vec()[k]));
    EXPECT_LT(worst, 1e-5);
    EXPECT_THROW(noc_from_depth(Tensor<float>::zeros({1, 8, 8}), cam), ShapeError);
}

TEST(CoarseNormals, PlaneFacesViewer) {
    auto cam = orbit_camera(0.0, 0.0, view64());
    TriangleMesh m;
    m.vertices = {Vec3(-10, -10, 0.5), Vec3(10, -10, 0.5), Vec3(0, 20, 0.5)};
    m.triangles = {{0, 1, 2}};
    auto n = coarse_normals_from_depth(rasterize_depth(m, cam), cam);
    const std::size_t plane = 64 * 64;
    for (std::size_t k = 0; k < plane; ++k) {
        EXPECT_NEAR(n.vec()[k], 0.0, 1e-4);
        EXPECT_NEAR(n.vec()[plane + k], 0.0, 1e-4);
        EXPECT_NEAR(n.vec()[2 * plane + k], 1.0, 1e-4);
    }
}

TEST(CoarseNormals, UnitLengthAndCameraFacing) {
    Rng rng(20);
    auto cam = sample_camera(rng, view64());
    auto d = rasterize_depth(sample_coarse_shape(random_latent(rng), ShapeFamilyConfig::car()), cam);
    auto n = coarse_normals_from_depth(d, cam);
    const std::size_t plane = 64 * 64;
    for (int r = 0; r < 64; ++r) {
        for (int c = 0; c < 64; ++c) {
            const std::size_t k = static_cast<std::size_t>(r) * 64 + c;
            if (d.vec()[k] == 0) continue;
            const Vec3 v(n.vec()[k], n.vec()[plane + k], n.vec()[2 * plane + k]);
            EXPECT_NEAR(v.norm(), 1.0, 1e-4);
            // Toward the camera along this pixel's ray, expressed in the view frame.
            const Vec3 to_cam = camera_to_view(-cam.pixel_ray(r, c).normalized());
            EXPECT_GE(v.dot(to_cam), 0.0);
        }
    }
}

TEST(CoarseNormals, SphereCenterFacesViewer) {
    auto cam = orbit_camera(0.0, 0.0, view64());
    auto n = coarse_normals_from_depth(rasterize_depth(uv_sphere(0.5, 96, 192), cam), cam);
    const std::size_t plane = 64 * 64, k = 32 * 64 + 32;
    EXPECT_NEAR(n.vec()[2 * plane + k], 1.0, 1e-3);
}

} // namespace
} // namespace ngp
