#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngp/datagen/datasets.hpp"
#include "ngp/geometry.hpp"
#include "ngp/shading.hpp"

namespace ngp {

/// Corpus synthesis settings.
struct DataConfig {
    std::string category = "car";
    int resolution = 32;
    ViewDistribution view;           // width/height are overridden by `resolution`
    double shape_radius = 0.65;      // bounding radius; 0.65 still fits the 50 mm frame at 2 m
    double bump_strength = 0.25;     // tangential normal perturbation scale
    double stripe_probability = 0.6;
    double realistic_roughness_min = 6.0;
    double realistic_roughness_max = 24.0;
    int realistic_extra_lights = 1;

    ShapeFamilyConfig family() const {
        auto f = ShapeFamilyConfig::named(category);
        f.radius = shape_radius;
        return f;
    }

    ViewDistribution views() const {
        ViewDistribution v = view;
        v.width = v.height = resolution;
        return v;
    }
};

inline void to_json(nlohmann::json& j, const DataConfig& c) {
    j = {{"category", c.category},
         {"resolution", c.resolution},
         {"distance", c.view.distance},
         {"theta_range", {c.view.theta_min, c.view.theta_max}},
         {"phi_range", {c.view.phi_min, c.view.phi_max}},
         {"focal_mm", c.view.focal_mm},
         {"shape_radius", c.shape_radius},
         {"bump_strength", c.bump_strength},
         {"stripe_probability", c.stripe_probability},
         {"realistic_roughness_range", {c.realistic_roughness_min, c.realistic_roughness_max}},
         {"realistic_extra_lights", c.realistic_extra_lights}};
}

inline void from_json(const nlohmann::json& j, DataConfig& c) {
    c.category = j.value("category", c.category);
    c.resolution = j.value("resolution", c.resolution);
    c.view.distance = j.value("distance", c.view.distance);
    if (j.contains("theta_range")) {
        c.view.theta_min = j["theta_range"].at(0).get<double>();
        c.view.theta_max = j["theta_range"].at(1).get<double>();
    }
    if (j.contains("phi_range")) {
        c.view.phi_min = j["phi_range"].at(0).get<double>();
        c.view.phi_max = j["phi_range"].at(1).get<double>();
    }
    c.view.focal_mm = j.value("focal_mm", c.view.focal_mm);
    c.shape_radius = j.value("shape_radius", c.shape_radius);
    c.bump_strength = j.value("bump_strength", c.bump_strength);
    c.stripe_probability = j.value("stripe_probability", c.stripe_probability);
    if (j.contains("realistic_roughness_range")) {
        c.realistic_roughness_min = j["realistic_roughness_range"].at(0).get<double>();
        c.realistic_roughness_max = j["realistic_roughness_range"].at(1).get<double>();
    }
    c.realistic_extra_lights = j.value("realistic_extra_lights", c.realistic_extra_lights);
}

/// Stream tags of the shape pools. Each corpus draws shape seeds from its own
/// tag, so depth, map and image samples never share a shape.
enum class ShapePool : std::uint64_t { Depth = 101, Maps = 102, Images = 103 };

inline std::uint64_t pool_shape_seed(std::uint64_t seed, ShapePool pool, std::int64_t index) {
    return Rng::derive(seed, static_cast<std::uint64_t>(pool), static_cast<std::uint64_t>(index));
}

namespace detail {

/// Sum of a few random plane waves; used for bumps and albedo noise.
struct Waves {
    std::vector<Vec3> freq;
    std::vector<double> phase, amp;

    Waves(Rng& rng, int n, double f_lo, double f_hi, double total_amp) {
        for (int i = 0; i < n; ++i) {
            Vec3 d(rng.normal(), rng.normal(), rng.normal());
            d.normalize();
            const double f = rng.uniform(f_lo, f_hi);
            freq.push_back(d * f);
            phase.push_back(rng.uniform(0, 2 * M_PI));
            amp.push_back(total_amp / n);
        }
    }
    double value(const Vec3& p) const {
        double v = 0;
        for (std::size_t i = 0; i < freq.size(); ++i) v += amp[i] * std::sin(freq[i].dot(p) + phase[i]);
        return v;
    }
    /// Gradient normalized so its magnitude is at most sum(amp).
    Vec3 gradient(const Vec3& p) const {
        Vec3 g = Vec3::Zero();
        for (std::size_t i = 0; i < freq.size(); ++i) {
            g += amp[i] * std::cos(freq[i].dot(p) + phase[i]) * freq[i].normalized();
        }
        return g;
    }
};

/// Per-part paint: a base color, an optional stripe color and band pattern.
struct Paint {
    std::array<Vec3, 3> base, stripe;
    std::array<bool, 3> striped{};
    std::array<Vec3, 3> stripe_dir;
    std::array<double, 3> stripe_freq{}, stripe_phase{};
    Waves noise;

    Paint(Rng& rng, double stripe_probability) : noise(rng, 3, 4.0, 10.0, 0.08) {
        for (int k = 0; k < 3; ++k) {
            base[k] = Vec3(rng.uniform(0.15, 0.9), rng.uniform(0.15, 0.9), rng.uniform(0.15, 0.9));
            stripe[k] = Vec3(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95));
            striped[k] = rng.uniform() < stripe_probability;
            stripe_dir[k] = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
            stripe_freq[k] = rng.uniform(8.0, 20.0);
            stripe_phase[k] = rng.uniform(0, 2 * M_PI);
        }
    }

    Vec3 color(int part, const Vec3& p) const {
        const int k = std::clamp(part, 0, 2);
        Vec3 c = base[k];
        if (striped[k] && std::sin(stripe_freq[k] * stripe_dir[k].dot(p) + stripe_phase[k]) > 0.4) c = stripe[k];
        c += Vec3::Constant(noise.value(p));
        return c.cwiseMax(0.0).cwiseMin(1.0);
    }
};

/// Everything rendered for one view of one shape.
struct SampleMaps {
    Tensor<float> depth;   // [1,1,H,W] normalized
    Tensor<float> noc;     // [1,3,H,W]
    Tensor<float> normal;  // [1,3,H,W]
    Tensor<float> albedo;  // [1,3,H,W]
    Tensor<float> mask;    // [1,1,H,W]
};

inline TriangleMesh sample_shape(std::uint64_t shape_seed, const ShapeFamilyConfig& family) {
    Rng rng(shape_seed);
    std::vector<double> z(static_cast<std::size_t>(family.latent_dim));
    for (auto& v : z) v = rng.normal();
    return sample_coarse_shape(z, family);
}

/// Rasterizes `mesh` and paints view-frame normals (smooth vertex normals plus
/// a procedural bump) and procedural albedo from the visible surface points.
inline SampleMaps render_sample_maps(const TriangleMesh& mesh, const Camera& cam, double distance, Rng& rng,
                                     const DataConfig& cfg, bool with_appearance) {
    const auto buf = rasterize(mesh, cam);
    const int H = cam.height, W = cam.width;
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const Shape s1{1, 1, H, W}, s3{1, 3, H, W};
    const auto depth = buf.depth_map();
    SampleMaps out;
    out.depth = reshape(normalize_depth<float>(depth, distance), s1);
    out.mask = depth_mask(out.depth);
    out.noc = reshape(noc_from_depth(depth, cam), s3);
    if (!with_appearance) return out;

    const auto vn = mesh.vertex_normals();
    const Waves bump(rng, 3, 10.0, 22.0, cfg.bump_strength);
    const Paint paint(rng, cfg.stripe_probability);
    std::vector<float> nv(static_cast<std::size_t>(3 * plane), 0.f), av(nv.size(), 0.f);
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const std::size_t k = buf.index(r, c);
            const int ti = buf.triangle[k];
            if (ti < 0) continue;
            const auto& tri = mesh.triangles[static_cast<std::size_t>(ti)];
            const auto& b = buf.bary[k];
            Vec3 p = Vec3::Zero(), n = Vec3::Zero();
            for (int v = 0; v < 3; ++v) {
                p += b[v] * mesh.vertices[static_cast<std::size_t>(tri[v])];
                n += b[v] * vn[static_cast<std::size_t>(tri[v])];
            }
            n.normalize();
            const Vec3 g = bump.gradient(p);
            n = (n - (g - g.dot(n) * n)).normalized();
            const Vec3 nview = world_to_view(cam, n).normalized();
            const int part = mesh.parts.empty() ? 0 : mesh.parts[static_cast<std::size_t>(ti)];
            const Vec3 a = paint.color(part, p);
            for (int ch = 0; ch < 3; ++ch) {
                nv[static_cast<std::size_t>(ch * plane) + k] = static_cast<float>(nview[ch]);
                av[static_cast<std::size_t>(ch * plane) + k] = static_cast<float>(a[ch]);
            }
        }
    }
    // Re-normalize in single precision so stored normals are unit to float accuracy.
    for (std::int64_t k = 0; k < plane; ++k) {
        double n2 = 0;
        for (int ch = 0; ch < 3; ++ch) n2 += double(nv[ch * plane + k]) * nv[ch * plane + k];
        if (n2 == 0) continue;
        const double inv = 1.0 / std::sqrt(n2);
        for (int ch = 0; ch < 3; ++ch) nv[ch * plane + k] = static_cast<float>(nv[ch * plane + k] * inv);
    }
    out.normal = Tensor<float>::from_data(s3, std::move(nv));
    out.albedo = Tensor<float>::from_data(s3, std::move(av));
    return out;
}

template <typename T>
Tensor<T> stack(const std::vector<Tensor<T>>& parts) {
    NoGradGuard ng;
    return concat<T>(parts, 0);
}

inline SampleInfo sample_info(std::uint64_t shape_seed, const SampledView& v) {
    return {shape_seed, v.theta_deg, v.phi_deg, v.camera};
}

} // namespace detail

/// Diffuse render of a map batch under the training rig, each sample lit in
/// its own view frame.
template <typename T>
Tensor<T> render_training_diffuse(const Tensor<T>& normal, const Tensor<T>& albedo, const Tensor<T>& mask,
                                  const std::vector<Camera>& cams, double k_d, const LightRig& rig = training_rig()) {
    if (static_cast<std::int64_t>(cams.size()) != normal.dim(0)) {
        throw ShapeError("render_training_diffuse: " + std::to_string(cams.size()) + " cameras for batch " +
                         std::to_string(normal.dim(0)));
    }
    if (cams.size() == 1) return render_diffuse(normal, albedo, rig_to_view(rig, cams[0]), k_d, mask);
    std::vector<Tensor<T>> parts;
    for (std::int64_t i = 0; i < normal.dim(0); ++i) {
        parts.push_back(render_diffuse(slice(normal, 0, i, i + 1), slice(albedo, 0, i, i + 1),
                                       rig_to_view(rig, cams[static_cast<std::size_t>(i)]), k_d,
                                       slice(mask, 0, i, i + 1)));
    }
    return concat<T>(parts, 0);
}

/// Unpaired reflectance corpus of `n` depth samples and `n` map samples.
inline ReflectanceDataset make_reflectance_dataset(std::int64_t n, std::uint64_t seed, const DataConfig& cfg = {}) {
    if (n < 1) throw InvalidArgument("make_reflectance_dataset: need at least one sample");
    const auto family = cfg.family();
    const auto views = cfg.views();
    ReflectanceDataset d;
    std::vector<Tensor<float>> dd, dn, mn, ma, mm, md;
    for (std::int64_t i = 0; i < n; ++i) {
        const auto shape_seed = pool_shape_seed(seed, ShapePool::Depth, i);
        Rng rng(Rng::derive(shape_seed, 1));
        const auto view = sample_view(rng, views);
        const auto s = detail::render_sample_maps(detail::sample_shape(shape_seed, family), view.camera,
                                                  views.distance, rng, cfg, false);
        d.depth.info.push_back(detail::sample_info(shape_seed, view));
        dd.push_back(s.depth);
        dn.push_back(s.noc);
    }
    for (std::int64_t i = 0; i < n; ++i) {
        const auto shape_seed = pool_shape_seed(seed, ShapePool::Maps, i);
        Rng rng(Rng::derive(shape_seed, 1));
        const auto view = sample_view(rng, views);
        const auto s = detail::render_sample_maps(detail::sample_shape(shape_seed, family), view.camera,
                                                  views.distance, rng, cfg, true);
        d.maps.info.push_back(detail::sample_info(shape_seed, view));
        mn.push_back(s.normal);
        ma.push_back(s.albedo);
        mm.push_back(s.mask);
        md.push_back(s.depth);
    }
    d.depth.depth = detail::stack(dd);
    d.depth.noc = detail::stack(dn);
    d.maps.normal = detail::stack(mn);
    d.maps.albedo = detail::stack(ma);
    d.maps.mask = detail::stack(mm);
    d.maps.depth = detail::stack(md);
    return d;
}

/// "Real photo" corpus: graded diffuse renders under the training rig plus
/// Blinn-Phong highlights from the rig and jittered extra lights.
inline ImageSet make_realistic_image_set(std::int64_t n, std::uint64_t seed, const DataConfig& cfg = {}) {
    if (n < 1) throw InvalidArgument("make_realistic_image_set: need at least one sample");
    const auto family = cfg.family();
    const auto profile = ShadingProfile::named(cfg.category == "blob" ? "car" : cfg.category);
    const auto views = cfg.views();
    const Vec3 view_dir(0, 0, 1);
    ImageSet set;
    std::vector<Tensor<float>> imgs, diffs, masks;
    for (std::int64_t i = 0; i < n; ++i) {
        const auto shape_seed = pool_shape_seed(seed, ShapePool::Images, i);
        Rng rng(Rng::derive(shape_seed, 1));
        const auto view = sample_view(rng, views);
        const auto s = detail::render_sample_maps(detail::sample_shape(shape_seed, family), view.camera,
                                                  views.distance, rng, cfg, true);
        const auto rig = rig_to_view(training_rig(), view.camera);
        // Grading gains >= 1 keep the graded render at least as bright as the plain one.
        const Vec3 gain(rng.uniform(1.0, 1.12), rng.uniform(1.0, 1.12), rng.uniform(1.0, 1.12));
        auto diffuse_pre = mul(render_diffuse_preclamp(s.normal, s.albedo, rig, profile.k_d, s.mask),
                               detail::channel_vector<float>(gain));
        const float alpha = static_cast<float>(rng.uniform(cfg.realistic_roughness_min, cfg.realistic_roughness_max));
        ReflectanceMaps<float> maps{s.normal, s.albedo, constant_specular_albedo(s.depth),
                                    constant_roughness(s.depth, alpha), s.mask};
        auto highlights = render_blinn_phong_preclamp(maps, rig, view_dir, 0.0, profile.k_s);
        LightRig extra;
        for (int k = 0; k < cfg.realistic_extra_lights; ++k) extra.lights.push_back(random_extra_light(rng));
        if (!extra.empty()) {
            highlights = add(highlights, render_blinn_phong_preclamp(maps, rig_to_view(extra, view.camera), view_dir,
                                                                     profile.k_d, profile.k_s));
        }
        diffs.push_back(clamp(diffuse_pre, 0.f, 1.f));
        imgs.push_back(clamp(add(diffuse_pre, highlights), 0.f, 1.f));
        masks.push_back(s.mask);
        set.info.push_back(detail::sample_info(shape_seed, view));
    }
    set.image = detail::stack(imgs);
    set.diffuse = detail::stack(diffs);
    set.mask = detail::stack(masks);
    return set;
}

} // namespace ngp
