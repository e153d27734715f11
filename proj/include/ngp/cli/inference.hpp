#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngp/datagen/generate.hpp"
#include "ngp/geometry.hpp"
#include "ngp/io/png.hpp"
#include "ngp/nets/model.hpp"
#include "ngp/shading.hpp"
#include "ngp/training/pipeline.hpp"

namespace ngp {

/// Image formation variants. Ngp blends the diffuse render with the learned
/// specular residual; NgpBp shades every light with the full Blinn-Phong
/// model and no residual; NgpPlus adds Blinn-Phong shading of extra lights on
/// top of the Ngp image.
enum class Variant { Ngp, NgpBp, NgpPlus };

inline Variant variant_from_string(const std::string& s) {
    if (s == "NGP" || s == "ngp") return Variant::Ngp;
    if (s == "NGP-BP" || s == "ngp-bp") return Variant::NgpBp;
    if (s == "NGP-plus" || s == "ngp-plus") return Variant::NgpPlus;
    throw InvalidArgument("invalid variant '" + s + "' (expected NGP, NGP-BP or NGP-plus)");
}

inline const char* to_string(Variant v) {
    switch (v) {
    case Variant::Ngp: return "NGP";
    case Variant::NgpBp: return "NGP-BP";
    case Variant::NgpPlus: return "NGP-plus";
    }
    return "?";
}

/// Stages of the pipeline that can be switched off for ablations.
enum class Ablation { Full, NoNormalGenerator, NoAlbedoGenerator, NoSpecularGenerator };

inline Ablation ablation_from_string(const std::string& s) {
    if (s == "full") return Ablation::Full;
    if (s == "w/o-G_norm") return Ablation::NoNormalGenerator;
    if (s == "w/o-G_diffa") return Ablation::NoAlbedoGenerator;
    if (s == "w/o-G_respec") return Ablation::NoSpecularGenerator;
    throw InvalidArgument("invalid ablation '" + s + "'");
}

inline const char* to_string(Ablation a) {
    switch (a) {
    case Ablation::Full: return "full";
    case Ablation::NoNormalGenerator: return "w/o-G_norm";
    case Ablation::NoAlbedoGenerator: return "w/o-G_diffa";
    case Ablation::NoSpecularGenerator: return "w/o-G_respec";
    }
    return "?";
}

inline const std::vector<Ablation>& all_ablations() {
    static const std::vector<Ablation> v{Ablation::Full, Ablation::NoNormalGenerator, Ablation::NoAlbedoGenerator,
                                         Ablation::NoSpecularGenerator};
    return v;
}

/// Everything that controls one generated image.
struct InferenceRequest {
    std::vector<double> z_shape;
    double theta_deg = 10.0;
    double phi_deg = 30.0;
    std::vector<double> z_da;           // empty: use `exemplar`
    std::filesystem::path exemplar;     // albedo image whose encoder mean becomes z_da
    LightRig rig = training_rig();      // world frame
    Variant variant = Variant::Ngp;
    LightRig extra_lights;              // NGP-plus layer; NGP-BP adds these as well
    Ablation ablation = Ablation::Full;
};

inline nlohmann::json light_to_json(const DirectionalLight& l) {
    return {{"direction", {l.direction.x(), l.direction.y(), l.direction.z()}},
            {"intensity", l.intensity},
            {"color", {l.color.x(), l.color.y(), l.color.z()}}};
}

inline DirectionalLight light_from_json(const nlohmann::json& j) {
    DirectionalLight l;
    if (j.contains("direction")) {
        const auto& d = j["direction"];
        l.direction = Vec3(d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>());
    } else {
        l.direction = direction_from_angles(j.at("azimuth").get<double>(), j.at("elevation").get<double>());
    }
    l.intensity = j.value("intensity", 1.0);
    if (j.contains("color")) {
        const auto& c = j["color"];
        l.color = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    }
    return l;
}

inline nlohmann::json rig_to_json(const LightRig& rig) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& l : rig.lights) a.push_back(light_to_json(l));
    return a;
}

inline LightRig rig_from_json(const nlohmann::json& j) {
    LightRig rig;
    for (const auto& l : j) rig.lights.push_back(light_from_json(l));
    return rig;
}

inline nlohmann::json request_to_json(const InferenceRequest& r) {
    return {{"z_shape", r.z_shape},
            {"theta", r.theta_deg},
            {"phi", r.phi_deg},
            {"z_da", r.z_da},
            {"exemplar", r.exemplar.string()},
            {"rig", rig_to_json(r.rig)},
            {"variant", to_string(r.variant)},
            {"extra_lights", rig_to_json(r.extra_lights)},
            {"ablation", to_string(r.ablation)}};
}

inline InferenceRequest request_from_json(const nlohmann::json& j) {
    InferenceRequest r;
    r.z_shape = j.value("z_shape", r.z_shape);
    r.theta_deg = j.value("theta", r.theta_deg);
    r.phi_deg = j.value("phi", r.phi_deg);
    r.z_da = j.value("z_da", r.z_da);
    r.exemplar = j.value("exemplar", std::string());
    if (j.contains("rig")) r.rig = rig_from_json(j["rig"]);
    if (j.contains("variant")) r.variant = variant_from_string(j["variant"].get<std::string>());
    if (j.contains("extra_lights")) r.extra_lights = rig_from_json(j["extra_lights"]);
    if (j.contains("ablation")) r.ablation = ablation_from_string(j["ablation"].get<std::string>());
    return r;
}

/// Final image plus every intermediate map, single-sample batches.
struct InferenceResult {
    Camera camera;
    Tensor<float> depth;              // [1,H,W] camera-frame depth, 0 = background
    Tensor<float> normalized_depth;   // [1,1,H,W]
    Tensor<float> mask;               // [1,1,H,W]
    Tensor<float> noc;                // [1,3,H,W]
    Tensor<float> normal;             // [1,3,H,W] view frame
    Tensor<float> albedo;             // [1,3,H,W]
    Tensor<float> specular_albedo;    // [1,3,H,W]
    Tensor<float> roughness;          // [1,1,H,W]
    Tensor<float> diffuse;            // [1,3,H,W]
    Tensor<float> realistic_specular; // [1,3,H,W]
    Tensor<float> image;              // [1,3,H,W]
};

/// Everything inference needs besides the request.
struct InferenceContext {
    const Model<float>* model = nullptr;
    DataConfig data;
    ShadingProfile profile;
};

inline std::vector<float> code_from(const InferenceRequest& req, const InferenceContext& ctx) {
    if (!req.z_da.empty()) {
        if (static_cast<int>(req.z_da.size()) != ctx.model->config.code_dim) {
            throw InvalidArgument("infer: z_da has " + std::to_string(req.z_da.size()) + " entries, expected " +
                                  std::to_string(ctx.model->config.code_dim));
        }
        return {req.z_da.begin(), req.z_da.end()};
    }
    if (req.exemplar.empty()) throw InvalidArgument("infer: request needs z_da or an exemplar");
    auto ex = read_png(req.exemplar);
    const int res = ctx.model->config.resolution;
    if (ex.dim(2) != res || ex.dim(3) != res) {
        throw ShapeError("infer: exemplar is " + std::to_string(ex.dim(3)) + "x" + std::to_string(ex.dim(2)) +
                         ", model resolution is " + std::to_string(res));
    }
    return ctx.model->e_diffa(ex).mu.vec();
}

/// Runs the full generative pipeline for one request: coarse shape, depth
/// projection, reflectance maps, then image formation per `req.variant`.
inline InferenceResult infer(const InferenceRequest& req, const InferenceContext& ctx) {
    if (!ctx.model) throw InvalidArgument("infer: no model");
    const auto& m = *ctx.model;
    if (ctx.data.resolution != m.config.resolution) {
        throw InvalidArgument("checkpoint/config mismatch: model resolution " + std::to_string(m.config.resolution) +
                              " vs data resolution " + std::to_string(ctx.data.resolution));
    }
    validate_rig(req.rig, "infer");
    NoGradGuard ng;
    InferenceResult r;
    const auto views = ctx.data.views();
    r.camera = orbit_camera(req.theta_deg, req.phi_deg, views);
    const auto mesh = sample_coarse_shape(req.z_shape, ctx.data.family());
    r.depth = rasterize_depth(mesh, r.camera);
    const int H = r.camera.height, W = r.camera.width;
    r.normalized_depth = reshape(normalize_depth<float>(r.depth, views.distance), {1, 1, H, W});
    r.mask = depth_mask(r.normalized_depth);
    r.noc = reshape(noc_from_depth(r.depth, r.camera), {1, 3, H, W});

    if (req.ablation == Ablation::NoNormalGenerator) {
        r.normal = reshape(coarse_normals_from_depth(r.depth, r.camera), {1, 3, H, W});
    } else {
        r.normal = mul(m.g_norm(r.normalized_depth), r.mask);
    }
    if (req.ablation == Ablation::NoAlbedoGenerator) {
        r.albedo = mul(Tensor<float>::ones({1, 3, H, W}), r.mask);
    } else {
        const auto z = code_from(req, ctx);
        r.albedo = mul(m.g_diffa(concat<float>({r.noc, r.normal}, 1),
                                 Tensor<float>::from_data({1, static_cast<std::int64_t>(z.size())}, z)),
                       r.mask);
    }
    r.specular_albedo = constant_specular_albedo(r.normalized_depth);
    r.roughness = constant_roughness(r.normalized_depth);
    const auto rig = rig_to_view(req.rig, r.camera);
    const Vec3 view_dir(0, 0, 1);
    ReflectanceMaps<float> maps{r.normal, r.albedo, r.specular_albedo, r.roughness, r.mask};
    r.diffuse = render_diffuse(r.normal, r.albedo, rig, ctx.profile.k_d, r.mask);
    r.realistic_specular = req.ablation == Ablation::NoSpecularGenerator
                               ? Tensor<float>::zeros({1, 3, H, W})
                               : realistic_specular(m, r.normal, r.diffuse, r.mask);

    switch (req.variant) {
    case Variant::Ngp:
        r.image = req.ablation == Ablation::NoSpecularGenerator ? r.diffuse : blend(r.diffuse, r.realistic_specular);
        break;
    case Variant::NgpBp: {
        LightRig all = req.rig;
        all.lights.insert(all.lights.end(), req.extra_lights.lights.begin(), req.extra_lights.lights.end());
        r.image = render_blinn_phong(maps, rig_to_view(all, r.camera), view_dir, ctx.profile.k_d, ctx.profile.k_s);
        break;
    }
    case Variant::NgpPlus: {
        r.image = req.ablation == Ablation::NoSpecularGenerator ? r.diffuse : blend(r.diffuse, r.realistic_specular);
        if (!req.extra_lights.empty()) {
            const auto extra = render_blinn_phong_preclamp(maps, rig_to_view(req.extra_lights, r.camera), view_dir,
                                                           ctx.profile.k_d, ctx.profile.k_s);
            r.image = clamp(add(r.image, extra), 0.f, 1.f);
        }
        break;
    }
    }
    return r;
}

/// Writes each map as a raw tensor pair plus a PNG preview, and the final
/// image as `image.png`.
inline void write_inference(const std::filesystem::path& dir, const InferenceResult& r, const InferenceRequest& req) {
    std::filesystem::create_directories(dir);
    const std::vector<std::pair<std::string, Tensor<float>>> maps{
        {"depth", r.depth},       {"normalized_depth", r.normalized_depth}, {"noc", r.noc},
        {"normal", r.normal},     {"albedo", r.albedo},                     {"specular_albedo", r.specular_albedo},
        {"roughness", r.roughness}, {"diffuse", r.diffuse},                 {"realistic_specular", r.realistic_specular},
        {"image", r.image}};
    for (const auto& [name, t] : maps) save_tensor(dir / name, t);
    write_png(dir / "image.png", r.image);
    write_png(dir / "diffuse.png", r.diffuse);
    write_png(dir / "albedo.png", r.albedo);
    write_png(dir / "noc.png", r.noc);
    write_png(dir / "realistic_specular.png", r.realistic_specular);
    // Normals are shown as (n + 1) / 2; depth and roughness are scaled to [0,1].
    write_png(dir / "normal.png", mul(add(r.normal, Tensor<float>::scalar(1.f)), Tensor<float>::scalar(0.5f)));
    write_png(dir / "depth.png", r.normalized_depth);
    write_png(dir / "roughness.png", mul(r.roughness, Tensor<float>::scalar(1.f / 32.f)));
    std::ofstream os(dir / "request.json");
    if (!os) throw IoError("cannot write " + (dir / "request.json").string());
    os << request_to_json(req).dump(2) << "\n";
}

/// Requests along an azimuth sweep of `steps` poses over the view
/// distribution's azimuth range; shape, appearance and lights stay fixed.
inline std::vector<InferenceRequest> camera_sweep(const InferenceRequest& req, int steps, const ViewDistribution& views) {
    if (steps < 1) throw InvalidArgument("sweep_camera: steps must be at least 1");
    std::vector<InferenceRequest> out;
    for (int i = 0; i < steps; ++i) {
        auto r = req;
        r.phi_deg = steps == 1 ? req.phi_deg
                               : views.phi_min + (views.phi_max - views.phi_min) * i / static_cast<double>(steps - 1);
        out.push_back(r);
    }
    return out;
}

/// One request per rig; everything else fixed.
inline std::vector<InferenceRequest> rig_sequence(const InferenceRequest& req, const std::vector<LightRig>& rigs) {
    if (rigs.empty()) throw InvalidArgument("sweep_lights: no rigs given");
    std::vector<InferenceRequest> out;
    for (const auto& rig : rigs) {
        auto r = req;
        r.rig = rig;
        out.push_back(r);
    }
    return out;
}

/// Requests with the base rig rotated in azimuth over a full turn and
/// intensities scaled by `intensity_scale`; everything else fixed.
inline std::vector<InferenceRequest> light_sweep(const InferenceRequest& req, int steps, double intensity_scale = 1.0) {
    if (steps < 1) throw InvalidArgument("sweep_lights: steps must be at least 1");
    std::vector<InferenceRequest> out;
    for (int i = 0; i < steps; ++i) {
        auto r = req;
        const double a = 2 * M_PI * i / steps;
        Mat3 rot;
        rot << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
        for (auto& l : r.rig.lights) l.direction = rot * l.direction;
        r.rig = r.rig.scaled(intensity_scale);
        out.push_back(r);
    }
    return out;
}

} // namespace ngp
