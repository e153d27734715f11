#pragma once

#include <memory>
#include <vector>

#include "ngp/datagen/datasets.hpp"
#include "ngp/datagen/generate.hpp"
#include "ngp/geometry/maps.hpp"
#include "ngp/losses.hpp"
#include "ngp/nets/model.hpp"
#include "ngp/shading.hpp"

namespace ngp {

/// Cameras of the two halves of an unpaired batch: `top` for the depth
/// samples, `bottom` for the map samples.
template <typename T>
struct BatchViews {
    std::vector<Camera> top, bottom;
    ViewRays<T> top_rays, bottom_rays;

    BatchViews(std::vector<Camera> t, std::vector<Camera> b)
        : top(std::move(t)), bottom(std::move(b)), top_rays(view_rays<T>(top)), bottom_rays(view_rays<T>(bottom)) {}
};

struct PipelineConstants {
    double k_d = 0.6;
    double distance = 2.0;
    double mask_threshold = 0.1;
};

/// The reflectance objective's mappings realized by `model`'s networks, the
/// diffuse renderer under the training rig and differentiable NOC.
template <typename T>
ReflectanceFunctions<T> model_functions(const Model<T>& m, std::shared_ptr<const BatchViews<T>> views,
                                        const PipelineConstants& k) {
    ReflectanceFunctions<T> f;
    f.g_norm = [&m](const Tensor<T>& x) { return m.g_norm(x); };
    f.g_diffa = [&m](const Tensor<T>& noc, const Tensor<T>& n, const Tensor<T>& z) {
        return m.g_diffa(concat<T>({noc, n}, 1), z);
    };
    f.g_depth = [&m](const Tensor<T>& x) { return m.g_depth(x); };
    f.e_diffa = [&m](const Tensor<T>& x) { return m.e_diffa(x); };
    f.r_diff = [views, k](const Tensor<T>& n, const Tensor<T>& a, const Tensor<T>& mask, bool top) {
        return render_training_diffuse(n, a, mask, top ? views->top : views->bottom, k.k_d);
    };
    f.noc = [views, k](const Tensor<T>& nd, const Tensor<T>& mask, bool top) {
        return noc_from_normalized_depth(nd, mask, top ? views->top_rays : views->bottom_rays, k.distance);
    };
    f.depth_mask = [k](const Tensor<T>& nd) { return normalized_depth_mask(nd.detach(), static_cast<T>(k.mask_threshold)); };
    f.d_norm = [&m](const Tensor<T>& x) { return m.d_norm(x); };
    f.d_diffa = [&m](const Tensor<T>& x) { return m.d_diffa(x); };
    f.d_diff = [&m](const Tensor<T>& x) { return m.d_diff(x); };
    f.d_depth = [&m](const Tensor<T>& x) { return m.d_depth(x); };
    f.d_noc = [&m](const Tensor<T>& x) { return m.d_noc(x); };
    return f;
}

/// Assembles an unpaired batch from depth samples `di` and map samples `mi`.
template <typename T>
ReflectanceBatch<T> reflectance_batch(const ReflectanceDataset& d, const std::vector<std::int64_t>& di,
                                      const std::vector<std::int64_t>& mi, const Tensor<T>& code,
                                      const BatchViews<T>& views, double k_d) {
    if (d.depth.size() == 0 || d.maps.size() == 0) throw EmptyDatasetError("reflectance corpus is empty");
    NoGradGuard ng;
    ReflectanceBatch<T> b;
    b.depth = gather_samples(d.depth.depth, di).template cast<T>();
    b.depth_mask = depth_mask(b.depth);
    b.depth_noc = gather_samples(d.depth.noc, di).template cast<T>();
    b.normal = gather_samples(d.maps.normal, mi).template cast<T>();
    b.albedo = gather_samples(d.maps.albedo, mi).template cast<T>();
    b.map_mask = gather_samples(d.maps.mask, mi).template cast<T>();
    b.diffuse = render_training_diffuse(b.normal, b.albedo, b.map_mask, views.bottom, k_d);
    b.code = code;
    return b;
}

/// Normal, albedo and diffuse image generated from a real normalized depth.
template <typename T>
struct GeneratedMaps {
    Tensor<T> normal, albedo, diffuse, mask;
};

template <typename T>
GeneratedMaps<T> generate_maps(const Model<T>& m, const Tensor<T>& depth, const Tensor<T>& noc, const Tensor<T>& code,
                               const std::vector<Camera>& cams, double k_d) {
    GeneratedMaps<T> g;
    g.mask = depth_mask(depth.detach());
    g.normal = mul(m.g_norm(depth), g.mask);
    g.albedo = mul(m.g_diffa(concat<T>({noc, g.normal}, 1), code), g.mask);
    g.diffuse = render_training_diffuse(g.normal, g.albedo, g.mask, cams, k_d);
    return g;
}

template <typename T>
struct SpecularForward {
    std::map<std::string, Tensor<T>> terms;
    Tensor<T> specular;   // masked realistic-specular residual
    Tensor<T> composite;  // blend(diffuse, specular)
};

/// Residual specular map for (normal, diffuse image), masked to the object.
template <typename T>
Tensor<T> realistic_specular(const Model<T>& m, const Tensor<T>& normal, const Tensor<T>& diffuse, const Tensor<T>& mask) {
    return mul(m.g_respec(concat<T>({normal, diffuse}, 1)), mask);
}

/// Specular objective: the composite must fool the image critic, and the
/// de-specularizer must recover the diffuse image from it.
template <typename T>
SpecularForward<T> specular_forward(const Model<T>& m, const Tensor<T>& normal, const Tensor<T>& diffuse,
                                    const Tensor<T>& mask, GanObjective obj) {
    SpecularForward<T> s;
    s.specular = realistic_specular(m, normal, diffuse, mask);
    s.composite = blend(diffuse, s.specular);
    s.terms["adv_image"] = gan_g_loss(m.d_image(s.composite), obj);
    s.terms["cyc_despec"] = cycle_l1(m.g_despec(s.composite), diffuse);
    return s;
}

} // namespace ngp
