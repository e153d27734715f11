#pragma once

#include <functional>
#include <stdexcept>

#include "ngp/geometry.hpp"
#include "ngp/losses.hpp"
#include "ngp/shading.hpp"
#include "test_util.hpp"

namespace ngp::testing {

using Td = Tensor<double>;

// A paired sample: every map is derived from one rendered coarse shape, so
// identity lookups close every cycle exactly.
struct PairedSample {
    ReflectanceBatch<double> batch;
    LightRig rig = training_rig();
    double k_d = 0.8;
};

inline PairedSample paired_sample(std::uint64_t seed) {
    Rng rng(seed);
    ViewDistribution dist;
    dist.width = dist.height = 16;
    auto view = sample_view(rng, dist);
    std::vector<double> z(8);
    for (auto& v : z) v = rng.normal();
    const auto mesh = sample_coarse_shape(z);
    const auto depth = rasterize_depth(mesh, view.camera);
    const Shape s1{1, 1, 16, 16}, s3{1, 3, 16, 16};

    PairedSample p;
    auto& b = p.batch;
    b.depth = reshape(normalize_depth<double>(depth, dist.distance), s1);
    b.depth_mask = normalized_depth_mask(b.depth, 0.0);
    b.depth_noc = reshape(noc_from_depth(depth, view.camera).cast<double>(), s3);
    b.normal = reshape(coarse_normals_from_depth(depth, view.camera).cast<double>(), s3);
    b.map_mask = b.depth_mask;
    b.albedo = mul(random_tensor<double>(rng, s3, 0.1, 0.9), b.map_mask);
    b.diffuse = render_diffuse(b.normal, b.albedo, p.rig, p.k_d, b.map_mask);
    b.code = random_tensor<double>(rng, {1, 8});
    return p;
}

// Returns `value` for an input equal to `key`; any other input is a wiring error.
inline std::function<Td(const Td&)> lookup(const Td& key, const Td& value) {
    return [key, value](const Td& x) {
        if (x.shape() != key.shape() || x.vec() != key.vec()) throw std::logic_error("lookup: unexpected input");
        return value;
    };
}

inline ReflectanceFunctions<double> identity_functions(const PairedSample& p, const Td& logvar) {
    const auto& b = p.batch;
    ReflectanceFunctions<double> f;
    f.g_norm = lookup(b.depth, b.normal);
    f.g_depth = lookup(b.diffuse, b.depth);
    f.g_diffa = [b](const Td& noc, const Td& n, const Td& z) {
        lookup(b.depth_noc, noc)(noc);
        lookup(b.normal, n)(n);
        lookup(b.code, z)(z);
        return b.albedo;
    };
    f.e_diffa = [b, logvar](const Td& a) { return GaussianCode<double>{lookup(b.albedo, b.code)(a), logvar}; };
    f.r_diff = [p](const Td& n, const Td& a, const Td& m, bool) { return render_diffuse(n, a, p.rig, p.k_d, m); };
    f.noc = [b](const Td& nd, const Td& m, bool) {
        lookup(b.depth, nd)(nd);
        lookup(b.depth_mask, m)(m);
        return b.depth_noc;
    };
    f.depth_mask = [](const Td& nd) { return normalized_depth_mask(nd, 0.0); };
    auto critic = [](const Td& x) { return mean(x, {1}, true); };
    f.d_norm = f.d_diffa = f.d_diff = f.d_depth = f.d_noc = critic;
    return f;
}

} // namespace ngp::testing
