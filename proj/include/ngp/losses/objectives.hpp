#pragma once

#include <functional>
#include <map>
#include <string>

#include "ngp/losses/losses.hpp"
#include "ngp/nets/networks.hpp"

namespace ngp {

/// The mappings the reflectance objective is built from. Generators and the
/// renderer are passed as callables so the same graph serves training (real
/// networks) and identity checks (paired lookups).
template <typename T>
struct ReflectanceFunctions {
    using Map = std::function<Tensor<T>(const Tensor<T>&)>;
    Map g_norm;                                                                          // nd -> normals
    std::function<Tensor<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&)> g_diffa;  // (noc, N, z) -> albedo
    Map g_depth;                                                                         // diffuse image -> nd
    std::function<GaussianCode<T>(const Tensor<T>&)> e_diffa;
    // (N, albedo, mask, top?) -> diffuse image. `top` selects the cameras of
    // the depth sample rather than those of the map sample.
    std::function<Tensor<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool)> r_diff;
    // (nd, mask, top?) -> NOC
    std::function<Tensor<T>(const Tensor<T>&, const Tensor<T>&, bool)> noc;
    Map depth_mask;  // nd -> {0,1}
    Map d_norm, d_diffa, d_diff, d_depth, d_noc;
};

/// One unpaired batch: a real depth sample (top cycle) and a real
/// reflectance-map sample (bottom cycle), plus the sampled albedo code.
template <typename T>
struct ReflectanceBatch {
    Tensor<T> depth;        // normalized depth [B,1,H,W]
    Tensor<T> depth_mask;   // [B,1,H,W]
    Tensor<T> depth_noc;    // [B,3,H,W]
    Tensor<T> normal;       // [B,3,H,W]
    Tensor<T> albedo;       // [B,3,H,W]
    Tensor<T> diffuse;      // rendered from (normal, albedo) [B,3,H,W]
    Tensor<T> map_mask;     // [B,1,H,W]
    Tensor<T> code;         // [B,Z]
};

/// Generated maps handed to the critic step (detached there).
template <typename T>
struct ReflectanceFakes {
    Tensor<T> normal, albedo, diffuse, depth, noc;
};

template <typename T>
struct ReflectanceForward {
    std::map<std::string, Tensor<T>> terms;
    ReflectanceFakes<T> fakes;
};

/// Builds every generator-side term of the reflectance objective.
///
/// Top cycle (from real depth d, code z): N = G_norm(d), A = G_diffa(NOC(d), N, z),
/// I = R_diff(N, A), d' = G_depth(I). Bottom cycle (from real maps N_r, A_r):
/// I_r = R_diff(N_r, A_r), d = G_depth(I_r), then N', A' regenerated from d with
/// the encoder's mean code and re-rendered.
template <typename T>
ReflectanceForward<T> reflectance_forward(const ReflectanceFunctions<T>& f, const ReflectanceBatch<T>& b,
                                          GanObjective obj) {
    ReflectanceForward<T> out;
    auto& t = out.terms;

    // Top: depth -> maps -> diffuse image -> depth.
    auto n_g = mul(f.g_norm(b.depth), b.depth_mask);
    auto a_g = mul(f.g_diffa(b.depth_noc, n_g, b.code), b.depth_mask);
    auto i_g = f.r_diff(n_g, a_g, b.depth_mask, true);
    auto d_cyc = f.g_depth(i_g);
    auto noc_cyc = f.noc(d_cyc, f.depth_mask(d_cyc), true);
    t["adv_normal"] = gan_g_loss(f.d_norm(n_g), obj);
    t["adv_albedo"] = gan_g_loss(f.d_diffa(a_g), obj);
    t["adv_diffuse"] = gan_g_loss(f.d_diff(i_g), obj);
    t["cyc_depth"] = cycle_l1(d_cyc, b.depth);
    t["cyc_noc"] = cycle_l1(noc_cyc, b.depth_noc);
    t["cyc_code"] = cycle_l1(f.e_diffa(a_g).mu, b.code);

    // Bottom: maps -> diffuse image -> depth -> maps.
    auto d_g = f.g_depth(b.diffuse);
    auto noc_g = f.noc(d_g, f.depth_mask(d_g), false);
    t["adv_depth"] = gan_g_loss(f.d_depth(d_g), obj);
    t["adv_noc"] = gan_g_loss(f.d_noc(noc_g), obj);
    auto code = f.e_diffa(b.albedo);
    t["kl"] = kl_gaussian(code.mu, code.logvar);
    auto n_cyc = mul(f.g_norm(d_g), b.map_mask);
    auto a_cyc = mul(f.g_diffa(noc_g, b.normal, code.mu), b.map_mask);
    t["cyc_normal"] = cycle_l1(n_cyc, b.normal);
    t["cyc_albedo"] = cycle_l1(a_cyc, b.albedo);
    t["cyc_diffuse"] = cycle_l1(f.r_diff(n_cyc, a_cyc, b.map_mask, false), b.diffuse);

    out.fakes = {n_g, a_g, i_g, d_g, noc_g};
    return out;
}

/// Critic losses on detached fakes against the batch's real samples.
template <typename T>
std::map<std::string, Tensor<T>> reflectance_critic_terms(const ReflectanceFunctions<T>& f, const ReflectanceBatch<T>& b,
                                                          const ReflectanceFakes<T>& fakes, GanObjective obj) {
    return {{"d_normal", gan_d_loss(f.d_norm(b.normal), f.d_norm(fakes.normal.detach()), obj)},
            {"d_albedo", gan_d_loss(f.d_diffa(b.albedo), f.d_diffa(fakes.albedo.detach()), obj)},
            {"d_diffuse", gan_d_loss(f.d_diff(b.diffuse), f.d_diff(fakes.diffuse.detach()), obj)},
            {"d_depth", gan_d_loss(f.d_depth(b.depth), f.d_depth(fakes.depth.detach()), obj)},
            {"d_noc", gan_d_loss(f.d_noc(b.depth_noc), f.d_noc(fakes.noc.detach()), obj)}};
}

/// Weights of the specular stage.
struct SpecularWeights {
    double adversarial = 1.0;
    double despec_cyc = 25.0;
};

inline void to_json(nlohmann::json& j, const SpecularWeights& w) {
    j = {{"adversarial", w.adversarial}, {"despec_cyc", w.despec_cyc}};
}

inline void from_json(const nlohmann::json& j, SpecularWeights& w) {
    w.adversarial = j.value("adversarial", w.adversarial);
    w.despec_cyc = j.value("despec_cyc", w.despec_cyc);
}

inline const std::vector<std::string>& specular_terms() {
    static const std::vector<std::string> names{"adv_image", "cyc_despec"};
    return names;
}

template <typename T>
WeightedLoss<T> total_specular_loss(const std::map<std::string, Tensor<T>>& terms, const SpecularWeights& w = {}) {
    return weighted_total<T>(terms, specular_terms(),
                             [&](const std::string& n) { return n == "adv_image" ? w.adversarial : w.despec_cyc; });
}

} // namespace ngp
