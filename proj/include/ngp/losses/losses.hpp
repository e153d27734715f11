#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngp/core/error.hpp"
#include "ngp/tensor/ops.hpp"

namespace ngp {

enum class GanObjective { LeastSquares, CrossEntropy };

inline GanObjective gan_objective_from_string(const std::string& s) {
    if (s == "lsgan") return GanObjective::LeastSquares;
    if (s == "log") return GanObjective::CrossEntropy;
    throw InvalidArgument("unknown GAN objective '" + s + "'");
}

inline const char* to_string(GanObjective g) { return g == GanObjective::LeastSquares ? "lsgan" : "log"; }

/// Generator side of the least-squares objective: mean((f - 1)^2).
template <typename T>
Tensor<T> lsgan_g_loss(const Tensor<T>& fake) {
    auto d = sub(fake, Tensor<T>::scalar(T(1)));
    return mean(mul(d, d));
}

/// Critic side: 0.5 mean((r - 1)^2) + 0.5 mean(f^2).
template <typename T>
Tensor<T> lsgan_d_loss(const Tensor<T>& real, const Tensor<T>& fake) {
    auto r = sub(real, Tensor<T>::scalar(T(1)));
    return add(mul(Tensor<T>::scalar(T(0.5)), mean(mul(r, r))), mul(Tensor<T>::scalar(T(0.5)), mean(mul(fake, fake))));
}

/// Non-saturating cross-entropy form on logits: mean(-log sigmoid(f)).
template <typename T>
Tensor<T> log_g_loss(const Tensor<T>& fake) {
    return mean(softplus(mul(Tensor<T>::scalar(T(-1)), fake)));
}

/// mean(-log sigmoid(r)) + mean(-log(1 - sigmoid(f))).
template <typename T>
Tensor<T> log_d_loss(const Tensor<T>& real, const Tensor<T>& fake) {
    return add(mean(softplus(mul(Tensor<T>::scalar(T(-1)), real))), mean(softplus(fake)));
}

template <typename T>
Tensor<T> gan_g_loss(const Tensor<T>& fake, GanObjective obj) {
    return obj == GanObjective::LeastSquares ? lsgan_g_loss(fake) : log_g_loss(fake);
}

template <typename T>
Tensor<T> gan_d_loss(const Tensor<T>& real, const Tensor<T>& fake, GanObjective obj) {
    return obj == GanObjective::LeastSquares ? lsgan_d_loss(real, fake) : log_d_loss(real, fake);
}

/// Mean absolute difference of two equally shaped tensors.
template <typename T>
Tensor<T> cycle_l1(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw ShapeError("cycle_l1: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    return mean(abs(sub(a, b)));
}

/// KL divergence of N(mu, exp(logvar)) from N(0, I):
/// 0.5 sum(mu^2 + exp(logvar) - 1 - logvar), averaged over the batch for [B,Z] inputs.
template <typename T>
Tensor<T> kl_gaussian(const Tensor<T>& mu, const Tensor<T>& logvar) {
    if (mu.shape() != logvar.shape()) {
        throw ShapeError("kl_gaussian: " + to_string(mu.shape()) + " vs " + to_string(logvar.shape()));
    }
    auto inner = sub(sub(add(mul(mu, mu), exp(logvar)), Tensor<T>::scalar(T(1))), logvar);
    const T batch = mu.ndim() == 2 ? static_cast<T>(mu.dim(0)) : T(1);
    return mul(Tensor<T>::scalar(T(0.5) / batch), sum(inner));
}

/// Term weights of the reflectance objective.
struct LossWeights {
    double adversarial = 1.0;
    double depth_cyc = 10.0;
    double noc_cyc = 10.0;
    double normal_cyc = 25.0;
    double albedo_cyc = 25.0;
    double diffuse_cyc = 25.0;
    double code_cyc = 1.0;
    double kl = 0.001;

    double of(const std::string& term) const {
        if (term.rfind("adv_", 0) == 0) return adversarial;
        if (term == "cyc_depth") return depth_cyc;
        if (term == "cyc_noc") return noc_cyc;
        if (term == "cyc_normal") return normal_cyc;
        if (term == "cyc_albedo") return albedo_cyc;
        if (term == "cyc_diffuse") return diffuse_cyc;
        if (term == "cyc_code") return code_cyc;
        if (term == "kl") return kl;
        throw InvalidArgument("no weight for loss term '" + term + "'");
    }
};

inline void to_json(nlohmann::json& j, const LossWeights& w) {
    j = {{"adversarial", w.adversarial}, {"depth_cyc", w.depth_cyc},   {"noc_cyc", w.noc_cyc},
         {"normal_cyc", w.normal_cyc},   {"albedo_cyc", w.albedo_cyc}, {"diffuse_cyc", w.diffuse_cyc},
         {"code_cyc", w.code_cyc},       {"kl", w.kl}};
}

inline void from_json(const nlohmann::json& j, LossWeights& w) {
    w.adversarial = j.value("adversarial", w.adversarial);
    w.depth_cyc = j.value("depth_cyc", w.depth_cyc);
    w.noc_cyc = j.value("noc_cyc", w.noc_cyc);
    w.normal_cyc = j.value("normal_cyc", w.normal_cyc);
    w.albedo_cyc = j.value("albedo_cyc", w.albedo_cyc);
    w.diffuse_cyc = j.value("diffuse_cyc", w.diffuse_cyc);
    w.code_cyc = j.value("code_cyc", w.code_cyc);
    w.kl = j.value("kl", w.kl);
}

/// Terms of the reflectance objective: five adversarial, six cycle, one KL.
inline const std::vector<std::string>& reflectance_terms() {
    static const std::vector<std::string> names{"adv_normal", "adv_albedo", "adv_diffuse", "adv_depth",
                                                "adv_noc",    "cyc_depth",  "cyc_noc",     "cyc_normal",
                                                "cyc_albedo", "cyc_diffuse", "cyc_code",   "kl"};
    return names;
}

template <typename T>
struct WeightedLoss {
    Tensor<T> total;
    std::map<std::string, double> terms;     // unweighted values
    std::map<std::string, double> weighted;  // weight * value
};

/// Weighted sum over `names`; zero-weight terms are left out of the graph.
template <typename T>
WeightedLoss<T> weighted_total(const std::map<std::string, Tensor<T>>& terms, const std::vector<std::string>& names,
                               const std::function<double(const std::string&)>& weight) {
    WeightedLoss<T> out;
    for (const auto& name : names) {
        auto it = terms.find(name);
        if (it == terms.end() || !it->second.defined()) throw MissingTermError(name);
        const double value = static_cast<double>(it->second.item());
        const double w = weight(name);
        out.terms[name] = value;
        out.weighted[name] = w * value;
        if (w == 0.0) continue;
        auto contrib = mul(Tensor<T>::scalar(static_cast<T>(w)), it->second);
        out.total = out.total.defined() ? add(out.total, contrib) : contrib;
    }
    if (!out.total.defined()) out.total = Tensor<T>::scalar(T(0));
    return out;
}

/// Total reflectance-stage generator loss with its per-term breakdown.
template <typename T>
WeightedLoss<T> total_2d_loss(const std::map<std::string, Tensor<T>>& terms, const LossWeights& w = {}) {
    return weighted_total<T>(terms, reflectance_terms(), [&](const std::string& n) { return w.of(n); });
}

} // namespace ngp
