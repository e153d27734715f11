#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngp/core/error.hpp"
#include "ngp/nets/layers.hpp"
#include "ngp/tensor/autodiff.hpp"
#include "ngp/tensor/serialize.hpp"

namespace ngp {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline void to_json(nlohmann::json& j, const AdamConfig& c) {
    j = {{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}

inline void from_json(const nlohmann::json& j, AdamConfig& c) {
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
}

/// First and second moments per parameter name, plus the shared step count.
template <typename T>
struct AdamState {
    std::int64_t step = 0;
    std::map<std::string, std::vector<T>> m, v;
};

/// One bias-corrected Adam update of `params`. A parameter absent from
/// `grads` is treated as having a zero gradient. Every gradient is checked
/// before any parameter moves, so a non-finite gradient leaves the model and
/// the state untouched.
template <typename T>
void adam_step(const NamedParams<T>& params, const Gradients<T>& grads, AdamState<T>& state, const AdamConfig& cfg) {
    if (!(cfg.lr > 0)) throw InvalidArgument("adam: learning rate must be positive");
    for (const auto& [name, p] : params) {
        if (const auto* g = grads.find(p.id())) {
            if (g->size() != static_cast<std::size_t>(p.numel())) {
                throw ShapeError("adam: gradient of " + name + " has " + std::to_string(g->size()) + " entries, expected " +
                                 std::to_string(p.numel()));
            }
            for (T x : *g) {
                if (!std::isfinite(static_cast<double>(x))) throw NonFiniteError("adam: non-finite gradient for " + name);
            }
        }
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    for (const auto& [name, p] : params) {
        const std::size_t n = static_cast<std::size_t>(p.numel());
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.empty()) m.assign(n, T(0));
        if (v.empty()) v.assign(n, T(0));
        const auto* g = grads.find(p.id());
        Tensor<T> handle = p;
        auto w = handle.mutable_data();
        for (std::size_t i = 0; i < n; ++i) {
            const T gi = g ? (*g)[i] : T(0);
            m[i] = b1 * m[i] + (T(1) - b1) * gi;
            v[i] = b2 * v[i] + (T(1) - b2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] = static_cast<T>(w[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

/// Writes moments as `<dir>/<param>.m` / `.v` tensors and the step count to `<dir>/adam.json`.
template <typename T>
void save_adam_state(const std::filesystem::path& dir, const AdamState<T>& s) {
    std::filesystem::create_directories(dir);
    constexpr DType dt = std::is_same_v<T, double> ? DType::Float64 : DType::Float32;
    for (const auto& [name, m] : s.m) {
        save_tensor(dir / (name + ".m"), Tensor<T>::from_data({static_cast<std::int64_t>(m.size())}, m), dt);
        const auto& v = s.v.at(name);
        save_tensor(dir / (name + ".v"), Tensor<T>::from_data({static_cast<std::int64_t>(v.size())}, v), dt);
    }
    nlohmann::json j{{"step", s.step}, {"params", nlohmann::json::array()}};
    for (const auto& [name, m] : s.m) j["params"].push_back(name);
    std::ofstream os(dir / "adam.json");
    if (!os) throw IoError("cannot write " + (dir / "adam.json").string());
    os << j.dump(2) << "\n";
}

template <typename T>
AdamState<T> load_adam_state(const std::filesystem::path& dir) {
    std::ifstream is(dir / "adam.json");
    if (!is) throw IoError("missing optimizer state " + (dir / "adam.json").string());
    const auto j = nlohmann::json::parse(is);
    AdamState<T> s;
    s.step = j.at("step").get<std::int64_t>();
    for (const auto& name : j.at("params")) {
        const auto n = name.get<std::string>();
        s.m[n] = load_tensor<T>(dir / (n + ".m")).vec();
        s.v[n] = load_tensor<T>(dir / (n + ".v")).vec();
    }
    return s;
}

} // namespace ngp
