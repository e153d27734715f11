#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngp/nets/networks.hpp"
#include "ngp/tensor/serialize.hpp"

namespace ngp {

/// Widths and sizes shared by every network of the pipeline.
struct ModelConfig {
    int resolution = 32;
    int base = 32;
    int disc_base = 32;
    int n_res = 2;
    int code_dim = 8;
    Activation activation = Activation::Relu;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"resolution", c.resolution}, {"base", c.base},         {"disc_base", c.disc_base},
         {"n_res", c.n_res},           {"code_dim", c.code_dim}, {"activation", to_string(c.activation)}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    c.resolution = j.value("resolution", c.resolution);
    c.base = j.value("base", c.base);
    c.disc_base = j.value("disc_base", c.disc_base);
    c.n_res = j.value("n_res", c.n_res);
    c.code_dim = j.value("code_dim", c.code_dim);
    c.activation = activation_from_string(j.value("activation", std::string(to_string(c.activation))));
}

/// All networks of the pipeline. Reflectance stage: normal, albedo and depth
/// generators, albedo encoder and five map/image critics. Specular stage:
/// realistic-specular generator, de-specularizer and the image critic.
template <typename T>
struct Model {
    ModelConfig config;

    ResnetGenerator<T> g_norm;    // normalized depth -> normals
    ResnetGenerator<T> g_diffa;   // (NOC, normals) + code -> diffuse albedo
    ResnetGenerator<T> g_depth;   // diffuse image -> normalized depth
    GaussianEncoder<T> e_diffa;   // diffuse albedo -> code distribution
    ResnetGenerator<T> g_respec;  // (normals, diffuse image) -> specular residual
    ResnetGenerator<T> g_despec;  // image -> diffuse image

    PatchDiscriminator<T> d_norm, d_diffa, d_diff, d_depth, d_noc, d_image;

    Model() = default;

    Model(const ModelConfig& cfg, std::uint64_t seed) : config(cfg) {
        if (cfg.resolution % 4 != 0 || cfg.resolution < 8) {
            throw InvalidArgument("model: resolution must be a multiple of 4 and at least 8");
        }
        auto gen = [&](int in, int out, int code, Head head, std::uint64_t stream) {
            Rng rng = Rng::stream(seed, stream);
            return ResnetGenerator<T>(GeneratorConfig{in, out, cfg.base, 2, cfg.n_res, code, head, cfg.activation}, rng);
        };
        auto disc = [&](int in, PatchSize p, std::uint64_t stream) {
            Rng rng = Rng::stream(seed, stream);
            return PatchDiscriminator<T>(DiscriminatorConfig{in, cfg.disc_base, p}, rng);
        };
        g_norm = gen(1, 3, 0, Head::L2, 1);
        g_diffa = gen(6, 3, cfg.code_dim, Head::Sigmoid, 2);
        g_depth = gen(3, 1, 0, Head::Softplus, 3);
        {
            Rng rng = Rng::stream(seed, 4);
            e_diffa = GaussianEncoder<T>(EncoderConfig{3, cfg.base, cfg.code_dim, Activation::Leaky}, rng);
        }
        g_respec = gen(6, 3, 0, Head::Relu, 5);
        g_despec = gen(3, 3, 0, Head::Sigmoid, 6);
        d_norm = disc(3, PatchSize::Mid, 11);
        d_diffa = disc(3, PatchSize::Small, 12);
        d_diff = disc(3, PatchSize::Large, 13);
        d_depth = disc(1, PatchSize::Large, 14);
        d_noc = disc(3, PatchSize::Mid, 15);
        d_image = disc(3, PatchSize::Large, 16);
    }

    /// (network name, parameters) in a fixed order.
    std::vector<std::pair<std::string, NamedParams<T>>> networks() const {
        return {{"g_norm", g_norm.parameters()},   {"g_diffa", g_diffa.parameters()}, {"g_depth", g_depth.parameters()},
                {"e_diffa", e_diffa.parameters()}, {"g_respec", g_respec.parameters()},
                {"g_despec", g_despec.parameters()}, {"d_norm", d_norm.parameters()}, {"d_diffa", d_diffa.parameters()},
                {"d_diff", d_diff.parameters()},   {"d_depth", d_depth.parameters()}, {"d_noc", d_noc.parameters()},
                {"d_image", d_image.parameters()}};
    }

    /// Flat "network.param" list.
    NamedParams<T> parameters(const std::vector<std::string>& which = {}) const {
        NamedParams<T> out;
        for (auto& [net, params] : networks()) {
            if (!which.empty() && std::find(which.begin(), which.end(), net) == which.end()) continue;
            for (auto& [name, t] : params) out.emplace_back(net + "." + name, t);
        }
        return out;
    }

    nlohmann::json architecture() const {
        return {{"model", config},           {"g_norm", g_norm.config()},     {"g_diffa", g_diffa.config()},
                {"g_depth", g_depth.config()}, {"e_diffa", e_diffa.config()}, {"g_respec", g_respec.config()},
                {"g_despec", g_despec.config()}, {"d_norm", d_norm.config()}, {"d_diffa", d_diffa.config()},
                {"d_diff", d_diff.config()},   {"d_depth", d_depth.config()}, {"d_noc", d_noc.config()},
                {"d_image", d_image.config()}};
    }

    /// Sets requires_grad on every parameter of the named networks.
    void set_trainable(const std::vector<std::string>& nets, bool on) const {
        for (auto& [name, t] : parameters(nets)) {
            Tensor<T> h = t;
            h.set_requires_grad(on);
        }
    }
};

/// Writes `arch.json` and one tensor file per parameter under `dir/params`.
template <typename T>
void save_model(const std::filesystem::path& dir, const Model<T>& model) {
    std::filesystem::create_directories(dir / "params");
    for (const auto& [name, t] : model.parameters()) {
        save_tensor(dir / "params" / name, t, std::is_same_v<T, double> ? DType::Float64 : DType::Float32);
    }
    std::ofstream os(dir / "arch.json", std::ios::trunc);
    if (!os) throw IoError("cannot write " + (dir / "arch.json").string());
    os << model.architecture().dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

/// Rebuilds a model from `dir`. If `expected` is given, the stored
/// configuration must match it.
template <typename T>
Model<T> load_model(const std::filesystem::path& dir, const ModelConfig* expected = nullptr) {
    const auto arch = read_json_file(dir / "arch.json");
    const auto cfg = arch.at("model").get<ModelConfig>();
    if (expected && nlohmann::json(*expected) != nlohmann::json(cfg)) {
        throw InvalidArgument("checkpoint/config mismatch: checkpoint has " + nlohmann::json(cfg).dump() +
                              ", config requests " + nlohmann::json(*expected).dump());
    }
    Model<T> model(cfg, 0);
    if (model.architecture() != arch) throw IoError("checkpoint architecture does not match its model config");
    for (auto& [name, t] : model.parameters()) {
        auto stored = load_tensor<T>(dir / "params" / name);
        if (stored.shape() != t.shape()) {
            throw IoError("checkpoint parameter " + name + " has shape " + to_string(stored.shape()) + ", expected " +
                          to_string(t.shape()));
        }
        Tensor<T> h = t;
        std::copy(stored.data().begin(), stored.data().end(), h.mutable_data().begin());
    }
    return model;
}

} // namespace ngp
